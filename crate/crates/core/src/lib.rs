//! Kinematic simulation of a bimanual pre-cut harvesting controller.
//!
//! A camera arm reaches a region around a crop stem, centers it in view and
//! moves to unveil the stem from occluding leaves; a grasping arm then
//! stretches the stem toward the most obstacle-free direction with a hybrid
//! force/position/orientation law. See the crate README for the pipeline.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera_control;
pub mod coordinator;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod grasp_control;
pub mod scene;
pub mod simworld;

pub use error::{Error, Result};
pub use geometry::{Pose, Rotation, Twist, UnitVec3, Vec3};
