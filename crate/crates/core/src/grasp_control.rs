//! Grasping-arm velocity: force control along the control direction `n_c`,
//! position control in its orthogonal complement and alignment of the
//! grasped crop axis with `n_c`.

use nalgebra::Matrix3;

use crate::error::Result;
use crate::geometry::{unit, Twist, UnitVec3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspGains {
    pub k_pg: f64,
    pub k_fp: f64,
    pub k_fi: f64,
    pub k_og: f64,
    /// Desired stretching force along `n_c` (N).
    pub f_d: f64,
    /// Anti-windup bound on the force-error integral (N·s).
    pub integral_limit: f64,
}

impl Default for GraspGains {
    fn default() -> Self {
        Self {
            k_pg: 0.15,
            k_fp: 0.001,
            k_fi: 0.0002,
            k_og: 0.3,
            f_d: 3.0,
            integral_limit: 50.0,
        }
    }
}

/// Controller state that persists across control steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspState {
    /// Accumulated force error (N·s).
    pub integral_e_f: f64,
    pub n_c: UnitVec3,
    pub p_gd: Vec3,
}

impl GraspState {
    pub fn new(p_gd: Vec3, p_sb: &Vec3) -> Result<Self> {
        Ok(Self {
            integral_e_f: 0.0,
            n_c: control_direction(&p_gd, p_sb)?,
            p_gd,
        })
    }

    /// Full grasp twist for the current gripper state; advances the integral.
    pub fn step(&mut self, p_g: &Vec3, y_g: &Vec3, force: &Vec3, gains: &GraspGains, dt: f64) -> Twist {
        let n_c = self.n_c;
        let v_p = position_velocity(p_g, &self.p_gd, &n_c, gains.k_pg);
        let v_f = force_velocity(force, &n_c, self, gains, dt);
        let w = orientation_velocity(y_g, &n_c, gains.k_og);
        grasp_twist(&v_p, &v_f, &w)
    }
}

/// Unit direction from the stem base to the free-space target.
pub fn control_direction(p_gd: &Vec3, p_sb: &Vec3) -> Result<UnitVec3> {
    unit(&(p_gd - p_sb))
}

/// Orthogonal projector `I - n nᵀ`.
pub fn orthogonal_projector(n_c: &UnitVec3) -> Matrix3<f64> {
    Matrix3::identity() - n_c.into_inner() * n_c.transpose()
}

/// `-k_pg (I - n_c n_cᵀ)(p_g - p_gd)`; always orthogonal to `n_c`.
pub fn position_velocity(p_g: &Vec3, p_gd: &Vec3, n_c: &UnitVec3, k_pg: f64) -> Vec3 {
    let e = p_g - p_gd;
    // explicit rejection keeps v·n_c at rounding level
    let along = n_c.dot(&e);
    let ortho = e - n_c.into_inner() * along;
    let ortho = ortho - n_c.into_inner() * n_c.dot(&ortho);
    -ortho * k_pg
}

/// Force-loop velocity `-n_c (k_fp e_f + k_fi ∫e_f)` with `e_f = n_cᵀf - f_d`.
///
/// The output uses the integral accumulated so far; the integral is then
/// advanced by `e_f·dt` and clamped to `±integral_limit`.
pub fn force_velocity(f: &Vec3, n_c: &UnitVec3, state: &mut GraspState, gains: &GraspGains, dt: f64) -> Vec3 {
    let e_f = n_c.dot(f) - gains.f_d;
    let v = -n_c.into_inner() * (gains.k_fp * e_f + gains.k_fi * state.integral_e_f);
    let limit = gains.integral_limit.abs();
    state.integral_e_f = (state.integral_e_f + e_f * dt).clamp(-limit, limit);
    v
}

/// `-k_og (n_c × y_g)`: rotates `y_g` toward `n_c`.
pub fn orientation_velocity(y_g: &Vec3, n_c: &UnitVec3, k_og: f64) -> Vec3 {
    -n_c.cross(y_g) * k_og
}

pub fn grasp_twist(v_p: &Vec3, v_f: &Vec3, v_w: &Vec3) -> Twist {
    Twist::new(v_p + v_f, *v_w)
}
