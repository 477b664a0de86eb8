use std::collections::BTreeSet;

use nalgebra::Unit;

use super::lattice::{fibonacci_lattice, nearest_lattice_index};
use super::{Label, LabeledCloud};
use crate::error::{Error, Result};
use crate::geometry::{principal_axes, project_onto_sphere, unit, UnitVec3, Vec3, DEGENERACY_TOL};

/// Non-stem points close to the stem base, and their radial projections onto
/// the sphere `S(p_sb, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSet {
    pub points: Vec<Vec3>,
    pub projected: Vec<Vec3>,
    /// Search radius `r_o` around the stem base.
    pub search_radius: f64,
    /// Radius `d_o` of the sphere each obstacle point stands for.
    pub point_radius: f64,
}

impl ObstacleSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

/// Free-space sampling around the stem and the chosen grasp target.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeSpaceResult {
    /// All Fibonacci samples of `S(p_sb, l)`.
    pub lattice: Vec<Vec3>,
    /// Lattice indices matched (and removed) by projected obstacles.
    pub removed: BTreeSet<usize>,
    /// Lattice indices that survive both the obstacle match and the plane cut.
    pub free_indices: Vec<usize>,
    pub free: Vec<Vec3>,
    /// `p_gd`.
    pub target: Vec3,
    /// Normal of the plane fitted to the obstacles, oriented toward the
    /// camera. `None` when there were no obstacles and the cut was skipped.
    pub plane_normal: Option<UnitVec3>,
    pub plane_point: Option<Vec3>,
}

/// Collects the `Other` points within `search_radius` (inclusive) of `p_sb`
/// and projects them onto the sphere of `sphere_radius` around `p_sb`.
///
/// Points coinciding with `p_sb` have no projection and are skipped.
pub fn select_obstacles(
    world: &LabeledCloud,
    p_sb: &Vec3,
    sphere_radius: f64,
    search_radius: f64,
    point_radius: f64,
) -> Result<ObstacleSet> {
    if !(search_radius > 0.0) {
        return Err(Error::InvalidParameter("obstacle search radius must be positive"));
    }
    let mut points = Vec::new();
    let mut projected = Vec::new();
    for (p, label) in world.iter() {
        if label != Label::Other {
            continue;
        }
        let d = (p - p_sb).norm();
        if d <= search_radius && d > DEGENERACY_TOL {
            points.push(*p);
            projected.push(project_onto_sphere(p, p_sb, sphere_radius)?);
        }
    }
    Ok(ObstacleSet {
        points,
        projected,
        search_radius,
        point_radius,
    })
}

/// Index into `free` of the point farthest from its nearest projected
/// obstacle. Ties go to the lowest index; with no obstacles every minimum is
/// `+∞` and index 0 wins.
pub fn select_free_space_target(free: &[Vec3], projected_obstacles: &[Vec3]) -> Result<usize> {
    if free.is_empty() {
        return Err(Error::NoFreeSpace);
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, f) in free.iter().enumerate() {
        let clearance = projected_obstacles
            .iter()
            .map(|o| (f - o).norm())
            .fold(f64::INFINITY, f64::min);
        if clearance > best.1 {
            best = (i, clearance);
        }
    }
    Ok(best.0)
}

/// Computes the free space on `S(p_sb, l)` and the target `p_gd`.
///
/// Lattice points nearest to a projected obstacle are removed, then every
/// point behind the plane fitted to the obstacles (as seen from
/// `camera_pos`) is discarded. With no obstacles the cut is skipped and the
/// target is the sample most aligned with the base-to-camera direction.
pub fn compute_free_space(
    obstacles: &ObstacleSet,
    p_sb: &Vec3,
    l: f64,
    camera_pos: &Vec3,
    n: usize,
) -> Result<FreeSpaceResult> {
    if !(l > 0.0) {
        return Err(Error::InvalidParameter("sphere radius must be positive"));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("lattice needs at least one sample"));
    }
    let lattice = fibonacci_lattice(n, p_sb, l);

    if obstacles.is_empty() {
        let to_camera = camera_pos - p_sb;
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, p) in lattice.iter().enumerate() {
            let s = (p - p_sb).dot(&to_camera);
            if s > best.1 {
                best = (i, s);
            }
        }
        let free_indices: Vec<usize> = (0..n).collect();
        return Ok(FreeSpaceResult {
            target: lattice[best.0],
            free: lattice.clone(),
            lattice,
            removed: BTreeSet::new(),
            free_indices,
            plane_normal: None,
            plane_point: None,
        });
    }

    let removed: BTreeSet<usize> = obstacles
        .projected
        .iter()
        .map(|o| nearest_lattice_index(o, n, p_sb, l))
        .collect();

    let (plane_point, normal) = obstacle_plane(&obstacles.points, camera_pos)?;
    let free_indices: Vec<usize> = (0..n)
        .filter(|i| !removed.contains(i))
        .filter(|&i| (lattice[i] - plane_point).dot(&normal) >= 0.0)
        .collect();
    let free: Vec<Vec3> = free_indices.iter().map(|&i| lattice[i]).collect();
    let best = select_free_space_target(&free, &obstacles.projected)?;
    Ok(FreeSpaceResult {
        target: free[best],
        lattice,
        removed,
        free_indices,
        free,
        plane_normal: Some(normal),
        plane_point: Some(plane_point),
    })
}

/// Plane through the obstacle mean spanned by the two major principal axes,
/// with its normal oriented toward the camera.
///
/// Rank-deficient obstacle sets (one point, or collinear points) have no
/// unique plane; the normal then falls back to the camera direction with the
/// obstacle line's direction removed.
fn obstacle_plane(points: &[Vec3], camera_pos: &Vec3) -> Result<(Vec3, UnitVec3)> {
    let axes = principal_axes(points);
    let to_camera = camera_pos - axes.mean;
    let spread = axes.values[0].max(0.0);
    let normal = if spread > 0.0 && axes.values[1] > 1e-12 * spread {
        axes.vectors[2]
    } else if spread > 0.0 {
        let major = axes.vectors[0];
        to_camera - major * major.dot(&to_camera)
    } else {
        to_camera
    };
    let mut normal = unit(&normal).or_else(|_| unit(&to_camera))?;
    if normal.dot(&to_camera) < 0.0 {
        normal = Unit::new_unchecked(-normal.into_inner());
    }
    Ok((axes.mean, normal))
}
