//! Simulated depth camera: field-of-view pyramid, stem detection range and
//! occlusion by obstacle points.

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::scene::{Label, LabeledCloud};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    /// Full horizontal field of view (rad).
    pub hfov: f64,
    pub vfov: f64,
    /// Stem points farther than this are returned as `Other`.
    pub max_stem_range: f64,
    /// Radius of the spheres around obstacle points that block sight lines.
    pub d_vis: f64,
    pub downsample: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            hfov: 65f64.to_radians(),
            vfov: 40f64.to_radians(),
            max_stem_range: 0.7,
            d_vis: 0.005,
            downsample: 3,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let fov_ok = |f: f64| f > 0.0 && f < std::f64::consts::PI;
        if !fov_ok(self.hfov) || !fov_ok(self.vfov) {
            return Err(Error::InvalidParameter("field of view must lie in (0, pi)"));
        }
        if self.downsample == 0 {
            return Err(Error::InvalidParameter("downsample factor must be at least 1"));
        }
        if !(self.d_vis >= 0.0 && self.max_stem_range > 0.0) {
            return Err(Error::InvalidParameter("camera ranges must be positive"));
        }
        Ok(())
    }

    /// True when `p` lies inside the view pyramid of a camera at `pose`.
    pub fn in_view(&self, pose: &Pose, p: &Vec3) -> bool {
        let q = pose.to_local(p);
        q.z > 0.0 && q.x.abs() <= q.z * (self.hfov / 2.0).tan() && q.y.abs() <= q.z * (self.vfov / 2.0).tan()
    }
}

/// True when the segment from `a` to `b` passes within `radius` of `o`.
pub fn segment_hits_sphere(a: &Vec3, b: &Vec3, o: &Vec3, radius: f64) -> bool {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 { ((o - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * t - o).norm_squared() <= radius * radius
}

/// Point cloud perceived from `camera`.
///
/// Every `downsample`-th point of `cloud` inside the view pyramid is
/// returned. Stem points within range are kept as `Stem` only if their sight
/// line clears every obstacle sphere of the full cloud; occluded ones are
/// dropped. Stem points out of range come back as `Other`. Obstacle points
/// themselves are not culled against each other.
pub fn render_view(cloud: &LabeledCloud, camera: &Pose, model: &CameraModel) -> LabeledCloud {
    let step = model.downsample.max(1);
    let c = camera.position;
    let obstacles: Vec<Vec3> = cloud.with_label(Label::Other);
    let mut out = LabeledCloud::with_capacity(cloud.len() / step + 1);
    for (p, label) in cloud.iter().step_by(step) {
        if !model.in_view(camera, p) {
            continue;
        }
        match label {
            Label::Other => out.push(*p, Label::Other),
            Label::Stem => {
                if (p - c).norm() > model.max_stem_range {
                    out.push(*p, Label::Other);
                } else if !occluded(&c, p, &obstacles, model.d_vis) {
                    out.push(*p, Label::Stem);
                }
            }
        }
    }
    out
}

fn occluded(c: &Vec3, p: &Vec3, obstacles: &[Vec3], d_vis: f64) -> bool {
    let d = p - c;
    let len2 = d.norm_squared();
    let len = len2.sqrt();
    let r2 = d_vis * d_vis;
    obstacles.iter().any(|o| {
        let w = o - c;
        let t = w.dot(&d);
        // obstacles entirely behind the camera or past the point are skipped
        if t < -d_vis * len || t > len2 + d_vis * len {
            return false;
        }
        let t = (t / len2).clamp(0.0, 1.0);
        (w - d * t).norm_squared() <= r2
    })
}

/// Ground-truth count of stem points hidden from `camera` by obstacle
/// spheres, ignoring range, field of view and down-sampling.
pub fn count_occluded_stem(cloud: &LabeledCloud, camera: &Vec3, d_vis: f64) -> (usize, usize) {
    let obstacles = cloud.with_label(Label::Other);
    let stems = cloud.with_label(Label::Stem);
    let hidden = stems.iter().filter(|p| occluded(camera, p, &obstacles, d_vis)).count();
    (hidden, stems.len())
}
