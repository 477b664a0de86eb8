//! Synthetic mock-vine scene: a bent stem hanging from a branch, a grape
//! cluster at its free end and leaf patches around it.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{angle_axis_between, unit, Pose, Rotation, Vec3};
use crate::scene::{fibonacci_unit_point, Label, LabeledCloud};

/// Flat rectangular patch of obstacle points, given relative to the branch
/// anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafSpec {
    pub offset: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    pub half_u: f64,
    pub half_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub branch_anchor: Vec3,
    pub stem_length: f64,
    /// Angle between the two stem segments, degrees.
    pub stem_bend_deg: f64,
    pub stem_spacing: f64,
    /// Uniform per-axis jitter on stem points (m).
    pub stem_jitter: f64,
    pub grape_radius: f64,
    pub grape_gap: f64,
    pub grape_points: usize,
    pub branch_radius: f64,
    pub branch_half_length: f64,
    /// Offset of the branch axis from the anchor.
    pub branch_offset: Vec3,
    pub obstacle_spacing: f64,
    pub obstacle_jitter: f64,
    pub leaves: Vec<LeafSpec>,
    /// Initial camera position relative to the branch anchor.
    pub camera_offset: Vec3,
    /// The initial view is aimed at the grape center shifted by this amount.
    pub camera_aim_offset: Vec3,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            branch_anchor: Vec3::new(0.0, 0.0, 1.0),
            stem_length: 0.07,
            stem_bend_deg: 35.0,
            stem_spacing: 0.0005,
            stem_jitter: 0.0005,
            grape_radius: 0.03,
            grape_gap: 0.008,
            grape_points: 1800,
            branch_radius: 0.004,
            branch_half_length: 0.25,
            branch_offset: Vec3::new(0.0, 0.006, 0.012),
            obstacle_spacing: 0.0025,
            obstacle_jitter: 0.0005,
            leaves: default_leaves(),
            camera_offset: Vec3::new(0.12, -0.75, -0.07),
            camera_aim_offset: Vec3::new(0.05, 0.0, 0.04),
        }
    }
}

/// Occluding leaf in front of the upper stem, one behind the stem and one to
/// the side.
pub fn default_leaves() -> Vec<LeafSpec> {
    vec![
        LeafSpec {
            offset: Vec3::new(-0.01, -0.06, -0.012),
            u_axis: Vec3::x(),
            v_axis: Vec3::new(0.0, 0.3, 1.0),
            half_u: 0.035,
            half_v: 0.02,
        },
        LeafSpec {
            offset: Vec3::new(0.0, 0.045, -0.03),
            u_axis: Vec3::x(),
            v_axis: Vec3::z(),
            half_u: 0.05,
            half_v: 0.035,
        },
        LeafSpec {
            offset: Vec3::new(-0.07, -0.01, -0.05),
            u_axis: Vec3::y(),
            v_axis: Vec3::z(),
            half_u: 0.03,
            half_v: 0.03,
        },
    ]
}

/// Ground-truth scene in its rest configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct VineScene {
    pub full_cloud: LabeledCloud,
    pub stem_polyline: Vec<Vec3>,
    pub branch_anchor: Vec3,
    pub stem_length: f64,
    pub grape_center: Vec3,
    pub grape_radius: f64,
    pub obstacle_patches: Vec<Vec<Vec3>>,
    pub stem_points: Vec<Vec3>,
    pub grape_points: Vec<Vec3>,
    /// Gripper holding the grape at the stem's free end.
    pub gripper_start: Pose,
    pub camera_start: Pose,
}

pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<VineScene> {
    if !(config.stem_length > 0.0 && config.stem_spacing > 0.0 && config.obstacle_spacing > 0.0) {
        return Err(Error::InvalidParameter("scene lengths must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = config.branch_anchor;

    // two equal segments; the lower one bent toward +x
    let half = config.stem_length / 2.0;
    let bend = config.stem_bend_deg.to_radians();
    let mid = anchor - Vec3::z() * half;
    let lower_dir = Vec3::new(bend.sin(), 0.0, -bend.cos());
    let end = mid + lower_dir * half;
    let polyline = vec![anchor, mid, end];

    let n_stem = (config.stem_length / config.stem_spacing).round().max(1.0) as usize;
    let mut stem_points = Vec::with_capacity(n_stem + 1);
    for i in 0..=n_stem {
        let s = config.stem_length * i as f64 / n_stem as f64;
        let p = if s <= half {
            anchor - Vec3::z() * s
        } else {
            mid + lower_dir * (s - half)
        };
        stem_points.push(p + jitter(&mut rng, config.stem_jitter));
    }

    let y_g = lower_dir;
    let gripper_start = Pose::new(end, gripper_orientation(&y_g)?);
    let grape_center = end + y_g * (config.grape_gap + config.grape_radius);
    let grape_points: Vec<Vec3> = (0..config.grape_points)
        .map(|i| grape_center + fibonacci_unit_point(i, config.grape_points) * config.grape_radius)
        .map(|p| p + jitter(&mut rng, config.obstacle_jitter))
        .collect();

    let mut patches = Vec::new();
    patches.push(branch_points(config, &mut rng));
    for leaf in &config.leaves {
        patches.push(leaf_points(leaf, &anchor, config, &mut rng)?);
    }

    let mut cloud = LabeledCloud::with_capacity(
        stem_points.len() + grape_points.len() + patches.iter().map(Vec::len).sum::<usize>(),
    );
    for p in &stem_points {
        cloud.push(*p, Label::Stem);
    }
    for p in grape_points.iter().chain(patches.iter().flatten()) {
        cloud.push(*p, Label::Other);
    }

    let camera_pos = anchor + config.camera_offset;
    let camera_start = Pose::looking_along(camera_pos, &(grape_center + config.camera_aim_offset - camera_pos))?;

    Ok(VineScene {
        camera_start,
        full_cloud: cloud,
        stem_polyline: polyline,
        branch_anchor: anchor,
        stem_length: config.stem_length,
        grape_center,
        grape_radius: config.grape_radius,
        obstacle_patches: patches,
        stem_points,
        grape_points,
        gripper_start,
    })
}

fn jitter(rng: &mut ChaCha8Rng, amp: f64) -> Vec3 {
    if amp <= 0.0 {
        return Vec3::zeros();
    }
    Vec3::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))
}

/// Gripper frame with `y` along the crop axis and `z` as horizontal as possible.
pub fn gripper_orientation(y_g: &Vec3) -> Result<Rotation> {
    let y = unit(y_g)?.into_inner();
    let mut z = y.cross(&Vec3::z());
    if z.norm() < 1e-6 {
        z = y.cross(&Vec3::x());
    }
    let z = z.normalize();
    let x = y.cross(&z);
    Ok(Rotation::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[x, y, z])))
}

fn branch_points(config: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let axis_point = config.branch_anchor + config.branch_offset;
    let h = config.obstacle_spacing;
    let n_len = (2.0 * config.branch_half_length / h).round() as usize;
    let n_around = ((2.0 * PI * config.branch_radius / h).ceil() as usize).max(6);
    let mut pts = Vec::with_capacity((n_len + 1) * n_around);
    for i in 0..=n_len {
        let x = -config.branch_half_length + i as f64 * h;
        for k in 0..n_around {
            let a = 2.0 * PI * k as f64 / n_around as f64;
            let p = axis_point + Vec3::new(x, config.branch_radius * a.cos(), config.branch_radius * a.sin());
            pts.push(p + jitter(rng, config.obstacle_jitter));
        }
    }
    pts
}

fn leaf_points(leaf: &LeafSpec, anchor: &Vec3, config: &SceneConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec3>> {
    let u = unit(&leaf.u_axis)?.into_inner();
    let v = unit(&(leaf.v_axis - u * u.dot(&leaf.v_axis)))?.into_inner();
    let h = config.obstacle_spacing;
    let nu = (2.0 * leaf.half_u / h).round() as usize;
    let nv = (2.0 * leaf.half_v / h).round() as usize;
    let center = anchor + leaf.offset;
    let mut pts = Vec::with_capacity((nu + 1) * (nv + 1));
    for i in 0..=nu {
        for j in 0..=nv {
            let a = -leaf.half_u + i as f64 * h;
            let b = -leaf.half_v + j as f64 * h;
            pts.push(center + u * a + v * b + jitter(rng, config.obstacle_jitter));
        }
    }
    Ok(pts)
}

impl VineScene {
    /// Rebuilds a scene from a labeled cloud and its truth sidecar. Stem
    /// points are the `Stem` labels, grape points the `Other` points on the
    /// grape sphere; everything else is one static patch.
    pub fn from_cloud(cloud: LabeledCloud, truth: &super::SceneTruth, camera_start: Pose) -> Result<Self> {
        let y_g = truth.grape_center - truth.stem_end;
        let gripper_start = Pose::new(truth.stem_end, gripper_orientation(&y_g)?);
        let mut stem_points = Vec::new();
        let mut grape_points = Vec::new();
        let mut other = Vec::new();
        let shell = truth.grape_radius + 0.003;
        for (p, label) in cloud.iter() {
            match label {
                Label::Stem => stem_points.push(*p),
                Label::Other if (p - truth.grape_center).norm() <= shell => grape_points.push(*p),
                Label::Other => other.push(*p),
            }
        }
        Ok(Self {
            camera_start,
            full_cloud: cloud,
            stem_polyline: vec![truth.branch_anchor, truth.stem_end],
            branch_anchor: truth.branch_anchor,
            stem_length: truth.stem_length,
            grape_center: truth.grape_center,
            grape_radius: truth.grape_radius,
            obstacle_patches: vec![other],
            stem_points,
            grape_points,
            gripper_start,
        })
    }

    pub fn truth(&self) -> super::SceneTruth {
        super::SceneTruth {
            branch_anchor: self.branch_anchor,
            stem_length: self.stem_length,
            stem_end: self.gripper_start.position,
            grape_center: self.grape_center,
            grape_radius: self.grape_radius,
        }
    }

    /// Static obstacle points (branch and leaves).
    pub fn static_points(&self) -> impl Iterator<Item = &Vec3> {
        self.obstacle_patches.iter().flatten()
    }

    /// Scene as seen with the gripper at `gripper`: the grape moves rigidly
    /// with the gripper and the stem is re-shaped between the fixed anchor
    /// and the gripper.
    pub fn cloud_at(&self, gripper: &Pose) -> LabeledCloud {
        let mut cloud = LabeledCloud::with_capacity(self.full_cloud.len());
        for p in self.deformed_stem(&gripper.position) {
            cloud.push(p, Label::Stem);
        }
        let rel = gripper.orientation * self.gripper_start.orientation.inverse();
        for g in &self.grape_points {
            cloud.push(gripper.position + rel * (g - self.gripper_start.position), Label::Other);
        }
        for p in self.static_points() {
            cloud.push(*p, Label::Other);
        }
        cloud
    }

    /// Stem points for a gripper at `end`: the rest shape is rotated onto the
    /// new anchor-to-end chord, stretched along it, and its sideways bend
    /// flattens as the chord approaches the stem length.
    pub fn deformed_stem(&self, end: &Vec3) -> Vec<Vec3> {
        let a = self.branch_anchor;
        let c0 = self.gripper_start.position - a;
        let c = end - a;
        let (l0, l) = (c0.norm(), c.norm());
        if l0 == 0.0 || l == 0.0 {
            return self.stem_points.clone();
        }
        let u0 = c0 / l0;
        let rot = match angle_axis_between(&u0, &(c / l)) {
            Ok((angle, axis)) => Rotation::from_axis_angle(&axis, angle),
            Err(_) => {
                let perp = if u0.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
                Rotation::from_axis_angle(&nalgebra::Unit::new_normalize(u0.cross(&perp)), PI)
            }
        };
        let len = self.stem_length;
        let slack0 = len * len - l0 * l0;
        let lateral = if l >= len || slack0 <= 0.0 {
            0.0
        } else {
            ((len * len - l * l) / slack0).sqrt().min(3.0)
        };
        let stretch = l / l0;
        self.stem_points
            .iter()
            .map(|p| {
                let d = p - a;
                let along = d.dot(&u0);
                let side = d - u0 * along;
                a + rot * (u0 * (along * stretch) + side * lateral)
            })
            .collect()
    }
}
