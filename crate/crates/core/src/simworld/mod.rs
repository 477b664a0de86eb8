//! Deterministic closed-loop world: scene generation, simulated depth
//! camera, compliant stem and fixed-step integration of both end-effectors.

mod camera;
mod vine;

use std::fmt::Write as _;
use std::path::Path;

pub use camera::{count_occluded_stem, render_view, segment_hits_sphere, CameraModel};
pub use vine::{default_leaves, generate_scene, gripper_orientation, LeafSpec, SceneConfig, VineScene};

use crate::coordinator::ArmModel;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Twist, Vec3};

/// Linear spring between the branch anchor and the gripper that only pulls
/// once the stem is taut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StemCompliance {
    /// N/m
    pub stiffness: f64,
    pub rest_length: f64,
    pub anchor: Vec3,
}

impl StemCompliance {
    pub fn new(stiffness: f64, rest_length: f64, anchor: Vec3) -> Result<Self> {
        if !(stiffness > 0.0 && rest_length > 0.0) {
            return Err(Error::InvalidParameter("stem stiffness and rest length must be positive"));
        }
        Ok(Self {
            stiffness,
            rest_length,
            anchor,
        })
    }
}

/// Force the gripper exerts on the stem, radial from the anchor; zero while
/// the stem is slack.
pub fn stem_force(gripper_pos: &Vec3, compliance: &StemCompliance) -> Vec3 {
    let d = gripper_pos - compliance.anchor;
    let dist = d.norm();
    let stretch = dist - compliance.rest_length;
    if stretch <= 0.0 || dist == 0.0 {
        return Vec3::zeros();
    }
    d * (compliance.stiffness * stretch / dist)
}

/// Evaluation-only facts about a scene, stored next to its CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneTruth {
    pub branch_anchor: Vec3,
    pub stem_length: f64,
    pub stem_end: Vec3,
    pub grape_center: Vec3,
    pub grape_radius: f64,
}

fn fmt_vec(v: &Vec3) -> String {
    format!("{:?}, {:?}, {:?}", v.x, v.y, v.z)
}

/// Parses `"x, y, z"`.
pub fn parse_vec3(s: &str) -> Option<Vec3> {
    let parts: Vec<f64> = s.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    match parts.as_slice() {
        [x, y, z] if x.is_finite() && y.is_finite() && z.is_finite() => Some(Vec3::new(*x, *y, *z)),
        _ => None,
    }
}

impl SceneTruth {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "branch_anchor = {}", fmt_vec(&self.branch_anchor));
        let _ = writeln!(s, "stem_length = {:?}", self.stem_length);
        let _ = writeln!(s, "stem_end = {}", fmt_vec(&self.stem_end));
        let _ = writeln!(s, "grape_center = {}", fmt_vec(&self.grape_center));
        let _ = writeln!(s, "grape_radius = {:?}", self.grape_radius);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut anchor = None;
        let mut length = None;
        let mut end = None;
        let mut grape = None;
        let mut radius = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: &str| Error::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let value = value.trim();
            let vec = || parse_vec3(value).ok_or_else(|| bad("expected three comma-separated numbers"));
            let num = || value.parse::<f64>().map_err(|_| bad("expected a number"));
            match key.trim() {
                "branch_anchor" => anchor = Some(vec()?),
                "stem_length" => length = Some(num()?),
                "stem_end" => end = Some(vec()?),
                "grape_center" => grape = Some(vec()?),
                "grape_radius" => radius = Some(num()?),
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::Scene(format!("truth file is missing `{k}`"));
        Ok(Self {
            branch_anchor: anchor.ok_or_else(|| missing("branch_anchor"))?,
            stem_length: length.ok_or_else(|| missing("stem_length"))?,
            stem_end: end.ok_or_else(|| missing("stem_end"))?,
            grape_center: grape.ok_or_else(|| missing("grape_center"))?,
            grape_radius: radius.ok_or_else(|| missing("grape_radius"))?,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Sidecar path used for a scene CSV: `scene.csv` → `scene.truth`.
pub fn truth_path(scene_csv: &Path) -> std::path::PathBuf {
    scene_csv.with_extension("truth")
}

/// Kinematic state of both arms plus the filtered wrist force.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub camera: ArmModel,
    pub gripper: ArmModel,
    pub time: f64,
    /// Completed steps; `time` is always `steps · dt`.
    pub steps: u64,
    pub dt: f64,
    /// Filtered force the gripper exerts on the stem (N).
    pub measured_force: Vec3,
    pub force_tau: f64,
    pub compliance: StemCompliance,
    /// Damping used when mapping twists to joint velocities.
    pub damping: f64,
}

impl WorldState {
    pub fn new(camera: ArmModel, gripper: ArmModel, dt: f64, compliance: StemCompliance) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("time step must be positive"));
        }
        let measured_force = stem_force(&gripper.pose().position, &compliance);
        Ok(Self {
            camera,
            gripper,
            time: 0.0,
            steps: 0,
            dt,
            measured_force,
            force_tau: 0.02,
            compliance,
            damping: 0.01,
        })
    }

    pub fn camera_pose(&self) -> Pose {
        self.camera.pose()
    }

    pub fn gripper_pose(&self) -> Pose {
        self.gripper.pose()
    }

    /// Advances both arms by one step under the commanded twists.
    pub fn step(&mut self, v_c: &Twist, v_g: &Twist) -> Result<()> {
        if !v_c.is_finite() || !v_g.is_finite() {
            return Err(Error::NonFiniteTwist { time: self.time });
        }
        self.camera.integrate(v_c, self.dt, self.damping)?;
        self.gripper.integrate(v_g, self.dt, self.damping)?;
        self.steps += 1;
        self.time = self.steps as f64 * self.dt;
        let raw = stem_force(&self.gripper.pose().position, &self.compliance);
        let alpha = if self.force_tau > 0.0 { (self.dt / self.force_tau).min(1.0) } else { 1.0 };
        self.measured_force += (raw - self.measured_force) * alpha;
        Ok(())
    }
}
