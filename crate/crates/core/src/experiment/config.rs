//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::Path;

use crate::camera_control::{ReachGains, UnveilParams};
use crate::coordinator::ThresholdSpec;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::grasp_control::GraspGains;
use crate::simworld::{default_leaves, parse_vec3, CameraModel, SceneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmKind {
    FreeFlyer,
    Serial6,
}

impl ArmKind {
    pub fn name(self) -> &'static str {
        match self {
            ArmKind::FreeFlyer => "freeflyer",
            ArmKind::Serial6 => "serial6",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "freeflyer" => Some(ArmKind::FreeFlyer),
            "serial6" => Some(ArmKind::Serial6),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub duration: f64,
    pub seed: u64,
    pub dt: f64,
    /// Control steps between trace rows.
    pub log_every: usize,
    /// Control steps between camera frames.
    pub perception_every: usize,

    pub arm: ArmKind,
    pub damping: f64,
    /// Serial arm bases, relative to the branch anchor.
    pub camera_base: Vec3,
    pub gripper_base: Vec3,

    pub roi_radius: f64,
    pub roi_filter_tau: f64,
    /// ROI center used before the stem is detected; the grape center when unset.
    pub roi_prior: Option<Vec3>,
    pub reach: ReachGains,
    pub unveil: UnveilParams,
    pub camera_max_linear: f64,
    pub camera_max_angular: f64,
    /// Field of view and ranges; `hfov`/`vfov` follow `hfov_deg`/`vfov_deg`.
    pub camera: CameraModel,
    pub hfov_deg: f64,
    pub vfov_deg: f64,

    pub grasp: GraspGains,
    pub grasp_max_linear: f64,
    pub grasp_max_angular: f64,
    pub free_space_samples: usize,
    pub thresholds: ThresholdSpec,
    pub force_tau: f64,

    pub stem_stiffness: f64,
    /// Rest length of the stem spring; the true stem length when unset.
    pub stem_rest_length: Option<f64>,
    /// Stem points needed before the stem model is built.
    pub stem_min_points: usize,

    pub scene: SceneConfig,
    /// Number of default leaf patches placed in a generated scene.
    pub scene_leaves: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration: 90.0,
            seed: 0,
            dt: 0.002,
            log_every: 10,
            perception_every: 17,
            arm: ArmKind::FreeFlyer,
            damping: 0.01,
            camera_base: Vec3::new(0.1, -0.45, -0.35),
            gripper_base: Vec3::new(0.45, 0.1, -0.45),
            roi_radius: 0.35,
            roi_filter_tau: 0.5,
            roi_prior: None,
            reach: ReachGains::default(),
            unveil: UnveilParams::default(),
            camera_max_linear: 0.1,
            camera_max_angular: 0.5,
            camera: CameraModel::default(),
            hfov_deg: 65.0,
            vfov_deg: 40.0,
            grasp: GraspGains::default(),
            grasp_max_linear: 0.1,
            grasp_max_angular: 0.5,
            free_space_samples: 500,
            thresholds: ThresholdSpec::default(),
            force_tau: 0.02,
            stem_stiffness: 100.0,
            stem_rest_length: None,
            stem_min_points: 10,
            scene: SceneConfig::default(),
            scene_leaves: default_leaves().len(),
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn vec3(v: &Vec3) -> String {
    format!("{:?}, {:?}, {:?}", v.x, v.y, v.z)
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("`{v}` is not a finite number")),
    }
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn parse_v3(v: &str) -> std::result::Result<Vec3, String> {
    parse_vec3(v).ok_or_else(|| format!("`{v}` is not three comma-separated numbers"))
}

impl RunConfig {
    /// All keys with their current values, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt_vec = |v: &Option<Vec3>| v.as_ref().map(vec3).unwrap_or_else(|| "auto".into());
        vec![
            ("run.duration", num(self.duration)),
            ("run.seed", self.seed.to_string()),
            ("run.dt", num(self.dt)),
            ("run.log_every", self.log_every.to_string()),
            ("run.perception_every", self.perception_every.to_string()),
            ("arm.model", self.arm.name().to_string()),
            ("arm.damping", num(self.damping)),
            ("arm.camera_base", vec3(&self.camera_base)),
            ("arm.gripper_base", vec3(&self.gripper_base)),
            ("roi.radius", num(self.roi_radius)),
            ("roi.filter_tau", num(self.roi_filter_tau)),
            ("roi.prior", opt_vec(&self.roi_prior)),
            ("reach.k_cp", num(self.reach.k_cp)),
            ("reach.k_co", num(self.reach.k_co)),
            ("unveil.d_o", num(self.unveil.d_o)),
            ("unveil.d_a", num(self.unveil.d_a)),
            ("unveil.k_c", num(self.unveil.k_c)),
            ("unveil.filter_tau", num(self.unveil.filter_tau)),
            ("camera.max_linear", num(self.camera_max_linear)),
            ("camera.max_angular", num(self.camera_max_angular)),
            ("camera.hfov_deg", num(self.hfov_deg)),
            ("camera.vfov_deg", num(self.vfov_deg)),
            ("camera.max_stem_range", num(self.camera.max_stem_range)),
            ("camera.d_vis", num(self.camera.d_vis)),
            ("camera.downsample", self.camera.downsample.to_string()),
            ("grasp.k_pg", num(self.grasp.k_pg)),
            ("grasp.k_fp", num(self.grasp.k_fp)),
            ("grasp.k_fi", num(self.grasp.k_fi)),
            ("grasp.k_og", num(self.grasp.k_og)),
            ("grasp.f_d", num(self.grasp.f_d)),
            ("grasp.integral_limit", num(self.grasp.integral_limit)),
            ("grasp.max_linear", num(self.grasp_max_linear)),
            ("grasp.max_angular", num(self.grasp_max_angular)),
            ("free_space.samples", self.free_space_samples.to_string()),
            ("transition.dist_factor", num(self.thresholds.dist_factor)),
            ("transition.v_lin_max", num(self.thresholds.v_lin_max)),
            ("transition.v_ang_max", num(self.thresholds.v_ang_max)),
            ("sensor.force_tau", num(self.force_tau)),
            ("stem.stiffness", num(self.stem_stiffness)),
            (
                "stem.rest_length",
                self.stem_rest_length.map(num).unwrap_or_else(|| "auto".into()),
            ),
            ("stem.min_points", self.stem_min_points.to_string()),
            ("scene.anchor", vec3(&self.scene.branch_anchor)),
            ("scene.stem_length", num(self.scene.stem_length)),
            ("scene.stem_bend_deg", num(self.scene.stem_bend_deg)),
            ("scene.stem_jitter", num(self.scene.stem_jitter)),
            ("scene.grape_radius", num(self.scene.grape_radius)),
            ("scene.leaves", self.scene_leaves.to_string()),
            ("scene.camera_offset", vec3(&self.scene.camera_offset)),
            ("scene.camera_aim_offset", vec3(&self.scene.camera_aim_offset)),
        ]
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "run.duration" => self.duration = parse_f64(v)?,
            "run.seed" => self.seed = v.parse().map_err(|_| format!("`{v}` is not a seed"))?,
            "run.dt" => self.dt = parse_f64(v)?,
            "run.log_every" => self.log_every = parse_usize(v)?,
            "run.perception_every" => self.perception_every = parse_usize(v)?,
            "arm.model" => self.arm = ArmKind::parse(v).ok_or_else(|| format!("unknown arm model `{v}`"))?,
            "arm.damping" => self.damping = parse_f64(v)?,
            "arm.camera_base" => self.camera_base = parse_v3(v)?,
            "arm.gripper_base" => self.gripper_base = parse_v3(v)?,
            "roi.radius" => self.roi_radius = parse_f64(v)?,
            "roi.filter_tau" => self.roi_filter_tau = parse_f64(v)?,
            "roi.prior" => self.roi_prior = if v == "auto" { None } else { Some(parse_v3(v)?) },
            "reach.k_cp" => self.reach.k_cp = parse_f64(v)?,
            "reach.k_co" => self.reach.k_co = parse_f64(v)?,
            "unveil.d_o" => self.unveil.d_o = parse_f64(v)?,
            "unveil.d_a" => self.unveil.d_a = parse_f64(v)?,
            "unveil.k_c" => self.unveil.k_c = parse_f64(v)?,
            "unveil.filter_tau" => self.unveil.filter_tau = parse_f64(v)?,
            "camera.max_linear" => self.camera_max_linear = parse_f64(v)?,
            "camera.max_angular" => self.camera_max_angular = parse_f64(v)?,
            "camera.hfov_deg" => self.hfov_deg = parse_f64(v)?,
            "camera.vfov_deg" => self.vfov_deg = parse_f64(v)?,
            "camera.max_stem_range" => self.camera.max_stem_range = parse_f64(v)?,
            "camera.d_vis" => self.camera.d_vis = parse_f64(v)?,
            "camera.downsample" => self.camera.downsample = parse_usize(v)?,
            "grasp.k_pg" => self.grasp.k_pg = parse_f64(v)?,
            "grasp.k_fp" => self.grasp.k_fp = parse_f64(v)?,
            "grasp.k_fi" => self.grasp.k_fi = parse_f64(v)?,
            "grasp.k_og" => self.grasp.k_og = parse_f64(v)?,
            "grasp.f_d" => self.grasp.f_d = parse_f64(v)?,
            "grasp.integral_limit" => self.grasp.integral_limit = parse_f64(v)?,
            "grasp.max_linear" => self.grasp_max_linear = parse_f64(v)?,
            "grasp.max_angular" => self.grasp_max_angular = parse_f64(v)?,
            "free_space.samples" => self.free_space_samples = parse_usize(v)?,
            "transition.dist_factor" => self.thresholds.dist_factor = parse_f64(v)?,
            "transition.v_lin_max" => self.thresholds.v_lin_max = parse_f64(v)?,
            "transition.v_ang_max" => self.thresholds.v_ang_max = parse_f64(v)?,
            "sensor.force_tau" => self.force_tau = parse_f64(v)?,
            "stem.stiffness" => self.stem_stiffness = parse_f64(v)?,
            "stem.rest_length" => self.stem_rest_length = if v == "auto" { None } else { Some(parse_f64(v)?) },
            "stem.min_points" => self.stem_min_points = parse_usize(v)?,
            "scene.anchor" => self.scene.branch_anchor = parse_v3(v)?,
            "scene.stem_length" => self.scene.stem_length = parse_f64(v)?,
            "scene.stem_bend_deg" => self.scene.stem_bend_deg = parse_f64(v)?,
            "scene.stem_jitter" => self.scene.stem_jitter = parse_f64(v)?,
            "scene.grape_radius" => self.scene.grape_radius = parse_f64(v)?,
            "scene.leaves" => self.scene_leaves = parse_usize(v)?,
            "scene.camera_offset" => self.scene.camera_offset = parse_v3(v)?,
            "scene.camera_aim_offset" => self.scene.camera_aim_offset = parse_v3(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values. `#` starts
    /// a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `key = value`".into()))?;
            self.set(key.trim(), value).map_err(parse_err)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.to_string())) };
        check(self.duration >= 0.0, "run.duration must be non-negative")?;
        check(self.dt > 0.0, "run.dt must be positive")?;
        check(self.log_every >= 1, "run.log_every must be at least 1")?;
        check(self.perception_every >= 1, "run.perception_every must be at least 1")?;
        check(self.damping >= 0.0, "arm.damping must be non-negative")?;
        check(self.roi_radius > 0.0, "roi.radius must be positive")?;
        check(self.roi_filter_tau >= 0.0, "roi.filter_tau must be non-negative")?;
        check(self.reach.k_cp > 0.0 && self.reach.k_co > 0.0, "reach gains must be positive")?;
        check(
            self.unveil.d_o > 0.0 && self.unveil.d_a > 0.0 && self.unveil.k_c > 0.0,
            "unveil.d_o, unveil.d_a and unveil.k_c must be positive",
        )?;
        check(self.unveil.filter_tau >= 0.0, "unveil.filter_tau must be non-negative")?;
        check(
            self.camera_max_linear > 0.0 && self.camera_max_angular > 0.0,
            "camera velocity limits must be positive",
        )?;
        check(
            self.grasp_max_linear > 0.0 && self.grasp_max_angular > 0.0,
            "grasp velocity limits must be positive",
        )?;
        self.camera_model().validate().map_err(|e| Error::Config(e.to_string()))?;
        check(self.free_space_samples >= 1, "free_space.samples must be at least 1")?;
        check(self.thresholds.dist_factor >= 1.0, "transition.dist_factor must be at least 1")?;
        check(self.force_tau >= 0.0, "sensor.force_tau must be non-negative")?;
        check(self.stem_stiffness > 0.0, "stem.stiffness must be positive")?;
        check(self.stem_rest_length.is_none_or(|l| l > 0.0), "stem.rest_length must be positive")?;
        check(self.stem_min_points >= 4, "stem.min_points must be at least 4")?;
        check(self.scene_leaves <= default_leaves().len(), "scene.leaves must be at most 3")?;
        Ok(())
    }

    pub fn camera_model(&self) -> CameraModel {
        CameraModel {
            hfov: self.hfov_deg.to_radians(),
            vfov: self.vfov_deg.to_radians(),
            ..self.camera
        }
    }

    /// Scene generation settings with the configured leaf count applied.
    pub fn scene_config(&self) -> SceneConfig {
        let mut s = self.scene.clone();
        s.leaves = default_leaves().into_iter().take(self.scene_leaves).collect();
        s
    }
}
