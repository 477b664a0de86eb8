//! Closed-loop experiment: the camera-only phase followed by the bimanual
//! phase, with trace, metrics and point-cloud snapshots.

mod config;

use std::fmt::Write as _;
use std::path::Path;

pub use config::{ArmKind, RunConfig};

use crate::camera_control::{centering_angle, reaching_centering_twist, unveiling_twist, RoiSpec, TwistFilter};
use crate::coordinator::{check_transition, couple_velocities, ArmModel, Phase, PhaseState, SerialArm, SmoothedTarget};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, Twist, Vec3};
use crate::grasp_control::GraspState;
use crate::scene::{compute_free_space, model_stem, select_obstacles, Label, LabeledCloud, StemModel};
use crate::simworld::{generate_scene, render_view, StemCompliance, VineScene, WorldState};

pub const TRACE_HEADER: &str = "t,roi_dist,theta,n_visible_stem,force_along_nc,pos_err_orth,align_angle,phase";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub roi_dist: f64,
    pub theta: f64,
    pub n_visible_stem: usize,
    pub force_along_nc: f64,
    pub pos_err_orth: f64,
    pub align_angle: f64,
    pub phase: Phase,
}

impl TraceRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{:.3},{:.9},{:.9},{},{:.9},{:.9},{:.9},{}",
            self.t,
            self.roi_dist,
            self.theta,
            self.n_visible_stem,
            self.force_along_nc,
            self.pos_err_orth,
            self.align_angle,
            self.phase.code()
        )
    }
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub duration: f64,
    pub final_roi_dist: f64,
    pub final_theta: f64,
    pub stem_detected: bool,
    pub first_detection_time: Option<f64>,
    pub visible_at_first_detection: Option<usize>,
    pub visible_at_transition: Option<usize>,
    pub visible_final: usize,
    pub transition_time: Option<f64>,
    pub force_settling_time: Option<f64>,
    pub final_force_along_nc: f64,
    pub final_pos_err_orth: f64,
    pub final_align_angle: f64,
    pub initial_base: Option<Vec3>,
    pub refined_base: Option<Vec3>,
    pub grasp_target: Option<Vec3>,
    pub control_direction: Option<Vec3>,
    pub estimated_stem_length: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub metrics: Metrics,
    pub config: RunConfig,
    /// Perceived clouds at the start, at the transition (if any) and at the end.
    pub snapshots: Vec<(&'static str, LabeledCloud)>,
}

fn opt<T: std::fmt::Debug>(v: &Option<T>) -> String {
    match v {
        Some(x) => format!("{x:?}"),
        None => "none".into(),
    }
}

fn opt_vec(v: &Option<Vec3>) -> String {
    match v {
        Some(p) => format!("{:?}, {:?}, {:?}", p.x, p.y, p.z),
        None => "none".into(),
    }
}

impl RunOutput {
    pub fn trace_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.trace.len() + 1));
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for row in &self.trace {
            s.push_str(&row.to_csv());
            s.push('\n');
        }
        s
    }

    pub fn metrics_text(&self) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("duration", format!("{:?}", m.duration));
        line("final_roi_dist", format!("{:?}", m.final_roi_dist));
        line("final_theta", format!("{:?}", m.final_theta));
        line("stem_detected", m.stem_detected.to_string());
        if !m.stem_detected {
            line("note", "stem never detected".into());
        }
        line("first_detection_time", opt(&m.first_detection_time));
        line("visible_at_first_detection", opt(&m.visible_at_first_detection));
        line("visible_at_transition", opt(&m.visible_at_transition));
        line("visible_final", m.visible_final.to_string());
        line("transition_time", opt(&m.transition_time));
        line("force_settling_time", opt(&m.force_settling_time));
        line("final_force_along_nc", format!("{:?}", m.final_force_along_nc));
        line("final_pos_err_orth", format!("{:?}", m.final_pos_err_orth));
        line("final_align_angle", format!("{:?}", m.final_align_angle));
        line("initial_stem_base", opt_vec(&m.initial_base));
        line("refined_stem_base", opt_vec(&m.refined_base));
        line("grasp_target", opt_vec(&m.grasp_target));
        line("control_direction", opt_vec(&m.control_direction));
        line("estimated_stem_length", opt(&m.estimated_stem_length));
        for (k, v) in self.config.entries() {
            line(&format!("config.{k}"), v);
        }
        s
    }

    /// Writes `trace.csv`, `metrics.txt` and the snapshot CSVs into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trace.csv"), self.trace_csv())?;
        std::fs::write(dir.join("metrics.txt"), self.metrics_text())?;
        for (name, cloud) in &self.snapshots {
            cloud.write_csv(dir.join(format!("scene_snapshot_{name}.csv")))?;
        }
        Ok(())
    }
}

/// Builds the default generated scene for a configuration.
pub fn default_scene(config: &RunConfig) -> Result<VineScene> {
    generate_scene(config.seed, &config.scene_config())
}

fn build_arm(kind: ArmKind, start: &Pose, base_offset: &Vec3, anchor: &Vec3) -> Result<ArmModel> {
    match kind {
        ArmKind::FreeFlyer => Ok(ArmModel::FreeFlyer { pose: *start }),
        ArmKind::Serial6 => {
            let mut arm = SerialArm::ur5e(Pose::new(anchor + base_offset, Rotation::identity()));
            arm.solve_ik(start)?;
            Ok(ArmModel::Serial6(arm))
        }
    }
}

/// State of the grasping task after the transition.
struct Bimanual {
    p_sb: Vec3,
    grasp: GraspState,
}

fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    let c = a.cross(b).norm();
    let d = a.dot(b);
    c.atan2(d)
}

/// Runs the closed loop on `scene`.
pub fn run(config: &RunConfig, scene: &VineScene) -> Result<RunOutput> {
    config.validate()?;
    let dt = config.dt;
    let steps = (config.duration / dt).round() as usize;
    let cam_model = config.camera_model();
    let anchor = scene.branch_anchor;

    let compliance = StemCompliance::new(
        config.stem_stiffness,
        config.stem_rest_length.unwrap_or(scene.stem_length),
        anchor,
    )?;
    let camera_arm = build_arm(config.arm, &scene.camera_start, &config.camera_base, &anchor)?;
    let gripper_arm = build_arm(config.arm, &scene.gripper_start, &config.gripper_base, &anchor)?;
    let mut world = WorldState::new(camera_arm, gripper_arm, dt, compliance)?;
    world.force_tau = config.force_tau;
    world.damping = config.damping;

    let prior = config.roi_prior.unwrap_or(scene.grape_center);
    let mut roi_center = SmoothedTarget::new(prior, config.roi_filter_tau);
    let mut unveil_filter = TwistFilter::new(config.unveil.filter_tau);
    let mut unveil_raw = Twist::zero();
    let mut phase = PhaseState::default();
    let mut stem_model: Option<StemModel> = None;
    let mut bimanual: Option<Bimanual> = None;
    let mut last_camera_twist = Twist::zero();

    let mut trace = Vec::with_capacity(steps / config.log_every + 1);
    let mut snapshots = Vec::new();
    let mut n_visible = 0usize;
    let mut first_detection: Option<(f64, usize)> = None;
    let mut visible_at_transition = None;
    let mut refined_length = None;
    let mut initial_base = None;
    let mut grasp_target = None;
    let mut last_force_violation: Option<f64> = None;
    let tol = 0.05 * config.grasp.f_d;

    let perceive = |world: &WorldState| -> LabeledCloud {
        let cloud = scene.cloud_at(&world.gripper_pose());
        render_view(&cloud, &world.camera_pose(), &cam_model)
    };

    let mut view = perceive(&world);
    snapshots.push(("start", view.clone()));

    for k in 0..steps {
        let t = k as f64 * dt;
        let cam = world.camera_pose();
        let grip = world.gripper_pose();

        if k % config.perception_every == 0 {
            if k > 0 {
                view = perceive(&world);
            }
            let stems = view.with_label(Label::Stem);
            let others = view.with_label(Label::Other);
            n_visible = stems.len();
            if stem_model.is_none() && stems.len() >= config.stem_min_points {
                if let Ok(model) = model_stem(&stems, &grip.position) {
                    roi_center.raw = model.base;
                    first_detection = Some((t, n_visible));
                    initial_base = Some(model.base);
                    stem_model = Some(model);
                }
            }
            unveil_raw = unveiling_twist(&cam.position, &stems, &others, &config.unveil);
        }

        let unveil = unveil_filter.update(&unveil_raw, dt);
        let center = roi_center.update(dt);
        let roi = RoiSpec::new(center, config.roi_radius)?;

        // the refined stem model needs enough stem points in the current view
        if phase.phase() == Phase::CameraOnly
            && stem_model.is_some()
            && n_visible >= config.stem_min_points
            && check_transition(&cam.position, &roi, &last_camera_twist, &config.thresholds)
        {
            let stems = view.with_label(Label::Stem);
            let model = model_stem(&stems, &grip.position)
                .map_err(|e| Error::Scene(format!("stem model at transition failed: {e}")))?;
            let obstacles = select_obstacles(&view, &model.base, model.l, model.l, config.unveil.d_o)?;
            let free = compute_free_space(&obstacles, &model.base, model.l, &cam.position, config.free_space_samples)?;
            let grasp = GraspState::new(free.target, &model.base)?;
            log::info!("bimanual phase starts at t = {t:.3} s");
            roi_center.raw = model.base;
            refined_length = Some(model.l);
            grasp_target = Some(free.target);
            visible_at_transition = Some(n_visible);
            bimanual = Some(Bimanual {
                p_sb: model.base,
                grasp,
            });
            stem_model = Some(model);
            phase.enter_bimanual(t);
            snapshots.push(("transition", view.clone()));
        }

        let reach = reaching_centering_twist(&cam.position, &cam.z_axis(), &roi, &config.reach);
        let mut v_c = reach + unveil;
        let mut v_g = Twist::zero();
        if let Some(b) = bimanual.as_mut() {
            v_g = b
                .grasp
                .step(&grip.position, &grip.y_axis(), &world.measured_force, &config.grasp, dt)
                .saturated(config.grasp_max_linear, config.grasp_max_angular);
            v_c = couple_velocities(&v_c, &v_g.linear, &cam.position, &b.p_sb);
        }
        let v_c = v_c.saturated(config.camera_max_linear, config.camera_max_angular);

        if k % config.log_every == 0 {
            trace.push(row(t, &cam, &grip, &roi, n_visible, &world, bimanual.as_ref(), phase.phase()));
        }
        if let Some(b) = bimanual.as_ref() {
            if (b.grasp.n_c.dot(&world.measured_force) - config.grasp.f_d).abs() > tol {
                last_force_violation = Some(t);
            }
        }

        world.step(&v_c, &v_g)?;
        last_camera_twist = v_c;
    }

    let end_time = world.time;
    let cam = world.camera_pose();
    let grip = world.gripper_pose();
    view = perceive(&world);
    let final_visible = view.count(Label::Stem);
    snapshots.push(("end", view));
    let roi = RoiSpec::new(roi_center.filtered, config.roi_radius)?;
    let last = row(end_time, &cam, &grip, &roi, final_visible, &world, bimanual.as_ref(), phase.phase());

    let force_settling_time = match (phase.transition_time(), last_force_violation) {
        (Some(tt), None) => Some(tt),
        (Some(_), Some(v)) if v + dt < end_time - 0.5 * dt => Some(v + dt),
        _ => None,
    };

    let metrics = Metrics {
        duration: end_time,
        final_roi_dist: last.roi_dist,
        final_theta: last.theta,
        stem_detected: first_detection.is_some(),
        first_detection_time: first_detection.map(|f| f.0),
        visible_at_first_detection: first_detection.map(|f| f.1),
        visible_at_transition,
        visible_final: final_visible,
        transition_time: phase.transition_time(),
        force_settling_time,
        final_force_along_nc: last.force_along_nc,
        final_pos_err_orth: last.pos_err_orth,
        final_align_angle: last.align_angle,
        initial_base,
        refined_base: bimanual.as_ref().map(|b| b.p_sb),
        grasp_target,
        control_direction: bimanual.as_ref().map(|b| b.grasp.n_c.into_inner()),
        estimated_stem_length: refined_length.or(stem_model.as_ref().map(|m| m.l)),
    };
    Ok(RunOutput {
        trace,
        metrics,
        config: config.clone(),
        snapshots,
    })
}

#[allow(clippy::too_many_arguments)]
fn row(
    t: f64,
    cam: &Pose,
    grip: &Pose,
    roi: &RoiSpec,
    n_visible: usize,
    world: &WorldState,
    bimanual: Option<&Bimanual>,
    phase: Phase,
) -> TraceRow {
    let (force, pos, align) = match bimanual {
        Some(b) => {
            let n = b.grasp.n_c.into_inner();
            let e = grip.position - b.grasp.p_gd;
            let ortho = e - n * n.dot(&e);
            (n.dot(&world.measured_force), ortho.norm(), angle_between(&grip.y_axis(), &n))
        }
        None => (0.0, 0.0, 0.0),
    };
    TraceRow {
        t,
        roi_dist: (roi.center - cam.position).norm(),
        theta: centering_angle(&cam.position, &cam.z_axis(), &roi.center),
        n_visible_stem: n_visible,
        force_along_nc: force,
        pos_err_orth: pos,
        align_angle: align,
        phase,
    }
}
