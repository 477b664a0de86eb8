//! Python bindings for the `precut` crate.
//!
//! Vectors cross the boundary as 3-tuples of floats and twists as
//! `(linear, angular)` pairs of 3-tuples.

use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use precut::camera_control::{self, ReachGains, RoiSpec, UnveilParams};
use precut::coordinator::{self, ThresholdSpec};
use precut::experiment::{self, RunConfig, RunOutput};
use precut::grasp_control::{self as grasp, GraspGains, GraspState};
use precut::scene;
use precut::{Twist, Vec3};

type V3 = (f64, f64, f64);
type PyTwist = (V3, V3);
type TraceTuple = (f64, f64, f64, usize, f64, f64, f64, u8);

fn err(e: precut::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn v(p: V3) -> Vec3 {
    Vec3::new(p.0, p.1, p.2)
}

fn t(p: &Vec3) -> V3 {
    (p.x, p.y, p.z)
}

fn twist_in(tw: PyTwist) -> Twist {
    Twist::new(v(tw.0), v(tw.1))
}

fn twist_out(tw: &Twist) -> PyTwist {
    (t(&tw.linear), t(&tw.angular))
}

fn vecs(ps: Vec<V3>) -> Vec<Vec3> {
    ps.into_iter().map(v).collect()
}

/// Run configuration; every `key = value` entry of a config file is reachable
/// through `get`/`set`.
#[pyclass(name = "RunConfig", from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (text = None))]
    fn new(text: Option<&str>) -> PyResult<Self> {
        let inner = match text {
            Some(s) => RunConfig::parse(s).map_err(err)?,
            None => RunConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::from_file(path).map_err(err)?,
        })
    }

    fn get(&self, key: &str) -> PyResult<String> {
        self.inner
            .entries()
            .into_iter()
            .find(|(k, _)| *k == key)
            .map(|(_, val)| val)
            .ok_or_else(|| PyValueError::new_err(format!("unknown key {key}")))
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(PyValueError::new_err)?;
        self.inner.validate().map_err(err)
    }

    fn keys(&self) -> Vec<&'static str> {
        self.inner.entries().into_iter().map(|(k, _)| k).collect()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("RunConfig(seed={}, duration={})", self.inner.seed, self.inner.duration)
    }
}

/// Outcome of a closed-loop run.
#[pyclass(name = "RunResult")]
struct PyRunResult {
    inner: RunOutput,
}

#[pymethods]
impl PyRunResult {
    /// Rows `(t, roi_dist, theta, n_visible_stem, force_along_nc,
    /// pos_err_orth, align_angle, phase)`.
    fn trace(&self) -> Vec<TraceTuple> {
        self.inner
            .trace
            .iter()
            .map(|r| {
                (
                    r.t,
                    r.roi_dist,
                    r.theta,
                    r.n_visible_stem,
                    r.force_along_nc,
                    r.pos_err_orth,
                    r.align_angle,
                    r.phase.code(),
                )
            })
            .collect()
    }

    fn trace_csv(&self) -> String {
        self.inner.trace_csv()
    }

    fn metrics_text(&self) -> String {
        self.inner.metrics_text()
    }

    fn write(&self, dir: &str) -> PyResult<()> {
        self.inner.write(dir).map_err(err)
    }

    #[getter]
    fn transition_time(&self) -> Option<f64> {
        self.inner.metrics.transition_time
    }

    #[getter]
    fn stem_detected(&self) -> bool {
        self.inner.metrics.stem_detected
    }

    #[getter]
    fn final_roi_dist(&self) -> f64 {
        self.inner.metrics.final_roi_dist
    }

    #[getter]
    fn final_force_along_nc(&self) -> f64 {
        self.inner.metrics.final_force_along_nc
    }

    #[getter]
    fn visible_final(&self) -> usize {
        self.inner.metrics.visible_final
    }

    #[getter]
    fn grasp_target(&self) -> Option<V3> {
        self.inner.metrics.grasp_target.as_ref().map(t)
    }
}

/// Hybrid grasp controller with its force-error integral.
#[pyclass(name = "GraspController")]
struct PyGraspController {
    state: GraspState,
    gains: GraspGains,
}

#[pymethods]
impl PyGraspController {
    #[new]
    fn new(p_gd: V3, p_sb: V3) -> PyResult<Self> {
        Ok(Self {
            state: GraspState::new(v(p_gd), &v(p_sb)).map_err(err)?,
            gains: GraspGains::default(),
        })
    }

    #[getter]
    fn control_direction(&self) -> V3 {
        t(&self.state.n_c)
    }

    #[getter]
    fn integral(&self) -> f64 {
        self.state.integral_e_f
    }

    /// One control step from gripper position, gripper y axis and measured force.
    fn step(&mut self, p_g: V3, y_g: V3, force: V3, dt: f64) -> PyTwist {
        twist_out(&self.state.step(&v(p_g), &v(y_g), &v(force), &self.gains, dt))
    }
}

#[pyfunction]
#[pyo3(signature = (config = None))]
fn run_experiment(py: Python<'_>, config: Option<PyRunConfig>) -> PyResult<PyRunResult> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    cfg.validate().map_err(err)?;
    let out = py
        .detach(|| {
            let vine = experiment::default_scene(&cfg)?;
            experiment::run(&cfg, &vine)
        })
        .map_err(err)?;
    Ok(PyRunResult { inner: out })
}

#[pyfunction]
fn fibonacci_lattice(n: usize, center: V3, radius: f64) -> Vec<V3> {
    scene::fibonacci_lattice(n, &v(center), radius).iter().map(t).collect()
}

#[pyfunction]
fn nearest_lattice_index(p: V3, n: usize, center: V3, radius: f64) -> usize {
    scene::nearest_lattice_index(&v(p), n, &v(center), radius)
}

/// Returns `(p_gd, number of free samples)`.
#[pyfunction]
fn free_space_target(obstacles: Vec<V3>, p_sb: V3, l: f64, camera: V3, n: usize) -> PyResult<(V3, usize)> {
    let p_sb = v(p_sb);
    let obstacles: Vec<Vec3> = vecs(obstacles);
    let projected: Vec<Vec3> = obstacles
        .iter()
        .filter_map(|o| {
            let d = o - p_sb;
            (d.norm() > 0.0).then(|| p_sb + d.normalize() * l)
        })
        .collect();
    let set = scene::ObstacleSet {
        points: obstacles,
        projected,
        search_radius: l,
        point_radius: 0.0,
    };
    let res = scene::compute_free_space(&set, &p_sb, l, &v(camera), n).map_err(err)?;
    Ok((t(&res.target), res.free.len()))
}

/// Returns `(base, n_st, n_sb, l)` of the two-segment stem model.
#[pyfunction]
fn model_stem(points: Vec<V3>, gripper: V3) -> PyResult<(V3, V3, V3, f64)> {
    let m = scene::model_stem(&vecs(points), &v(gripper)).map_err(err)?;
    Ok((t(&m.base), t(&m.n_st), t(&m.n_sb), m.l))
}

#[pyfunction]
fn centering_angle(p_c: V3, z_c: V3, p_r: V3) -> f64 {
    camera_control::centering_angle(&v(p_c), &v(z_c), &v(p_r))
}

#[pyfunction]
#[pyo3(signature = (p_c, z_c, roi_center, roi_radius, k_cp = 1.0, k_co = 1.0))]
fn reaching_centering_twist(
    p_c: V3,
    z_c: V3,
    roi_center: V3,
    roi_radius: f64,
    k_cp: f64,
    k_co: f64,
) -> PyResult<PyTwist> {
    let roi = RoiSpec::new(v(roi_center), roi_radius).map_err(err)?;
    let tw = camera_control::reaching_centering_twist(&v(p_c), &v(z_c), &roi, &ReachGains { k_cp, k_co });
    Ok(twist_out(&tw))
}

#[pyfunction]
fn barrier_potential(r_hat: f64, d_a: f64) -> PyResult<f64> {
    camera_control::barrier_potential(r_hat, d_a).map_err(err)
}

/// Repulsive velocity pushing the ray `p_c -> p_s` away from obstacle `p_o`.
#[pyfunction]
#[pyo3(signature = (p_c, p_s, p_o, d_o = 0.001, d_a = 0.01))]
fn repulsive_velocity(p_c: V3, p_s: V3, p_o: V3, d_o: f64, d_a: f64) -> PyResult<V3> {
    let pair = camera_control::nearest_point_on_ray(&v(p_c), &v(p_s), &v(p_o), d_o).map_err(err)?;
    camera_control::repulsive_velocity(&pair, d_a).map(|u| t(&u)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (p_c, stem, obstacles, k_c = 0.00025, d_o = 0.001, d_a = 0.01))]
fn unveiling_twist(p_c: V3, stem: Vec<V3>, obstacles: Vec<V3>, k_c: f64, d_o: f64, d_a: f64) -> PyTwist {
    let params = UnveilParams {
        d_o,
        d_a,
        k_c,
        ..UnveilParams::default()
    };
    twist_out(&camera_control::unveiling_twist(&v(p_c), &vecs(stem), &vecs(obstacles), &params))
}

#[pyfunction]
#[pyo3(signature = (p_c, roi_center, roi_radius, tip_twist))]
fn check_transition(p_c: V3, roi_center: V3, roi_radius: f64, tip_twist: PyTwist) -> PyResult<bool> {
    let roi = RoiSpec::new(v(roi_center), roi_radius).map_err(err)?;
    Ok(coordinator::check_transition(
        &v(p_c),
        &roi,
        &twist_in(tip_twist),
        &ThresholdSpec::default(),
    ))
}

#[pyfunction]
fn couple_velocities(v_c: PyTwist, v_gt: V3, p_c: V3, p_sb: V3) -> PyTwist {
    twist_out(&coordinator::couple_velocities(&twist_in(v_c), &v(v_gt), &v(p_c), &v(p_sb)))
}

/// `qdot = J^T (J J^T + damping^2 I)^-1 V` for a row-major 6 x n Jacobian.
#[pyfunction]
fn joint_velocities(jacobian: Vec<Vec<f64>>, twist: PyTwist, damping: f64) -> PyResult<Vec<f64>> {
    let cols = jacobian.first().map_or(0, Vec::len);
    if jacobian.len() != 6 || cols == 0 || jacobian.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("jacobian must be 6 rows of equal length"));
    }
    let flat: Vec<f64> = jacobian.concat();
    let j = DMatrix::from_row_slice(6, cols, &flat);
    let qd = coordinator::joint_velocities(&j, &twist_in(twist), damping).map_err(err)?;
    Ok(qd.iter().copied().collect())
}

#[pyfunction]
fn position_velocity(p_g: V3, p_gd: V3, n_c: V3, k_pg: f64) -> PyResult<V3> {
    let n = grasp::control_direction(&v(n_c), &Vec3::zeros()).map_err(err)?;
    Ok(t(&grasp::position_velocity(&v(p_g), &v(p_gd), &n, k_pg)))
}

#[pyfunction]
fn orientation_velocity(y_g: V3, n_c: V3, k_og: f64) -> PyResult<V3> {
    let n = grasp::control_direction(&v(n_c), &Vec3::zeros()).map_err(err)?;
    Ok(t(&grasp::orientation_velocity(&v(y_g), &n, k_og)))
}

#[pymodule]
fn precut_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyGraspController>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(fibonacci_lattice, m)?)?;
    m.add_function(wrap_pyfunction!(nearest_lattice_index, m)?)?;
    m.add_function(wrap_pyfunction!(free_space_target, m)?)?;
    m.add_function(wrap_pyfunction!(model_stem, m)?)?;
    m.add_function(wrap_pyfunction!(centering_angle, m)?)?;
    m.add_function(wrap_pyfunction!(reaching_centering_twist, m)?)?;
    m.add_function(wrap_pyfunction!(barrier_potential, m)?)?;
    m.add_function(wrap_pyfunction!(repulsive_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(unveiling_twist, m)?)?;
    m.add_function(wrap_pyfunction!(check_transition, m)?)?;
    m.add_function(wrap_pyfunction!(couple_velocities, m)?)?;
    m.add_function(wrap_pyfunction!(joint_velocities, m)?)?;
    m.add_function(wrap_pyfunction!(position_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(orientation_velocity, m)?)?;
    Ok(())
}
