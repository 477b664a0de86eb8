//! Two-phase scheduling, ROI-center smoothing, the camera/grasp velocity
//! coupling and the map from end-effector twists to joint velocities.

use nalgebra::{DMatrix, DVector, Matrix4, Vector6};

use crate::camera_control::RoiSpec;
use crate::error::{Error, Result};
use crate::geometry::{orthonormalize, skew, Pose, Rotation, Twist, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    CameraOnly,
    Bimanual,
}

impl Phase {
    pub fn code(self) -> u8 {
        match self {
            Phase::CameraOnly => 0,
            Phase::Bimanual => 1,
        }
    }
}

/// Phase bookkeeping. Only the `CameraOnly → Bimanual` transition exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    phase: Phase,
    transition_time: Option<f64>,
}

impl Default for PhaseState {
    fn default() -> Self {
        Self {
            phase: Phase::CameraOnly,
            transition_time: None,
        }
    }
}

impl PhaseState {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn transition_time(&self) -> Option<f64> {
        self.transition_time
    }

    /// Switches to the bimanual phase; later calls keep the first time.
    pub fn enter_bimanual(&mut self, t: f64) {
        if self.phase == Phase::CameraOnly {
            self.phase = Phase::Bimanual;
            self.transition_time = Some(t);
        }
    }
}

/// Gates for starting the bimanual phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec {
    /// Allowed camera distance from the ROI center, in multiples of `r`.
    pub dist_factor: f64,
    pub v_lin_max: f64,
    pub v_ang_max: f64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        Self {
            dist_factor: 1.05,
            v_lin_max: 0.01,
            v_ang_max: 0.025,
        }
    }
}

/// True when the camera is close enough to the ROI and nearly at rest.
/// All comparisons are inclusive.
pub fn check_transition(p_c: &Vec3, roi: &RoiSpec, tip_twist: &Twist, thresholds: &ThresholdSpec) -> bool {
    (roi.center - p_c).norm() <= thresholds.dist_factor * roi.radius
        && tip_twist.linear.norm() <= thresholds.v_lin_max
        && tip_twist.angular.norm() <= thresholds.v_ang_max
}

/// First-order filter on the ROI center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedTarget {
    pub raw: Vec3,
    pub filtered: Vec3,
    pub tau: f64,
}

impl SmoothedTarget {
    pub fn new(initial: Vec3, tau: f64) -> Self {
        Self {
            raw: initial,
            filtered: initial,
            tau,
        }
    }

    /// `filtered += (dt/tau)(raw - filtered)`; pass-through when `tau = 0`.
    pub fn update(&mut self, dt: f64) -> Vec3 {
        let alpha = if self.tau > 0.0 { (dt / self.tau).min(1.0) } else { 1.0 };
        self.filtered += (self.raw - self.filtered) * alpha;
        self.filtered
    }
}

/// Adds the grasping arm's translational velocity to the camera twist, with
/// the rotation `(p_c - p_sb) × v_gt` that keeps the stem centered. The
/// angular part of the grasp twist is never forwarded.
pub fn couple_velocities(v_c: &Twist, v_gt: &Vec3, p_c: &Vec3, p_sb: &Vec3) -> Twist {
    let added = skew(&(p_c - p_sb)) * v_gt;
    Twist::new(v_c.linear + v_gt, v_c.angular + added)
}

/// Damped pseudo-inverse `Jᵀ(JJᵀ + λ²I)⁻¹ V`.
///
/// With `damping = 0` this is the exact right pseudo-inverse and requires a
/// full-row-rank Jacobian.
pub fn joint_velocities(jacobian: &DMatrix<f64>, twist: &Twist, damping: f64) -> Result<DVector<f64>> {
    if damping < 0.0 {
        return Err(Error::InvalidParameter("damping must be non-negative"));
    }
    if jacobian.nrows() != 6 {
        return Err(Error::InvalidParameter("jacobian must have 6 rows"));
    }
    let v = DVector::from_column_slice(twist.to_vector().as_slice());
    let jjt = jacobian * jacobian.transpose() + DMatrix::identity(6, 6) * (damping * damping);
    let y = if damping == 0.0 {
        let lu = jjt.lu();
        let diag_min = lu.u().diagonal().iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
        let diag_max = lu.u().diagonal().iter().map(|d| d.abs()).fold(0.0, f64::max);
        if !(diag_min > 1e-12 * diag_max.max(1.0)) {
            return Err(Error::Singular);
        }
        lu.solve(&v).ok_or(Error::Singular)?
    } else {
        jjt.cholesky().ok_or(Error::Singular)?.solve(&v)
    };
    Ok(jacobian.transpose() * y)
}

/// Standard Denavit-Hartenberg parameters of one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhJoint {
    pub d: f64,
    pub a: f64,
    pub alpha: f64,
}

/// Six-joint serial arm with a numerically differentiated Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialArm {
    pub joints: [DhJoint; 6],
    pub base: Pose,
    pub q: DVector<f64>,
}

impl SerialArm {
    /// UR5e-like geometry mounted at `base`.
    pub fn ur5e(base: Pose) -> Self {
        use std::f64::consts::FRAC_PI_2;
        let j = |d, a, alpha| DhJoint { d, a, alpha };
        Self {
            joints: [
                j(0.1625, 0.0, FRAC_PI_2),
                j(0.0, -0.425, 0.0),
                j(0.0, -0.3922, 0.0),
                j(0.1333, 0.0, FRAC_PI_2),
                j(0.0997, 0.0, -FRAC_PI_2),
                j(0.0996, 0.0, 0.0),
            ],
            base,
            q: DVector::from_column_slice(&[0.0, -1.2, 1.5, -1.9, -1.57, 0.0]),
        }
    }

    pub fn forward(&self, q: &DVector<f64>) -> Pose {
        let mut t = Matrix4::identity();
        for (j, theta) in self.joints.iter().zip(q.iter()) {
            let (st, ct) = theta.sin_cos();
            let (sa, ca) = j.alpha.sin_cos();
            let a = Matrix4::new(
                ct, -st * ca, st * sa, j.a * ct,
                st, ct * ca, -ct * sa, j.a * st,
                0.0, sa, ca, j.d,
                0.0, 0.0, 0.0, 1.0,
            );
            t *= a;
        }
        let r = orthonormalize(&t.fixed_view::<3, 3>(0, 0).into_owned());
        let p = Vec3::new(t[(0, 3)], t[(1, 3)], t[(2, 3)]);
        Pose::new(self.base.to_world(&p), self.base.orientation * r)
    }

    pub fn pose(&self) -> Pose {
        self.forward(&self.q)
    }

    /// World-frame geometric Jacobian by central differences of the forward
    /// kinematics.
    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let h = 1e-6;
        let mut j = DMatrix::zeros(6, 6);
        for i in 0..6 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let fp = self.forward(&qp);
            let fm = self.forward(&qm);
            let dp = (fp.position - fm.position) / (2.0 * h);
            let dr = (fp.orientation * fm.orientation.inverse()).scaled_axis() / (2.0 * h);
            for r in 0..3 {
                j[(r, i)] = dp[r];
                j[(r + 3, i)] = dr[r];
            }
        }
        j
    }

    /// Damped least-squares inverse kinematics starting from the current `q`.
    pub fn solve_ik(&mut self, target: &Pose) -> Result<()> {
        for _ in 0..2000 {
            let cur = self.pose();
            let dp = target.position - cur.position;
            let dr = (target.orientation * cur.orientation.inverse()).scaled_axis();
            if dp.norm() < 1e-10 && dr.norm() < 1e-10 {
                return Ok(());
            }
            let err = Twist::new(dp, dr);
            let dq = joint_velocities(&self.jacobian(&self.q), &err, 0.05)?;
            let step = dq.amax();
            let scale = if step > 0.2 { 0.2 / step } else { 1.0 };
            self.q += dq * scale;
        }
        Err(Error::Config("inverse kinematics did not converge for the initial pose".into()))
    }
}

/// Kinematic model used to realize commanded end-effector twists.
#[derive(Debug, Clone, PartialEq)]
pub enum ArmModel {
    /// `J = I`: the twist is integrated directly on the pose.
    FreeFlyer { pose: Pose },
    Serial6(SerialArm),
}

impl ArmModel {
    pub fn dof(&self) -> usize {
        6
    }

    pub fn pose(&self) -> Pose {
        match self {
            ArmModel::FreeFlyer { pose } => *pose,
            ArmModel::Serial6(arm) => arm.pose(),
        }
    }

    pub fn jacobian(&self) -> DMatrix<f64> {
        match self {
            ArmModel::FreeFlyer { .. } => DMatrix::identity(6, 6),
            ArmModel::Serial6(arm) => arm.jacobian(&arm.q),
        }
    }

    /// Applies `twist` for `dt` seconds: explicit Euler on position, exponential
    /// map on orientation for the free flyer; joint-space Euler through the
    /// damped pseudo-inverse for the serial arm.
    pub fn integrate(&mut self, twist: &Twist, dt: f64, damping: f64) -> Result<()> {
        match self {
            ArmModel::FreeFlyer { pose } => {
                pose.position += twist.linear * dt;
                let r = Rotation::new(twist.angular * dt) * pose.orientation;
                pose.orientation = orthonormalize(r.matrix());
            }
            ArmModel::Serial6(arm) => {
                let qd = joint_velocities(&arm.jacobian(&arm.q), twist, damping)?;
                arm.q += qd * dt;
            }
        }
        Ok(())
    }
}

/// Stacks a 6-vector joint-space velocity into a twist (free flyer only).
pub fn twist_from_joint_velocities(qd: &DVector<f64>) -> Twist {
    Twist::from_vector(&Vector6::from_column_slice(qd.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn roi() -> RoiSpec {
        RoiSpec::new(Vec3::zeros(), 0.35).unwrap()
    }

    #[test]
    fn transition_gates() {
        let th = ThresholdSpec::default();
        let fast = Twist::new(Vec3::x(), Vec3::zeros());
        assert!(!check_transition(&Vec3::new(0.7, 0.0, 0.0), &roi(), &Twist::zero(), &th));
        assert!(!check_transition(&Vec3::new(0.7, 0.0, 0.0), &roi(), &fast, &th));
        let slow = Twist::new(Vec3::x() * 0.005, Vec3::z() * 0.01);
        assert!(check_transition(&Vec3::new(1.04 * 0.35, 0.0, 0.0), &roi(), &slow, &th));
        let spin = Twist::new(Vec3::zeros(), Vec3::z() * 0.03);
        assert!(!check_transition(&Vec3::new(0.3, 0.0, 0.0), &roi(), &spin, &th));
    }

    #[test]
    fn transition_boundary_is_inclusive() {
        // 1.5 * 0.5 is exact, so the boundary case is not blurred by rounding
        let r = RoiSpec::new(Vec3::zeros(), 0.5).unwrap();
        let th = ThresholdSpec {
            dist_factor: 1.5,
            ..ThresholdSpec::default()
        };
        assert!(check_transition(&Vec3::new(0.75, 0.0, 0.0), &r, &Twist::zero(), &th));
        let at_speed = Twist::new(Vec3::x() * 0.01, Vec3::zeros());
        assert!(check_transition(&Vec3::new(0.5, 0.0, 0.0), &r, &at_speed, &th));
    }

    #[test]
    fn phase_is_monotonic() {
        let mut p = PhaseState::default();
        assert_eq!(p.phase(), Phase::CameraOnly);
        p.enter_bimanual(7.5);
        p.enter_bimanual(9.0);
        assert_eq!(p.phase(), Phase::Bimanual);
        assert_eq!(p.transition_time(), Some(7.5));
    }

    #[test]
    fn smoothing_examples() {
        let mut s = SmoothedTarget::new(Vec3::x(), 0.5);
        assert_eq!(s.update(0.002), Vec3::x());

        // step response after one time constant
        let (tau, dt) = (0.5, 0.002);
        let mut s = SmoothedTarget::new(Vec3::zeros(), tau);
        s.raw = Vec3::x();
        let steps = (tau / dt).round() as i32;
        for _ in 0..steps {
            s.update(dt);
        }
        let exact = 1.0 - (1.0 - dt / tau).powi(steps);
        assert_relative_eq!(s.filtered.x, exact, epsilon = 1e-12);
        assert_relative_eq!(s.filtered.x, 0.632, epsilon = 1e-3);

        let mut p = SmoothedTarget::new(Vec3::zeros(), 0.0);
        p.raw = Vec3::y();
        assert_eq!(p.update(0.002), Vec3::y());
    }

    #[test]
    fn smoothing_never_overshoots_monotone_input() {
        let mut s = SmoothedTarget::new(Vec3::zeros(), 0.5);
        let mut prev = 0.0;
        for k in 0..5000 {
            s.raw = Vec3::x() * (k as f64 * 0.001).min(1.0);
            let f = s.update(0.002).x;
            assert!(f <= s.raw.x + 1e-15);
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn coupling_examples() {
        let v = Twist::new(Vec3::x(), Vec3::y());
        assert_eq!(couple_velocities(&v, &Vec3::zeros(), &Vec3::z(), &Vec3::zeros()), v);
        let par = couple_velocities(&Twist::zero(), &(Vec3::z() * 0.01), &(Vec3::z() * 0.35), &Vec3::zeros());
        assert_eq!(par.angular, Vec3::zeros());
        let c = couple_velocities(&Twist::zero(), &(Vec3::x() * 0.01), &(Vec3::z() * 0.35), &Vec3::zeros());
        assert_relative_eq!(c.angular, Vec3::new(0.0, 0.0035, 0.0), epsilon = 1e-15);
        assert_relative_eq!(c.linear, Vec3::x() * 0.01);
    }

    #[test]
    fn identity_jacobian_passes_twist_through() {
        let t = Twist::new(Vec3::new(0.1, -0.2, 0.3), Vec3::new(0.01, 0.02, -0.03));
        let qd = joint_velocities(&DMatrix::identity(6, 6), &t, 0.0).unwrap();
        assert_eq!(twist_from_joint_velocities(&qd), t);
    }

    #[test]
    fn full_rank_residual_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = Twist::new(Vec3::new(0.1, -0.2, 0.3), Vec3::new(0.01, 0.02, -0.03));
        // redundant 6x8
        let j = DMatrix::from_fn(6, 8, |_, _| rng.gen_range(-1.0..1.0));
        let qd = joint_velocities(&j, &t, 0.0).unwrap();
        let res = &j * &qd - DVector::from_column_slice(t.to_vector().as_slice());
        assert!(res.amax() < 1e-9);
        // square invertible
        let j = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let qd = joint_velocities(&j, &t, 0.0).unwrap();
        let inv = j.clone().try_inverse().unwrap() * DVector::from_column_slice(t.to_vector().as_slice());
        assert!((qd - inv).amax() < 1e-9);
    }

    #[test]
    fn damping_bounds_near_singular_solution() {
        let t = Twist::new(Vec3::new(0.0, 0.1, 0.0), Vec3::zeros());
        let mut j = DMatrix::identity(6, 6);
        j[(1, 1)] = 1e-6;
        let qd = joint_velocities(&j, &t, 0.01).unwrap();
        // exact least squares would demand 1e5 rad/s on joint 1
        assert!(qd.amax() < 1.0);
        let res = (&j * &qd - DVector::from_column_slice(t.to_vector().as_slice())).norm();
        assert!(res > 0.0 && res <= 0.1 + 1e-12);

        j[(1, 1)] = 0.0;
        assert!(matches!(joint_velocities(&j, &t, 0.0), Err(Error::Singular)));
        assert!(joint_velocities(&j, &t, 0.01).is_ok());
    }

    #[test]
    fn serial_jacobian_predicts_motion() {
        let arm = SerialArm::ur5e(Pose::new(Vec3::zeros(), Rotation::identity()));
        let j = arm.jacobian(&arm.q);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dq = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0) * 1e-5);
        let a = arm.forward(&arm.q);
        let b = arm.forward(&(arm.q.clone() + &dq));
        let pred = &j * &dq;
        let dp = b.position - a.position;
        let dr = (b.orientation * a.orientation.inverse()).scaled_axis();
        for i in 0..3 {
            assert!((pred[i] - dp[i]).abs() < 1e-8);
            assert!((pred[i + 3] - dr[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn serial_ik_reaches_pose() {
        let mut arm = SerialArm::ur5e(Pose::new(Vec3::zeros(), Rotation::identity()));
        let target = Pose::looking_along(Vec3::new(0.35, -0.25, 0.4), &Vec3::new(0.2, 1.0, 0.1)).unwrap();
        arm.solve_ik(&target).unwrap();
        let p = arm.pose();
        assert!((p.position - target.position).norm() < 1e-9);
        assert!((p.orientation * target.orientation.inverse()).angle() < 1e-9);
    }
}
