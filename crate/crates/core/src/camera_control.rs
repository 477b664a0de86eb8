//! Camera-arm velocity: region reaching with centering plus the stem
//! unveiling term induced by barrier potentials around obstacle points.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{angle_axis_between, lexicographic, skew, Twist, Vec3};

/// Region of interest: sphere of `radius` around `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiSpec {
    pub center: Vec3,
    pub radius: f64,
    /// Steady-state distance bound, used for reporting only.
    pub reach_bound: f64,
}

impl RoiSpec {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter("ROI radius must be positive"));
        }
        Ok(Self {
            center,
            radius,
            reach_bound: radius,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachGains {
    pub k_cp: f64,
    pub k_co: f64,
}

impl Default for ReachGains {
    fn default() -> Self {
        Self { k_cp: 1.0, k_co: 1.0 }
    }
}

/// Parameters of the unveiling term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnveilParams {
    /// Radius of the sphere each obstacle point stands for.
    pub d_o: f64,
    /// Influence distance of the barrier potential, measured from the sphere surface.
    pub d_a: f64,
    pub k_c: f64,
    /// Time constant of the low-pass filter applied to the unveiling twist.
    pub filter_tau: f64,
}

impl Default for UnveilParams {
    fn default() -> Self {
        Self {
            d_o: 0.001,
            d_a: 0.01,
            k_c: 0.00025,
            filter_tau: 0.1,
        }
    }
}

/// Which branch of the clamped projection produced the nearest ray point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayCase {
    /// Obstacle behind the camera: nearest point is the camera itself.
    Camera,
    /// Orthogonal projection falls strictly inside the ray.
    Middle,
    /// Obstacle beyond the stem point: nearest point is the stem point.
    Stem,
}

/// Nearest point of the ray camera→stem point to one obstacle point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayObstaclePair {
    pub p_hat: Vec3,
    /// Distance from `p_hat` to the obstacle sphere surface.
    pub r_hat: f64,
    /// Unit vector from the obstacle toward `p_hat` (zero if they coincide).
    pub away: Vec3,
    pub case: RayCase,
}

/// Angle between the camera view axis and the direction to the ROI center.
pub fn centering_angle(p_c: &Vec3, z_c: &Vec3, p_r: &Vec3) -> f64 {
    let e = p_r - p_c;
    let n = e.norm() * z_c.norm();
    if n == 0.0 {
        return 0.0;
    }
    (z_c.dot(&e) / n).clamp(-1.0, 1.0).acos()
}

/// Reaching-with-centering twist.
///
/// Linear part `k_cp·max(0, |e|² - r²)·e` with `e = p_r - p_c`; angular part
/// `k_co·θ·k` rotating the view axis onto `e`.
pub fn reaching_centering_twist(p_c: &Vec3, z_c: &Vec3, roi: &RoiSpec, gains: &ReachGains) -> Twist {
    let e = roi.center - p_c;
    let f = e.norm_squared() - roi.radius * roi.radius;
    let linear = e * (gains.k_cp * f.max(0.0));
    let angular = match angle_axis_between(z_c, &e) {
        Ok((theta, k)) if theta >= 1e-9 => k.into_inner() * (gains.k_co * theta),
        Ok(_) => Vec3::zeros(),
        // ROI center straight behind the camera: any axis orthogonal to z works
        Err(Error::AntiParallel) => {
            let mut axis = z_c.cross(&Vec3::x());
            if axis.norm() < 1e-6 {
                axis = z_c.cross(&Vec3::y());
            }
            axis.normalize() * (gains.k_co * std::f64::consts::PI)
        }
        // camera exactly at the ROI center
        Err(_) => Vec3::zeros(),
    };
    Twist::new(linear, angular)
}

/// Point of the segment `[p_c, p_s]` nearest to the obstacle point `p_o`,
/// with the clearance to the obstacle sphere of radius `d_o`.
pub fn nearest_point_on_ray(p_c: &Vec3, p_s: &Vec3, p_o: &Vec3, d_o: f64) -> Result<RayObstaclePair> {
    let cs = p_s - p_c;
    let len = cs.norm();
    if !(len > 0.0) {
        return Err(Error::Degenerate("ray from camera to stem point has zero length"));
    }
    let co = p_o - p_c;
    let t = cs.dot(&co) / len;
    let (p_hat, case) = if t <= 0.0 {
        (*p_c, RayCase::Camera)
    } else if t >= len {
        (*p_s, RayCase::Stem)
    } else {
        (p_c + cs * (cs.dot(&co) / cs.norm_squared()), RayCase::Middle)
    };
    let diff = p_hat - p_o;
    let dist = diff.norm();
    let away = if dist > 0.0 { diff / dist } else { Vec3::zeros() };
    Ok(RayObstaclePair {
        p_hat,
        r_hat: dist - d_o,
        away,
        case,
    })
}

/// Barrier potential `½·ln²(d_a² / (d_a² - (d_a - r̂)²))` inside the
/// influence distance, zero outside. Unbounded as `r̂ → 0⁺`.
pub fn barrier_potential(r_hat: f64, d_a: f64) -> Result<f64> {
    if !(r_hat > 0.0) {
        return Err(Error::PotentialDomain(r_hat));
    }
    if r_hat >= d_a {
        return Ok(0.0);
    }
    let gap = d_a - r_hat;
    let denom = d_a * d_a - gap * gap;
    let log = (d_a * d_a / denom).ln();
    Ok(0.5 * log * log)
}

/// Repulsive velocity `-∂V/∂p̂` acting at the nearest ray point, pointing
/// away from the obstacle.
pub fn repulsive_velocity(pair: &RayObstaclePair, d_a: f64) -> Result<Vec3> {
    let r_hat = pair.r_hat;
    if !(r_hat > 0.0) {
        return Err(Error::PotentialDomain(r_hat));
    }
    if r_hat >= d_a {
        return Ok(Vec3::zeros());
    }
    let gap = d_a - r_hat;
    let denom = d_a * d_a - gap * gap;
    let magnitude = 2.0 / denom * (d_a * d_a / denom).ln();
    Ok(pair.away * (magnitude * gap))
}

/// Angular velocity about the stem point `p_s` induced by `u` acting at
/// `p̂`. Only the middle projection case produces a rotation; a lever arm
/// below 1e-9 m is treated as zero.
pub fn pivot_angular_velocity(pair: &RayObstaclePair, p_s: &Vec3, u: &Vec3) -> Vec3 {
    if pair.case != RayCase::Middle {
        return Vec3::zeros();
    }
    let lever = pair.p_hat - p_s;
    let n2 = lever.norm_squared();
    if n2 < 1e-18 {
        log::warn!("unveiling: pivot lever arm below 1e-9 m, contribution dropped");
        return Vec3::zeros();
    }
    skew(&lever) * u / n2
}

/// Unveiling twist for the current stem and obstacle points.
///
/// Each stem point acts as a pivot; obstacles near its ray push the ray
/// away, which turns into a rotation of the camera about the pivot. Inputs
/// are summed in lexicographic point order so the result does not depend on
/// the order of the input lists. Pairs whose ray already penetrates an
/// obstacle sphere (`r̂ <= 0`) carry no finite potential and are skipped.
pub fn unveiling_twist(p_c: &Vec3, stem_pts: &[Vec3], obstacle_pts: &[Vec3], params: &UnveilParams) -> Twist {
    if stem_pts.is_empty() || obstacle_pts.is_empty() {
        return Twist::zero();
    }
    let mut stems = stem_pts.to_vec();
    let mut obstacles = obstacle_pts.to_vec();
    stems.sort_by(lexicographic);
    obstacles.sort_by(lexicographic);
    let reach = params.d_o + params.d_a;

    let mut linear = Vec3::zeros();
    let mut angular = Vec3::zeros();
    for p_s in &stems {
        let cs = p_s - p_c;
        let len2 = cs.norm_squared();
        if len2 == 0.0 {
            continue;
        }
        let mut omega = Vec3::zeros();
        for p_o in &obstacles {
            // cheap rejection: only middle-case pairs within reach contribute
            let t = cs.dot(&(p_o - p_c));
            if t <= 0.0 || t >= len2 {
                continue;
            }
            let p_hat = p_c + cs * (t / len2);
            if (p_hat - p_o).norm_squared() >= reach * reach {
                continue;
            }
            let Ok(pair) = nearest_point_on_ray(p_c, p_s, p_o, params.d_o) else {
                continue;
            };
            let Ok(u) = repulsive_velocity(&pair, params.d_a) else {
                continue;
            };
            omega += pivot_angular_velocity(&pair, p_s, &u);
        }
        linear += skew(&cs) * omega;
        angular += omega;
    }
    Twist::new(linear * params.k_c, angular * params.k_c)
}

/// Sum of the reaching and unveiling terms, optionally saturated.
pub fn camera_twist(reach: &Twist, unveil: &Twist, limits: Option<(f64, f64)>) -> Twist {
    let sum = *reach + *unveil;
    match limits {
        Some((lin, ang)) => sum.saturated(lin, ang),
        None => sum,
    }
}

/// First-order low-pass filter on a twist, forward-Euler discretized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistFilter {
    pub tau: f64,
    state: Twist,
}

impl TwistFilter {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            state: Twist::zero(),
        }
    }

    pub fn update(&mut self, input: &Twist, dt: f64) -> Twist {
        let alpha = if self.tau > 0.0 { (dt / self.tau).min(1.0) } else { 1.0 };
        self.state = Twist::new(
            self.state.linear + (input.linear - self.state.linear) * alpha,
            self.state.angular + (input.angular - self.state.angular) * alpha,
        );
        self.state
    }

    pub fn value(&self) -> Twist {
        self.state
    }
}

/// Total order used when sorting contributions; exposed for tests.
pub fn point_order(a: &Vec3, b: &Vec3) -> Ordering {
    lexicographic(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inside_roi_and_centered_gives_zero() {
        let roi = RoiSpec::new(Vec3::new(0.0, 0.0, 1.0), 0.35).unwrap();
        let t = reaching_centering_twist(&Vec3::new(0.0, 0.0, 0.8), &Vec3::z(), &roi, &ReachGains::default());
        assert!(t.is_zero());
    }

    #[test]
    fn reaching_example() {
        let roi = RoiSpec::new(Vec3::new(0.0, 0.0, 1.0), 0.35).unwrap();
        let t = reaching_centering_twist(&Vec3::zeros(), &Vec3::z(), &roi, &ReachGains::default());
        assert_relative_eq!(t.linear, Vec3::new(0.0, 0.0, 0.8775), epsilon = 1e-15);
        assert_eq!(t.angular, Vec3::zeros());
    }

    #[test]
    fn centering_rotates_view_toward_roi() {
        let roi = RoiSpec::new(Vec3::new(1.0, 0.0, 1.0), 0.35).unwrap();
        let g = ReachGains { k_cp: 1.0, k_co: 2.0 };
        let t = reaching_centering_twist(&Vec3::zeros(), &Vec3::z(), &roi, &g);
        assert_relative_eq!(t.angular, Vec3::y() * (2.0 * std::f64::consts::FRAC_PI_4), epsilon = 1e-12);
    }

    #[test]
    fn reaching_is_continuous_at_boundary() {
        let roi = RoiSpec::new(Vec3::zeros(), 0.35).unwrap();
        for eps in [1e-3, 1e-6, 1e-9] {
            let p = Vec3::new(0.35 + eps, 0.0, 0.0);
            let t = reaching_centering_twist(&p, &-Vec3::x(), &roi, &ReachGains::default());
            assert!(t.linear.norm() < 1.0 * eps);
        }
    }

    #[test]
    fn nearest_point_cases() {
        let pc = Vec3::zeros();
        let ps = Vec3::x();
        let mid = nearest_point_on_ray(&pc, &ps, &Vec3::new(0.5, 0.1, 0.0), 0.0).unwrap();
        assert_relative_eq!(mid.p_hat, Vec3::new(0.5, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(mid.case, RayCase::Middle);
        let behind = nearest_point_on_ray(&pc, &ps, &Vec3::new(-1.0, 0.0, 0.0), 0.0).unwrap();
        assert_eq!(behind.p_hat, pc);
        assert_eq!(behind.case, RayCase::Camera);
        let beyond = nearest_point_on_ray(&pc, &ps, &Vec3::new(2.0, 0.0, 0.0), 0.0).unwrap();
        assert_eq!(beyond.p_hat, ps);
        assert_eq!(beyond.case, RayCase::Stem);
        assert!(nearest_point_on_ray(&pc, &pc, &ps, 0.0).is_err());
    }

    #[test]
    fn barrier_values() {
        assert_eq!(barrier_potential(0.01, 0.01).unwrap(), 0.0);
        assert_eq!(barrier_potential(0.5, 0.01).unwrap(), 0.0);
        let expected = 0.5 * (4.0f64 / 3.0).ln().powi(2);
        assert_relative_eq!(barrier_potential(0.005, 0.01).unwrap(), expected, epsilon = 1e-15);
        assert_relative_eq!(expected, 0.0414, epsilon = 1e-4);
        assert!(barrier_potential(1e-6 * 0.01, 0.01).unwrap() > 10.0);
        assert!(barrier_potential(0.0, 0.01).is_err());
        assert!(barrier_potential(-1e-3, 0.01).is_err());
    }

    #[test]
    fn barrier_is_decreasing() {
        let d_a = 0.01;
        let mut prev = f64::INFINITY;
        for i in 1..1000 {
            let v = barrier_potential(d_a * i as f64 / 1000.0, d_a).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn repulsion_vanishes_at_influence_boundary() {
        let d_a = 0.01;
        let pair = |r: f64| RayObstaclePair {
            p_hat: Vec3::new(r, 0.0, 0.0),
            r_hat: r,
            away: Vec3::x(),
            case: RayCase::Middle,
        };
        assert_eq!(repulsive_velocity(&pair(d_a), d_a).unwrap(), Vec3::zeros());
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let m = repulsive_velocity(&pair(d_a - 10f64.powi(-k - 2)), d_a).unwrap().norm();
            assert!(m < prev);
            prev = m;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn repulsion_half_influence_matches_formula() {
        let d_a = 0.01;
        let r = d_a / 2.0;
        let pair = RayObstaclePair {
            p_hat: Vec3::new(r + 0.001, 0.0, 0.0),
            r_hat: r,
            away: Vec3::x(),
            case: RayCase::Middle,
        };
        let u = repulsive_velocity(&pair, d_a).unwrap();
        // D = d_a² - (d_a/2)² = 0.75 d_a²
        let denom = 0.75 * d_a * d_a;
        let expected = 2.0 / denom * (1.0f64 / 0.75).ln() * (d_a / 2.0);
        assert_relative_eq!(u.x, expected, max_relative = 1e-14);
        assert_eq!((u.y, u.z), (0.0, 0.0));
    }

    #[test]
    fn pivot_examples() {
        let mk = |case| RayObstaclePair {
            p_hat: Vec3::new(1.0, 0.0, 0.0),
            r_hat: 0.001,
            away: Vec3::y(),
            case,
        };
        let u = Vec3::y() * 3.0;
        assert_eq!(pivot_angular_velocity(&mk(RayCase::Camera), &Vec3::zeros(), &u), Vec3::zeros());
        assert_eq!(pivot_angular_velocity(&mk(RayCase::Stem), &Vec3::zeros(), &u), Vec3::zeros());
        let w = pivot_angular_velocity(&mk(RayCase::Middle), &Vec3::zeros(), &u);
        assert_relative_eq!(w, Vec3::z() * 3.0, epsilon = 1e-15);
        let parallel = pivot_angular_velocity(&mk(RayCase::Middle), &Vec3::zeros(), &Vec3::x());
        assert_eq!(parallel, Vec3::zeros());
        let mut near = mk(RayCase::Middle);
        near.p_hat = Vec3::new(1e-10, 0.0, 0.0);
        assert_eq!(pivot_angular_velocity(&near, &Vec3::zeros(), &u), Vec3::zeros());
    }

    #[test]
    fn unveiling_trivial_cases() {
        let p = UnveilParams::default();
        let pc = Vec3::zeros();
        assert!(unveiling_twist(&pc, &[], &[Vec3::x()], &p).is_zero());
        // obstacle far from the ray
        let t = unveiling_twist(&pc, &[Vec3::new(0.0, 0.0, 0.4)], &[Vec3::new(0.1, 0.0, 0.2)], &p);
        assert!(t.is_zero());
    }

    /// Straight re-derivation of the unveiling sum for one stem point.
    fn oracle(pc: Vec3, ps: Vec3, po: Vec3, p: &UnveilParams) -> Twist {
        let pcs = ps - pc;
        let pco = po - pc;
        let proj = pcs.dot(&pco) / pcs.norm();
        assert!(proj > 0.0 && proj < pcs.norm());
        let phat = pc + pcs * (pcs.dot(&pco) / pcs.dot(&pcs));
        let rhat = (phat - po).norm() - p.d_o;
        let d = p.d_a * p.d_a - (p.d_a - rhat).powi(2);
        let e = (phat - po) / (phat - po).norm() * (p.d_a - rhat);
        let u = e * (2.0 / d * (p.d_a * p.d_a / d).ln());
        let lever = phat - ps;
        let w = lever.cross(&u) / lever.norm_squared();
        Twist::new(pcs.cross(&w) * p.k_c, w * p.k_c)
    }

    #[test]
    fn single_pair_matches_oracle() {
        let p = UnveilParams::default();
        let pc = Vec3::new(0.0, -0.35, 0.0);
        let ps = Vec3::zeros();
        // obstacle mid-ray, lateral offset d_o + d_a/2 so r̂ = d_a/2
        let po = Vec3::new(p.d_o + 0.5 * p.d_a, -0.2, 0.0);
        let got = unveiling_twist(&pc, &[ps], &[po], &p);
        let want = oracle(pc, ps, po, &p);
        assert_relative_eq!(got.linear, want.linear, max_relative = 1e-12);
        assert_relative_eq!(got.angular, want.angular, max_relative = 1e-12);
        let pcs = ps - pc;
        assert!(got.linear.dot(&pcs).abs() <= 1e-12 * got.linear.norm() * pcs.norm());
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = UnveilParams::default();
        let pc = Vec3::new(0.0, -0.3, 0.0);
        let stems: Vec<Vec3> = (0..10)
            .map(|i| Vec3::new(rng.gen_range(-0.01..0.01), 0.0, -0.005 * i as f64))
            .collect();
        let mut obstacles: Vec<Vec3> = (0..200)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-0.03..0.03),
                    rng.gen_range(-0.2..-0.05),
                    rng.gen_range(-0.05..0.0),
                )
            })
            .collect();
        let a = unveiling_twist(&pc, &stems, &obstacles, &p);
        assert!(!a.is_zero());
        obstacles.reverse();
        let mut stems_r = stems.clone();
        stems_r.swap(0, 7);
        let b = unveiling_twist(&pc, &stems_r, &obstacles, &p);
        assert_eq!(a, b);
    }

    #[test]
    fn camera_twist_sums() {
        let r = Twist::new(Vec3::x() * 0.01, Vec3::zeros());
        let u = Twist::new(Vec3::zeros(), Vec3::y() * 0.02);
        assert_eq!(camera_twist(&r, &Twist::zero(), None), r);
        assert_eq!(camera_twist(&Twist::zero(), &u, None), u);
        assert_eq!(camera_twist(&r, &u, None), Twist::new(r.linear, u.angular));
        let big = Twist::new(Vec3::x(), Vec3::zeros());
        assert_relative_eq!(camera_twist(&big, &u, Some((0.1, 0.5))).linear.norm(), 0.1);
    }

    #[test]
    fn filter_converges() {
        let mut f = TwistFilter::new(0.1);
        let target = Twist::new(Vec3::x(), Vec3::y());
        for _ in 0..2000 {
            f.update(&target, 0.002);
        }
        assert_relative_eq!(f.value().linear, target.linear, epsilon = 1e-12);
        let mut pass = TwistFilter::new(0.0);
        assert_eq!(pass.update(&target, 0.002), target);
    }
}
