//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use precut::camera_control::{
    barrier_potential, nearest_point_on_ray, repulsive_velocity, unveiling_twist, RayCase, UnveilParams,
};
use precut::experiment::{default_scene, run, RunConfig, RunOutput, TraceRow};
use precut::grasp_control::{force_velocity, position_velocity, GraspGains, GraspState};
use precut::scene::{fibonacci_lattice, nearest_lattice_index, select_free_space_target};
use precut::{UnitVec3, Vec3};

const R: f64 = 0.35;
const F_D: f64 = 3.0;

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    Vector3::new(a.cos() * s, a.sin() * s, z)
}

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vector3::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

fn tail(trace: &[TraceRow], seconds: f64) -> Vec<&TraceRow> {
    let end = trace.last().map_or(0.0, |r| r.t);
    trace.iter().filter(|r| r.t >= end - seconds - 1e-9).collect()
}

fn a1(out: &RunOutput, budget_secs: f64) -> Outcome {
    let rows = tail(&out.trace, 2.0);
    let worst = rows.iter().map(|r| r.roi_dist).fold(out.metrics.final_roi_dist, f64::max);
    let pass = !rows.is_empty() && worst <= R && budget_secs < 60.0;
    Outcome {
        id: "A1",
        name: "reaching",
        pass,
        detail: format!(
            "max roi distance over last 2 s = {worst:.4} m (r = {R}); 30 s simulated in {budget_secs:.2} s wall-clock"
        ),
    }
}

fn a2(out: &RunOutput) -> Outcome {
    let rows = tail(&out.trace, 2.0);
    let worst = rows.iter().map(|r| r.theta).fold(out.metrics.final_theta, f64::max);
    Outcome {
        id: "A2",
        name: "centering",
        pass: !rows.is_empty() && worst < 0.05,
        detail: format!("max theta over last 2 s = {worst:.5} rad"),
    }
}

fn a3(out: &RunOutput) -> Outcome {
    let m = &out.metrics;
    let (first, at_transition) = match (m.visible_at_first_detection, m.visible_at_transition) {
        (Some(f), Some(t)) => (f, t),
        _ => {
            return Outcome {
                id: "A3",
                name: "unveiling",
                pass: false,
                detail: "stem not detected or no transition".into(),
            }
        }
    };
    let end = m.visible_final;
    Outcome {
        id: "A3",
        name: "unveiling",
        pass: end as f64 >= 1.2 * first as f64 && end >= at_transition,
        detail: format!("visible stem points: first detection {first}, transition {at_transition}, end {end}"),
    }
}

fn a4(out: &RunOutput) -> Outcome {
    let rows = tail(&out.trace, 2.0);
    let worst = rows
        .iter()
        .map(|r| (r.force_along_nc - F_D).abs())
        .fold((out.metrics.final_force_along_nc - F_D).abs(), f64::max);
    let bimanual = rows.iter().all(|r| r.phase.code() == 1);
    Outcome {
        id: "A4",
        name: "force",
        pass: !rows.is_empty() && bimanual && worst <= 0.05 * F_D,
        detail: format!(
            "max |n_c.f - f_d| over last 2 s = {worst:.4} N (bound {:.2} N), settled at {:?} s",
            0.05 * F_D,
            out.metrics.force_settling_time
        ),
    }
}

fn a5(out: &RunOutput) -> Outcome {
    let m = &out.metrics;
    Outcome {
        id: "A5",
        name: "position/orientation",
        pass: m.transition_time.is_some() && m.final_pos_err_orth < 1e-3 && m.final_align_angle < 0.01,
        detail: format!(
            "final orthogonal position error {:.3e} m, alignment angle {:.3e} rad",
            m.final_pos_err_orth, m.final_align_angle
        ),
    }
}

fn brute_force_target(free: &[Vec3], obstacles: &[Vec3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::NEG_INFINITY;
    for (i, f) in free.iter().enumerate() {
        let mut d = f64::INFINITY;
        for o in obstacles {
            let dist = (f - o).norm();
            if dist < d {
                d = dist;
            }
        }
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn a6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=500);
        let center = random_vec(&mut rng, 1.0);
        let l = rng.gen_range(0.03..0.1);
        let lattice = fibonacci_lattice(n, &center, l);
        let free: Vec<Vec3> = lattice.into_iter().filter(|_| rng.gen_bool(0.7)).collect();
        if free.is_empty() {
            continue;
        }
        let k = rng.gen_range(0..=200);
        let obstacles: Vec<Vec3> = (0..k).map(|_| center + random_unit(&mut rng) * l).collect();
        let got = select_free_space_target(&free, &obstacles).expect("non-empty free set");
        if got != brute_force_target(&free, &obstacles) {
            mismatches += 1;
        }
    }
    Outcome {
        id: "A6",
        name: "free-space oracle",
        pass: mismatches == 0,
        detail: format!("{mismatches} mismatches in 100 randomized instances"),
    }
}

fn a7() -> Outcome {
    let d_a = 0.01;
    let d_o = 0.001;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst: f64 = 0.0;
    let mut states = 0;
    while states < 20 {
        let p_o = random_vec(&mut rng, 0.1);
        let dir = random_unit(&mut rng);
        let r_hat = rng.gen_range(0.05 * d_a..0.95 * d_a);
        let p_hat = p_o + dir * (r_hat + d_o);
        let potential = |p: &Vec3| barrier_potential((p - p_o).norm() - d_o, d_a).expect("inside domain");
        let pair = precut::camera_control::RayObstaclePair {
            p_hat,
            r_hat,
            away: dir,
            case: RayCase::Middle,
        };
        let u = repulsive_velocity(&pair, d_a).expect("inside domain");
        let h = 1e-8;
        let mut grad = Vec3::zeros();
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = h;
            grad[i] = (potential(&(p_hat + e)) - potential(&(p_hat - e))) / (2.0 * h);
        }
        let rel = (u + grad).norm() / u.norm();
        worst = worst.max(rel);
        states += 1;
    }
    Outcome {
        id: "A7",
        name: "gradient check",
        pass: worst <= 1e-5,
        detail: format!("max relative error |u + dV/dp| / |u| = {worst:.2e} over 20 states"),
    }
}

/// Camera moved by the unveiling twist alone in a static scene; every pair
/// inside the influence distance must not gain potential.
fn a8() -> Outcome {
    let params = UnveilParams {
        filter_tau: 0.0,
        ..UnveilParams::default()
    };
    let dt = 0.002;
    let stems: Vec<Vec3> = (0..5).map(|i| Vector3::new(0.0, 0.0, -0.01 * i as f64)).collect();
    // leaf edge hanging just beside the sight lines, 8 cm in front of the stem
    let obstacles: Vec<Vec3> = (0..9)
        .flat_map(|i| (0..3).map(move |j| Vector3::new(0.0075 + 0.0025 * j as f64, -0.08, 0.01 - 0.005 * i as f64)))
        .collect();
    let mut p_c = Vector3::new(0.0, -0.35, -0.02);

    let pair_values = |p_c: &Vec3| -> Vec<Option<f64>> {
        let mut v = Vec::new();
        for s in &stems {
            for o in &obstacles {
                let pair = nearest_point_on_ray(p_c, s, o, params.d_o).expect("non-degenerate ray");
                v.push(if pair.r_hat > 0.0 && pair.r_hat < params.d_a {
                    Some(barrier_potential(pair.r_hat, params.d_a).expect("positive clearance"))
                } else {
                    None
                });
            }
        }
        v
    };

    let steps = 1500;
    let mut prev = pair_values(&p_c);
    let initially_active = prev.iter().filter(|v| v.is_some()).count();
    let mut worst_increase = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for _ in 0..steps {
        let twist = unveiling_twist(&p_c, &stems, &obstacles, &params);
        p_c += twist.linear * dt;
        let next = pair_values(&p_c);
        for (a, b) in prev.iter().zip(&next) {
            if let Some(a) = a {
                let b = b.unwrap_or(0.0);
                worst_increase = worst_increase.max(b - a);
                checked += 1;
            }
        }
        prev = next;
    }
    Outcome {
        id: "A8",
        name: "potential decrease",
        pass: initially_active > 0 && checked > 0 && worst_increase <= 1e-6,
        detail: format!(
            "{steps} steps, {initially_active} pairs initially active, {checked} pair-steps checked, max increase {worst_increase:.2e}"
        ),
    }
}

fn a9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let gains = GraspGains::default();
    let params = UnveilParams::default();
    let (mut wp, mut wf, mut wu): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut unveil_samples = 0;
    for _ in 0..10_000 {
        let n = UnitVec3::new_normalize(random_unit(&mut rng));
        let p_g = random_vec(&mut rng, 0.2);
        let p_gd = random_vec(&mut rng, 0.2);
        let v_p = position_velocity(&p_g, &p_gd, &n, gains.k_pg);
        if v_p.norm() > 0.0 {
            wp = wp.max(v_p.dot(&n).abs() / v_p.norm());
        }

        let mut state = GraspState {
            integral_e_f: rng.gen_range(-10.0..10.0),
            n_c: n,
            p_gd,
        };
        let f = random_vec(&mut rng, 6.0);
        let v_f = force_velocity(&f, &n, &mut state, &gains, 0.002);
        if v_f.norm() > 0.0 {
            wf = wf.max(v_f.cross(&n).norm() / v_f.norm());
        }

        // one stem point with an obstacle near its sight line
        let p_c = random_vec(&mut rng, 0.05);
        let p_s = p_c + random_unit(&mut rng) * rng.gen_range(0.2..0.5);
        let along = rng.gen_range(0.1..0.9);
        let side = random_unit(&mut rng);
        let ray = p_s - p_c;
        let side = (side - ray * (side.dot(&ray) / ray.norm_squared())).normalize();
        let p_o = p_c + ray * along + side * rng.gen_range(0.002..0.01);
        let twist = unveiling_twist(&p_c, &[p_s], &[p_o], &params);
        let lin = twist.linear;
        if lin.norm() > 0.0 {
            unveil_samples += 1;
            wu = wu.max(lin.dot(&ray).abs() / (lin.norm() * ray.norm()));
        }
    }
    let bound = 1e-12;
    Outcome {
        id: "A9",
        name: "orthogonality",
        pass: wp <= bound && wf <= bound && wu <= bound && unveil_samples > 1000,
        detail: format!(
            "max relative |v_p.n_c| = {wp:.1e}, |v_f x n_c| = {wf:.1e}, |lin.p_cs| = {wu:.1e} ({unveil_samples} active unveiling samples)"
        ),
    }
}

fn a10() -> Outcome {
    let n = 500;
    let center = Vector3::new(0.2, -0.1, 0.9);
    let radius = 0.0631;
    let lattice = fibonacci_lattice(n, &center, radius);
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut failures = 0;
    for _ in 0..10_000 {
        let q = center + random_unit(&mut rng) * radius;
        let got = nearest_lattice_index(&q, n, &center, radius);
        let best = lattice.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min);
        if (lattice[got] - q).norm() - best > 1e-12 {
            failures += 1;
        }
    }
    Outcome {
        id: "A10",
        name: "lattice lookup",
        pass: failures == 0,
        detail: format!("{failures} of 10000 queries differ from the exhaustive argmin"),
    }
}

fn a11(config: &RunConfig, first: &RunOutput) -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let scene = default_scene(config).expect("scene");
    let second = run(config, &scene).expect("second run");
    first.write(dir.path().join("a")).expect("write first");
    second.write(dir.path().join("b")).expect("write second");
    let a = std::fs::read(dir.path().join("a/trace.csv")).expect("read trace");
    let b = std::fs::read(dir.path().join("b/trace.csv")).expect("read trace");
    Outcome {
        id: "A11",
        name: "determinism",
        pass: a == b && !a.is_empty(),
        detail: format!("trace.csv sizes {} and {} bytes, identical = {}", a.len(), b.len(), a == b),
    }
}

fn main() {
    // the standard test harness flags are accepted and ignored
    let list_only = std::env::args().any(|a| a == "--list");
    if list_only {
        println!("acceptance: test");
        return;
    }

    let config = RunConfig::default();
    let scene = default_scene(&config).expect("default scene");
    let output = run(&config, &scene).expect("default run");

    let budget_config = RunConfig {
        duration: 30.0,
        ..RunConfig::default()
    };
    let started = Instant::now();
    run(&budget_config, &scene).expect("30 s run");
    let budget = started.elapsed().as_secs_f64();

    let outcomes = vec![
        a1(&output, budget),
        a2(&output),
        a3(&output),
        a4(&output),
        a5(&output),
        a6(),
        a7(),
        a8(),
        a9(),
        a10(),
        a11(&config, &output),
    ];

    println!();
    let mut failed = 0;
    for o in &outcomes {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{status} {:<4} {:<22} {}", o.id, o.name, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("\nacceptance: {} passed, {} failed\n", outcomes.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
