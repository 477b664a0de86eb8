//! Spherical Fibonacci lattice and its constant-time inverse mapping.
//!
//! Point `i` of `n` sits at height `z_i = 1 - (2i + 1) / n` and longitude
//! `phi_i = 2π·frac(i·(Φ - 1))`. In `(phi, z)` coordinates the (periodically
//! extended) point set is a 2-D lattice generated by the index steps `F_k` and
//! `F_{k+1}` (consecutive Fibonacci numbers), so the nearest point to a query
//! can be found by inverting that basis locally and checking a few
//! neighbouring lattice cells instead of scanning all `n` points.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::geometry::Vec3;

const GOLDEN: f64 = 1.618_033_988_749_895;

/// Fractional part of `a * b`.
fn madfrac(a: f64, b: f64) -> f64 {
    let x = a * b;
    x - x.floor()
}

/// Unit-sphere position of lattice point `i` out of `n`.
pub fn fibonacci_unit_point(i: usize, n: usize) -> Vec3 {
    if n == 1 {
        return Vec3::z();
    }
    let fi = i as f64;
    let phi = 2.0 * PI * madfrac(fi, GOLDEN - 1.0);
    let z = 1.0 - (2.0 * fi + 1.0) / n as f64;
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(phi.cos() * s, phi.sin() * s, z)
}

/// `n` near-uniform points on the sphere of `radius` around `center`.
///
/// `n = 1` yields the north pole.
pub fn fibonacci_lattice(n: usize, center: &Vec3, radius: f64) -> Vec<Vec3> {
    (0..n)
        .map(|i| center + fibonacci_unit_point(i, n) * radius)
        .collect()
}

/// Index of the lattice point (of `fibonacci_lattice(n, center, radius)`)
/// nearest to `p`. Points off the sphere are matched by direction.
///
/// Runs in constant time: the query's `(phi, z)` coordinates are expressed in
/// the local lattice basis for its latitude zone and the surrounding 4×4 cells
/// are compared by true chord distance.
pub fn nearest_lattice_index(p: &Vec3, n: usize, center: &Vec3, _radius: f64) -> usize {
    if n <= 1 {
        return 0;
    }
    let d = p - center;
    let norm = d.norm();
    if !(norm > 0.0) {
        return 0;
    }
    let q = d / norm;
    let nf = n as f64;

    let phi = q.y.atan2(q.x).min(PI);
    let cos_theta = q.z.clamp(-1.0, 1.0);

    // Fibonacci index of the zone whose lattice basis is the most compact
    // around this latitude.
    let zone = (nf * PI * 5f64.sqrt() * (1.0 - cos_theta * cos_theta)).ln() / (GOLDEN * GOLDEN).ln();
    let k = if zone.is_finite() { zone.floor().max(2.0) } else { 2.0 };

    let mut best = (f64::INFINITY, 0usize);
    // neighbouring zones guard the zone boundaries and the poles
    for kk in [k - 1.0, k, k + 1.0] {
        if kk < 2.0 {
            continue;
        }
        let fk = GOLDEN.powf(kk) / 5f64.sqrt();
        let f0 = fk.round();
        let f1 = (fk * GOLDEN).round();

        let b = Matrix2::new(
            2.0 * PI * madfrac(f0 + 1.0, GOLDEN - 1.0) - 2.0 * PI * (GOLDEN - 1.0),
            2.0 * PI * madfrac(f1 + 1.0, GOLDEN - 1.0) - 2.0 * PI * (GOLDEN - 1.0),
            -2.0 * f0 / nf,
            -2.0 * f1 / nf,
        );
        let Some(inv) = b.try_inverse() else { continue };
        let c = inv * nalgebra::Vector2::new(phi, cos_theta - (1.0 - 1.0 / nf));
        let (c0, c1) = (c.x.floor(), c.y.floor());

        for du in -1..=2 {
            for dv in -1..=2 {
                let idx = f0 * (c0 + du as f64) + f1 * (c1 + dv as f64);
                let idx = idx.clamp(0.0, nf - 1.0) as usize;
                let dist = (fibonacci_unit_point(idx, n) - q).norm_squared();
                if dist < best.0 || (dist == best.0 && idx < best.1) {
                    best = (dist, idx);
                }
            }
        }
    }
    // polar caps: the first/last few indices are cheap to check directly
    for idx in (0..n.min(4)).chain(n.saturating_sub(4)..n) {
        let dist = (fibonacci_unit_point(idx, n) - q).norm_squared();
        if dist < best.0 || (dist == best.0 && idx < best.1) {
            best = (dist, idx);
        }
    }
    best.1
}
