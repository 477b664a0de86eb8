use nalgebra::Unit;

use crate::error::{Error, Result};
use crate::geometry::{mean, principal_axes, UnitVec3, Vec3};

const MAX_KMEANS_ITERS: usize = 100;

/// Line segment fitted to a cluster by PCA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFit {
    pub direction: UnitVec3,
    /// Extent of the point projections onto `direction`.
    pub length: f64,
    pub mean: Vec3,
}

/// Two-segment stem model.
///
/// `top` is the cluster whose mean is farther from the gripper (the branch
/// side), `bottom` the nearer one. `n_st` points from the top segment toward
/// the bottom cluster, `n_sb` continues away from the top cluster, and
/// `base = mean(top) - (l_t / 2) n_st` is the branch-side end of the stem.
#[derive(Debug, Clone, PartialEq)]
pub struct StemModel {
    pub top_points: Vec<Vec3>,
    pub bottom_points: Vec<Vec3>,
    pub n_st: UnitVec3,
    pub n_sb: UnitVec3,
    pub l_t: f64,
    pub l_b: f64,
    pub l: f64,
    pub base: Vec3,
}

/// Splits stem points into two consecutive clusters with 2-means.
///
/// Initialization is deterministic: the points are split at the median of
/// their projections onto the major principal axis. Returns `(top, bottom)`
/// where `top` is the cluster whose mean is farther from `gripper_pos`; an
/// exact distance tie makes the low-projection cluster the top one.
pub fn cluster_stem(stem_points: &[Vec3], gripper_pos: &Vec3) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let n = stem_points.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let axes = principal_axes(stem_points);
    let major = axes.vectors[0];

    let mut order: Vec<usize> = (0..n).collect();
    let proj: Vec<f64> = stem_points.iter().map(|p| (p - axes.mean).dot(&major)).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let mut assign = vec![1u8; n];
    for &i in &order[..n / 2] {
        assign[i] = 0;
    }

    let centroids = |assign: &[u8]| -> [Vec3; 2] {
        let mut sum = [Vec3::zeros(); 2];
        let mut cnt = [0usize; 2];
        for (p, &a) in stem_points.iter().zip(assign) {
            sum[a as usize] += p;
            cnt[a as usize] += 1;
        }
        [sum[0] / cnt[0] as f64, sum[1] / cnt[1] as f64]
    };

    let mut c = centroids(&assign);
    for _ in 0..MAX_KMEANS_ITERS {
        let next: Vec<u8> = stem_points
            .iter()
            .map(|p| {
                if (p - c[0]).norm_squared() <= (p - c[1]).norm_squared() {
                    0
                } else {
                    1
                }
            })
            .collect();
        if next == assign || next.iter().all(|&a| a == next[0]) {
            break;
        }
        assign = next;
        c = centroids(&assign);
    }

    let split = |which: u8| -> Vec<Vec3> {
        stem_points
            .iter()
            .zip(&assign)
            .filter(|(_, &a)| a == which)
            .map(|(p, _)| *p)
            .collect()
    };
    let (a, b) = (split(0), split(1));
    let da = (c[0] - gripper_pos).norm();
    let db = (c[1] - gripper_pos).norm();
    if da >= db {
        Ok((a, b))
    } else {
        Ok((b, a))
    }
}

/// Fits a line segment to `cluster`: direction is the major principal axis
/// oriented toward `orient_toward`, length the extent of the projections.
pub fn fit_segment(cluster: &[Vec3], orient_toward: &Vec3) -> Result<SegmentFit> {
    if cluster.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: cluster.len(),
        });
    }
    let axes = principal_axes(cluster);
    if !(axes.values[0] > 0.0) {
        return Err(Error::DegenerateCluster);
    }
    let mut dir = axes.vectors[0];
    if dir.dot(&(orient_toward - axes.mean)) < 0.0 {
        dir = -dir;
    }
    let (lo, hi) = cluster
        .iter()
        .map(|p| (p - axes.mean).dot(&dir))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
            (lo.min(t), hi.max(t))
        });
    let length = hi - lo;
    if !(length > 0.0) {
        return Err(Error::DegenerateCluster);
    }
    Ok(SegmentFit {
        direction: Unit::new_normalize(dir),
        length,
        mean: axes.mean,
    })
}

/// Branch-side end of the top segment: `top_mean - (l_t / 2) n_st`.
pub fn compute_stem_base(top_mean: &Vec3, l_t: f64, n_st: &UnitVec3) -> Result<Vec3> {
    if !(l_t > 0.0) {
        return Err(Error::InvalidParameter("top segment length must be positive"));
    }
    Ok(top_mean - n_st.into_inner() * (l_t / 2.0))
}

/// Clusters, fits and locates the stem base in one go.
pub fn model_stem(stem_points: &[Vec3], gripper_pos: &Vec3) -> Result<StemModel> {
    let (top, bottom) = cluster_stem(stem_points, gripper_pos)?;
    let top_mean = mean(&top).ok_or(Error::DegenerateCluster)?;
    let bottom_mean = mean(&bottom).ok_or(Error::DegenerateCluster)?;
    let top_fit = fit_segment(&top, &bottom_mean)?;
    let away = bottom_mean * 2.0 - top_mean;
    let bottom_fit = fit_segment(&bottom, &away)?;
    let base = compute_stem_base(&top_fit.mean, top_fit.length, &top_fit.direction)?;
    Ok(StemModel {
        top_points: top,
        bottom_points: bottom,
        n_st: top_fit.direction,
        n_sb: bottom_fit.direction,
        l_t: top_fit.length,
        l_b: bottom_fit.length,
        l: top_fit.length + bottom_fit.length,
        base,
    })
}
