//! Section points of tracked orbits and scatter statistics that tell a
//! closed curve from a filled band.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::track::TrackingRun;
use crate::error::{Error, Result};

/// Half-width of the rotation scan around the centroid-angle estimate.
const ROTATION_WINDOW: f64 = 2e-3;

/// Harmonics in the closed-curve fit of a section branch.
pub const CURVE_ORDER: usize = 32;

/// Pair of state components plotted on the section, indices into
/// `(x, y, z, x', y', z')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection(pub usize, pub usize);

impl Default for Projection {
    fn default() -> Self {
        Projection(0, 3)
    }
}

/// Corrected crossing states projected onto two coordinates.
pub fn section_points(run: &TrackingRun, projection: Projection) -> Vec<[f64; 2]> {
    run.crossings
        .iter()
        .map(|c| {
            let y = c.state_out();
            [y[projection.0], y[projection.1]]
        })
        .collect()
}

/// Largest distance of a point from its cluster centroid, over clusters
/// given by `labels`.
pub fn cluster_spread(points: &[[f64; 2]], labels: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut keys: Vec<f64> = labels.to_vec();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    for key in keys {
        let members: Vec<[f64; 2]> = points.iter().zip(labels).filter(|(_, l)| **l == key).map(|(p, _)| *p).collect();
        let n = members.len() as f64;
        let cx = members.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = members.iter().map(|p| p[1]).sum::<f64>() / n;
        for p in &members {
            worst = worst.max((p[0] - cx).hypot(p[1] - cy));
        }
    }
    worst
}

/// Closed curve fitted through section points ordered by rotation phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    /// Turns about the centroid per point.
    pub rotation: f64,
    /// Length of the polygon through the points in phase order, standardized units.
    pub tour: f64,
    /// RMS distance of the points from the fitted curve, standardized units.
    pub rms: f64,
}

fn standardize(points: &[[f64; 2]]) -> Option<Vec<[f64; 2]>> {
    let n = points.len() as f64;
    let mean = |k: usize| points.iter().map(|p| p[k]).sum::<f64>() / n;
    let (mx, my) = (mean(0), mean(1));
    let sd = |k: usize, m: f64| (points.iter().map(|p| (p[k] - m).powi(2)).sum::<f64>() / n).sqrt();
    let (sx, sy) = (sd(0, mx), sd(1, my));
    (sx > 0.0 && sy > 0.0).then(|| points.iter().map(|p| [(p[0] - mx) / sx, (p[1] - my) / sy]).collect())
}

fn phases(n: usize, rotation: f64) -> Vec<f64> {
    (0..n).map(|k| (k as f64 * rotation).rem_euclid(1.0)).collect()
}

fn tour_length(points: &[[f64; 2]], rotation: f64) -> f64 {
    let phi = phases(points.len(), rotation);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| phi[a].total_cmp(&phi[b]));
    let mut len = 0.0;
    for w in 0..order.len() {
        let (p, q) = (points[order[w]], points[order[(w + 1) % order.len()]]);
        len += (p[0] - q[0]).hypot(p[1] - q[1]);
    }
    len
}

/// Fits a closed curve to points that advance by a fixed rotation per step.
///
/// Coordinates are standardized. The rotation is estimated from the mean
/// angle increment about the centroid and refined by minimizing the length of
/// the polygon through the points sorted by phase. Both coordinates are then
/// fitted as Fourier series of the phase with `order` harmonics.
pub fn fit_closed_curve(points: &[[f64; 2]], order: usize) -> Result<CurveFit> {
    let n = points.len();
    let cols = 2 * order + 1;
    if n < 2 * cols {
        return Err(Error::InvalidInput(format!("{n} points are too few for a fit of order {order}")));
    }
    let Some(z) = standardize(points) else {
        return Ok(CurveFit { rotation: 0.0, tour: 0.0, rms: 0.0 });
    };
    let turn: f64 = z
        .windows(2)
        .map(|w| {
            let d = w[1][1].atan2(w[1][0]) - w[0][1].atan2(w[0][0]);
            (d + PI).rem_euclid(TAU) - PI
        })
        .sum::<f64>()
        / ((n - 1) as f64 * TAU);
    let steps = 4000;
    let step = 2.0 * ROTATION_WINDOW / steps as f64;
    let scan: Vec<(f64, f64)> = (0..=steps)
        .map(|i| {
            let r = turn - ROTATION_WINDOW + step * i as f64;
            (r, tour_length(&z, r))
        })
        .collect();
    let tour = scan.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let flat: Vec<f64> = scan.iter().filter(|s| s.1 <= tour * (1.0 + 1e-12)).map(|s| s.0).collect();
    // The phase order is constant over an interval of rotations, so the
    // residual of the fit settles where inside it the rotation lies.
    let residual = |r: f64| fourier_residual(&z, r, order);
    let (mut lo, mut hi) = (flat[0] - step, flat[flat.len() - 1] + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fc, mut fd) = (residual(c)?, residual(d)?);
    while hi - lo > 1e-14 {
        if fc < fd {
            (hi, d, fd) = (d, c, fc);
            c = hi - g * (hi - lo);
            fc = residual(c)?;
        } else {
            (lo, c, fc) = (c, d, fd);
            d = lo + g * (hi - lo);
            fd = residual(d)?;
        }
    }
    let rotation = 0.5 * (lo + hi);
    let rms = residual(rotation)?;
    Ok(CurveFit { rotation, tour, rms })
}

fn fourier_residual(z: &[[f64; 2]], rotation: f64, order: usize) -> Result<f64> {
    let n = z.len();
    let cols = 2 * order + 1;
    let phi = phases(n, rotation);
    let mut a = DMatrix::zeros(n, cols);
    let mut b = DMatrix::zeros(n, 2);
    for i in 0..n {
        a[(i, 0)] = 1.0;
        for k in 1..=order {
            let arg = TAU * k as f64 * phi[i];
            a[(i, 2 * k - 1)] = arg.cos();
            a[(i, 2 * k)] = arg.sin();
        }
        b[(i, 0)] = z[i][0];
        b[(i, 1)] = z[i][1];
    }
    let coef = a.clone().svd(true, true).solve(&b, 1e-12).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let resid = &b - &a * coef;
    Ok((resid.norm_squared() / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphologyStats {
    /// Crossing-direction sign, point count and curve fit of each branch.
    pub branches: Vec<(f64, usize, CurveFit)>,
    /// Largest branch RMS scatter about its fitted curve.
    pub spread: f64,
}

/// Closed-curve scatter of a run's section points, per crossing direction,
/// after dropping the first `skip` crossings.
pub fn section_spread(run: &TrackingRun, projection: Projection, skip: usize, order: usize) -> Result<MorphologyStats> {
    let mut branches = Vec::new();
    for sign in [-1.0, 1.0] {
        let pts: Vec<[f64; 2]> = run
            .crossings
            .iter()
            .skip(skip)
            .filter(|c| c.sign == sign)
            .map(|c| {
                let y = c.state_out();
                [y[projection.0], y[projection.1]]
            })
            .collect();
        if pts.is_empty() {
            continue;
        }
        branches.push((sign, pts.len(), fit_closed_curve(&pts, order)?));
    }
    if branches.is_empty() {
        return Err(Error::InvalidInput("run has no section points".into()));
    }
    let spread = branches.iter().map(|b| b.2.rms).fold(0.0, f64::max);
    Ok(MorphologyStats { branches, spread })
}
