//! Exit maps over a sphere of velocity directions and the intersections of
//! the forward and backward left/right boundaries on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bisect_param, ExitProbe, ProbeOutcome};
use crate::error::{Error, Result};
use crate::integrate::events::{Classification, TimeDirection};
use crate::neighborhood::speed_from_jacobi;

/// Directions at polar angles `pi (i + 1/2) / n_polar` from +z and azimuths
/// `2 pi j / n_azimuth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereGrid {
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl Default for SphereGrid {
    fn default() -> Self {
        Self { n_polar: 36, n_azimuth: 72 }
    }
}

impl SphereGrid {
    pub fn len(&self) -> usize {
        self.n_polar * self.n_azimuth
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn directions(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.n_polar {
            let th = std::f64::consts::PI * (i as f64 + 0.5) / self.n_polar as f64;
            for j in 0..self.n_azimuth {
                let ph = std::f64::consts::TAU * j as f64 / self.n_azimuth as f64;
                out.push([th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereExitMap {
    pub base_point: [f64; 3],
    pub c_target: f64,
    pub nu0: f64,
    pub speed: f64,
    pub grid: SphereGrid,
    pub directions: Vec<[f64; 3]>,
    pub forward: Vec<ProbeOutcome>,
    pub backward: Vec<ProbeOutcome>,
}

impl SphereExitMap {
    pub fn state(&self, d: &[f64; 3]) -> [f64; 6] {
        let p = self.base_point;
        [p[0], p[1], p[2], self.speed * d[0], self.speed * d[1], self.speed * d[2]]
    }

    /// Counts of (forward, backward) classification pairs.
    pub fn combination_counts(&self) -> Vec<((Classification, Classification), usize)> {
        let mut counts: Vec<((Classification, Classification), usize)> = Vec::new();
        for (f, b) in self.forward.iter().zip(&self.backward) {
            let key = (f.classification, b.classification);
            match counts.iter_mut().find(|(k, _)| *k == key) {
                Some((_, n)) => *n += 1,
                None => counts.push((key, 1)),
            }
        }
        counts
    }
}

/// Classifies every grid direction forward and backward in time.
pub fn sphere_exit_sets(
    probe: &ExitProbe,
    base_point: [f64; 3],
    c_target: f64,
    nu0: f64,
    grid: SphereGrid,
) -> Result<SphereExitMap> {
    probe.check_interior(&base_point)?;
    let speed = speed_from_jacobi(&base_point, c_target, probe.mu())?;
    let directions = grid.directions();
    let mut map = SphereExitMap {
        base_point,
        c_target,
        nu0,
        speed,
        grid,
        directions,
        forward: Vec::new(),
        backward: Vec::new(),
    };
    let pairs: Vec<(ProbeOutcome, ProbeOutcome)> = map
        .directions
        .par_iter()
        .map(|d| {
            let y = map.state(d);
            Ok((
                probe.classify(nu0, y, TimeDirection::Forward)?,
                probe.classify(nu0, y, TimeDirection::Backward)?,
            ))
        })
        .collect::<Result<_>>()?;
    (map.forward, map.backward) = pairs.into_iter().unzip();
    Ok(map)
}

/// A direction that stays in the neighborhood both forward and backward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionState {
    pub direction: [f64; 3],
    pub state: [f64; 6],
    pub forward: ProbeOutcome,
    pub backward: ProbeOutcome,
    /// Angle between the final bracketing directions.
    pub width: f64,
}

impl IntersectionState {
    pub fn min_dwell(&self) -> f64 {
        self.forward.dwell.min(self.backward.dwell)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(&a, &a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

fn angle_between(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let c = cross(a, b);
    dot(&c, &c).sqrt().atan2(dot(a, b))
}

/// Point at parameter `t` in `[0, 1]` on the shorter great-circle arc from `a` to `b`.
fn slerp(a: &[f64; 3], b: &[f64; 3], t: f64) -> [f64; 3] {
    let om = angle_between(a, b);
    if om < 1e-300 {
        return *a;
    }
    let (wa, wb) = (((1.0 - t) * om).sin() / om.sin(), (t * om).sin() / om.sin());
    normalize([wa * a[0] + wb * b[0], wa * a[1] + wb * b[1], wa * a[2] + wb * b[2]])
}

/// `cos(t) d + sin(t) u` for unit `u` orthogonal to `d`.
pub(crate) fn rotate_towards(d: &[f64; 3], u: &[f64; 3], t: f64) -> [f64; 3] {
    let (s, c) = t.sin_cos();
    normalize([c * d[0] + s * u[0], c * d[1] + s * u[1], c * d[2] + s * u[2]])
}

fn is_side(c: Classification) -> bool {
    matches!(c, Classification::Left | Classification::Right)
}

struct Refiner<'a> {
    probe: &'a ExitProbe,
    map: &'a SphereExitMap,
}

impl Refiner<'_> {
    fn classify(&self, d: &[f64; 3], time: TimeDirection) -> Result<ProbeOutcome> {
        self.probe.classify(self.map.nu0, self.map.state(d), time)
    }

    /// Forward boundary point on the arc between grid directions of opposite forward class.
    fn edge_point(&self, a: usize, b: usize, tol: f64) -> Result<[f64; 3]> {
        let (da, db) = (self.map.directions[a], self.map.directions[b]);
        let om = angle_between(&da, &db);
        let class0 = self.map.forward[a].classification;
        let (t, _) = bisect_param(0.0, 1.0, class0, tol / om.max(tol), |t| {
            self.classify(&slerp(&da, &db, t), TimeDirection::Forward)
        })?;
        Ok(slerp(&da, &db, t))
    }

    /// Forward boundary point on the great circle through `m` along the
    /// tangent `w`, searched within `[-h, h]` and widened if needed.
    fn project(&self, m: &[f64; 3], w: &[f64; 3], mut h: f64, tol: f64) -> Result<Option<[f64; 3]>> {
        for _ in 0..8 {
            let a = self.classify(&rotate_towards(m, w, -h), TimeDirection::Forward)?.classification;
            let b = self.classify(&rotate_towards(m, w, h), TimeDirection::Forward)?.classification;
            if is_side(a) && is_side(b) && a != b {
                let (t, _) = bisect_param(-h, h, a, tol, |t| self.classify(&rotate_towards(m, w, t), TimeDirection::Forward))?;
                return Ok(Some(rotate_towards(m, w, t)));
            }
            h *= 2.0;
            if h > 0.5 {
                break;
            }
        }
        Ok(None)
    }

    /// Walks along the forward boundary between `p1` and `p2`, whose backward
    /// classes differ, until they are within `tol`.
    fn refine(&self, mut p1: [f64; 3], mut p2: [f64; 3], tol: f64) -> Result<Option<IntersectionState>> {
        let b1 = self.classify(&p1, TimeDirection::Backward)?.classification;
        let b2 = self.classify(&p2, TimeDirection::Backward)?.classification;
        if !(is_side(b1) && is_side(b2) && b1 != b2) {
            return Ok(None);
        }
        let proj_tol = (tol * 1e-2).max(1e-14);
        while angle_between(&p1, &p2) > tol {
            let h = angle_between(&p1, &p2);
            let m = normalize([p1[0] + p2[0], p1[1] + p2[1], p1[2] + p2[2]]);
            let chord = [p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2]];
            let w = normalize(cross(&m, &chord));
            let Some(q) = self.project(&m, &w, h, proj_tol)? else { break };
            match self.classify(&q, TimeDirection::Backward)?.classification {
                c if c == b1 => p1 = q,
                c if c == b2 => p2 = q,
                _ => {
                    p1 = q;
                    p2 = q;
                }
            }
        }
        let d = normalize([p1[0] + p2[0], p1[1] + p2[1], p1[2] + p2[2]]);
        Ok(Some(IntersectionState {
            direction: d,
            state: self.map.state(&d),
            forward: self.classify(&d, TimeDirection::Forward)?,
            backward: self.classify(&d, TimeDirection::Backward)?,
            width: angle_between(&p1, &p2),
        }))
    }
}

/// Locates the forward and backward left/right boundaries on the map's grid
/// cells and refines each cell where they cross to `refine_tol` in angle.
pub fn boundary_intersection_states(
    probe: &ExitProbe,
    map: &SphereExitMap,
    refine_tol: f64,
) -> Result<Vec<IntersectionState>> {
    if !(refine_tol > 0.0) {
        return Err(Error::InvalidInput(format!("refine tolerance {refine_tol} must be positive")));
    }
    let (np, na) = (map.grid.n_polar, map.grid.n_azimuth);
    if map.directions.len() != np * na || map.forward.len() != np * na || map.backward.len() != np * na {
        return Err(Error::InvalidInput("exit map does not match its grid".into()));
    }
    if np < 2 || na < 2 {
        return Ok(Vec::new());
    }
    let idx = |i: usize, j: usize| i * na + (j % na);
    let mut cells = Vec::new();
    for i in 0..np - 1 {
        for j in 0..na {
            let corners = [idx(i, j), idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j)];
            let fwd_mixed = corners.iter().any(|&k| map.forward[k].classification == Classification::Left)
                && corners.iter().any(|&k| map.forward[k].classification == Classification::Right);
            let bwd_mixed = corners.iter().any(|&k| map.backward[k].classification == Classification::Left)
                && corners.iter().any(|&k| map.backward[k].classification == Classification::Right);
            if fwd_mixed && bwd_mixed {
                cells.push(corners);
            }
        }
    }
    let refiner = Refiner { probe, map };
    let edge_tol = (refine_tol * 1e-2).max(1e-14);
    let found: Vec<Option<IntersectionState>> = cells
        .par_iter()
        .map(|corners| {
            let mut points = Vec::new();
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                let (ca, cb) = (map.forward[a].classification, map.forward[b].classification);
                if is_side(ca) && is_side(cb) && ca != cb {
                    points.push(refiner.edge_point(a, b, edge_tol)?);
                }
            }
            if points.len() != 2 {
                return Ok(None);
            }
            refiner.refine(points[0], points[1], refine_tol)
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}
