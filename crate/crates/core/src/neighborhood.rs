//! The neighborhood `N` between a cylinder about the barycentric axis and a
//! cylinder about the secondary, the Jacobi layer, tangent-trajectory
//! verification of the boundaries and zero-velocity curves.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::events::{
    propagate_until_exit, Classification, EventSpec, ExitRecord, Face, RegionSpec, Side, TimeDirection,
};
use crate::integrate::root::brent;
use crate::integrate::IntegratorConfig;
use crate::models::{jacobi_of, pseudo_potential, Model, ModelKind};
use crate::state::PhaseState;

/// Exit budget in the independent variable: fifty revolutions of the primaries.
pub const DEFAULT_BUDGET: f64 = 50.0 * TAU;

/// Boundary geometry of `N` and the energy layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborhoodSpec {
    /// Radius of the left boundary, a cylinder about the z-axis; `N` lies outside it.
    pub r_left: f64,
    /// Radius of the right boundary, a cylinder about the secondary's axis; `N` lies inside it.
    pub r_right: f64,
    /// Jacobi interval `[C0, C1]` of the layer.
    pub layer: [f64; 2],
    /// Half-height of spatial grids; `None` picks the height where both
    /// cylinders leave the Hill region.
    #[serde(default)]
    pub z_extent: Option<f64>,
}

impl NeighborhoodSpec {
    /// Boundaries verified for the circular problem.
    pub fn crtbp() -> Self {
        Self { r_left: 0.993, r_right: 0.35, layer: [3.10, 3.17], z_extent: None }
    }

    /// Boundaries verified for the elliptic problem.
    pub fn ertbp() -> Self {
        Self { r_left: 1.02, ..Self::crtbp() }
    }

    pub fn validate(&self, mu: f64) -> Result<()> {
        let d = 1.0 - mu;
        if !(self.r_left > 0.0 && self.r_right > 0.0) {
            return Err(Error::InvalidInput("boundary radii must be positive".into()));
        }
        if !(self.r_left > d - self.r_right && self.r_left < d + self.r_right) {
            return Err(Error::InvalidInput(format!(
                "cylinders of radius {} and {} do not intersect",
                self.r_left, self.r_right
            )));
        }
        if !(self.layer[0] <= self.layer[1]) {
            return Err(Error::InvalidInput(format!("layer {:?} is not ordered", self.layer)));
        }
        if let Some(z) = self.z_extent {
            if !(z > 0.0) {
                return Err(Error::InvalidInput(format!("z_extent {z} must be positive")));
            }
        }
        Ok(())
    }

    /// The region `N` with faces labelled `Left` and `Right`.
    pub fn region(&self, mu: f64) -> Result<RegionSpec> {
        RegionSpec::new(vec![
            EventSpec::cylinder([0.0, 0.0], self.r_left, Side::Outside, Face::Left)?,
            EventSpec::cylinder([1.0 - mu, 0.0], self.r_right, Side::Inside, Face::Right)?,
        ])
    }

    /// Axis center and radius of a boundary.
    pub fn cylinder(&self, face: Face, mu: f64) -> Result<([f64; 2], f64)> {
        match face {
            Face::Left => Ok(([0.0, 0.0], self.r_left)),
            Face::Right => Ok(([1.0 - mu, 0.0], self.r_right)),
            other => Err(Error::InvalidInput(format!("no boundary {other:?}"))),
        }
    }

    /// Half-width of the angular arc of `face` that bounds `N`.
    pub fn arc_half_width(&self, face: Face, mu: f64) -> Result<f64> {
        self.validate(mu)?;
        let d = 1.0 - mu;
        let (rl, rr) = (self.r_left, self.r_right);
        let c = match face {
            Face::Left => (rl * rl + d * d - rr * rr) / (2.0 * rl * d),
            Face::Right => (rl * rl - d * d - rr * rr) / (2.0 * d * rr),
            other => return Err(Error::InvalidInput(format!("no boundary {other:?}"))),
        };
        Ok(c.clamp(-1.0, 1.0).acos())
    }
}

/// Speed with which a point at `pos` has Jacobi value `c`.
pub fn speed_from_jacobi(pos: &[f64; 3], c: f64, mu: f64) -> Result<f64> {
    let excess = 2.0 * pseudo_potential(pos, mu)? - c;
    if excess < 0.0 {
        return Err(Error::ForbiddenRegion(excess));
    }
    Ok(excess.sqrt())
}

/// Whether an elliptic state in pulsating coordinates lies in the layer.
pub fn in_layer(state: &PhaseState, spec: &NeighborhoodSpec, mu: f64) -> bool {
    match crate::models::instantaneous_jacobi(state, mu) {
        Ok(c) => c >= spec.layer[0] && c <= spec.layer[1],
        Err(_) => false,
    }
}

/// A state on a boundary whose velocity is tangent to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentState {
    pub boundary: Face,
    pub r: f64,
    /// Angle about the boundary's own axis.
    pub theta: f64,
    pub z: f64,
    pub speed: f64,
    /// In-plane velocity angle, `theta +/- pi/2`.
    pub phi_v: f64,
    /// Elevation of the velocity above the xy-plane.
    pub pitch: f64,
    pub nu0: f64,
    pub c: f64,
}

impl TangentState {
    pub fn to_array(&self, mu: f64) -> [f64; 6] {
        let cx = if self.boundary == Face::Right { 1.0 - mu } else { 0.0 };
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi_v.sin_cos();
        let (se, ce) = self.pitch.sin_cos();
        [
            cx + self.r * ct,
            self.r * st,
            self.z,
            self.speed * ce * cp,
            self.speed * ce * sp,
            self.speed * se,
        ]
    }

    /// Outward unit normal of the boundary at this point.
    pub fn normal(&self) -> [f64; 3] {
        [self.theta.cos(), self.theta.sin(), 0.0]
    }
}

/// Resolution of a tangent grid. `n_z = 1` gives the planar grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangentGrid {
    pub n_theta: usize,
    pub n_z: usize,
    pub n_pitch: usize,
}

impl TangentGrid {
    pub fn planar(n_theta: usize) -> Self {
        Self { n_theta, n_z: 1, n_pitch: 1 }
    }

    pub fn spatial() -> Self {
        Self { n_theta: 180, n_z: 21, n_pitch: 9 }
    }

    pub fn is_planar(&self) -> bool {
        self.n_z == 1 && self.n_pitch == 1
    }
}

impl Default for TangentGrid {
    fn default() -> Self {
        Self::planar(720)
    }
}

/// Tangent states on one boundary at energy `c`. Angles are node midpoints
/// spread over the arc of the boundary that bounds `N`; nodes outside the
/// Hill region are skipped. Each node carries both tangent senses.
pub fn tangent_grid(
    spec: &NeighborhoodSpec,
    boundary: Face,
    grid: TangentGrid,
    c: f64,
    nu0: f64,
    mu: f64,
) -> Result<Vec<TangentState>> {
    if grid.n_theta == 0 || grid.n_z == 0 || grid.n_pitch == 0 {
        return Err(Error::InvalidInput("tangent grid sizes must be at least 1".into()));
    }
    let half = spec.arc_half_width(boundary, mu)?;
    let (center, r) = spec.cylinder(boundary, mu)?;
    let planar = grid.is_planar();
    let z_ext = if planar { 0.0 } else { spec.z_extent.map_or_else(|| hill_ceiling(spec, c, mu), Ok)? };
    let mut out = Vec::new();
    for iz in 0..grid.n_z {
        let z = if grid.n_z == 1 { 0.0 } else { -z_ext + 2.0 * z_ext * iz as f64 / (grid.n_z - 1) as f64 };
        for it in 0..grid.n_theta {
            let theta = -half + 2.0 * half * (it as f64 + 0.5) / grid.n_theta as f64;
            let pos = [center[0] + r * theta.cos(), center[1] + r * theta.sin(), z];
            let Ok(speed) = speed_from_jacobi(&pos, c, mu) else { continue };
            if speed == 0.0 {
                continue;
            }
            for sense in [1.0, -1.0] {
                for ip in 0..grid.n_pitch {
                    let pitch = if grid.n_pitch == 1 {
                        0.0
                    } else {
                        -FRAC_PI_2 + PI * (ip as f64 + 0.5) / grid.n_pitch as f64
                    };
                    out.push(TangentState {
                        boundary,
                        r,
                        theta,
                        z,
                        speed,
                        phi_v: theta + sense * FRAC_PI_2,
                        pitch,
                        nu0,
                        c,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Smallest height above which both boundary arcs lie outside the Hill
/// region of energy `c`.
pub fn hill_ceiling(spec: &NeighborhoodSpec, c: f64, mu: f64) -> Result<f64> {
    let excess_at = |z: f64| -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for face in [Face::Left, Face::Right] {
            let half = spec.arc_half_width(face, mu)?;
            let (center, r) = spec.cylinder(face, mu)?;
            for k in 0..=256 {
                let th = -half + 2.0 * half * k as f64 / 256.0;
                let pos = [center[0] + r * th.cos(), center[1] + r * th.sin(), z];
                worst = worst.max(2.0 * pseudo_potential(&pos, mu)? - c);
            }
        }
        Ok(worst)
    };
    let (mut lo, mut hi) = (0.0, 0.05);
    while excess_at(hi)? >= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 100.0 {
            return Err(Error::InvalidInput(format!("Hill region at C = {c} is unbounded in z")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if excess_at(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Settings of a boundary sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub epochs: Vec<f64>,
    pub energies: Vec<f64>,
    pub grid: TangentGrid,
    pub budget: f64,
    pub integrator: IntegratorConfig,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            epochs: (0..16).map(|k| k as f64 * TAU / 16.0).collect(),
            energies: vec![3.10, 3.14, 3.17],
            grid: TangentGrid::default(),
            budget: DEFAULT_BUDGET,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Exit of one tangent state in one time direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalExit {
    pub classification: Classification,
    /// Set when the trajectory hit a primary inside `N`; counts as a failure.
    pub collided: bool,
    pub exit_s: f64,
    /// Jacobi function at the exit state, `None` after a collision.
    pub exit_c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub tangent: TangentState,
    pub forward: DirectionalExit,
    pub backward: DirectionalExit,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FaceTally {
    pub tested: usize,
    pub passed: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub model: ModelKind,
    pub spec: NeighborhoodSpec,
    pub settings: VerifySettings,
    pub left: FaceTally,
    pub right: FaceTally,
    /// Range of the Jacobi function over all exit states.
    pub exit_c_range: [f64; 2],
    pub pass: bool,
    pub records: Vec<NodeRecord>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &NodeRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn tested(&self) -> usize {
        self.left.tested + self.right.tested
    }
}

fn exit_of(rec: Result<ExitRecord>, mu: f64) -> Result<DirectionalExit> {
    match rec {
        Ok(rec) => {
            let y: [f64; 6] = rec.exit_state.as_slice().try_into().expect("six components");
            Ok(DirectionalExit {
                classification: rec.classification,
                collided: false,
                exit_s: rec.exit_s,
                exit_c: Some(jacobi_of(&y, mu)?),
            })
        }
        Err(Error::Collision { s, .. }) => {
            Ok(DirectionalExit { classification: Classification::OtherFace, collided: true, exit_s: s, exit_c: None })
        }
        Err(e) => Err(e),
    }
}

/// Propagates one tangent state both ways and checks it exits through its own boundary.
pub fn check_tangent(
    model: &Model,
    region: &RegionSpec,
    t: &TangentState,
    budget: f64,
    cfg: IntegratorConfig,
) -> Result<NodeRecord> {
    let mu = model.params.mu;
    let y0 = t.to_array(mu);
    let s0 = if model.kind == ModelKind::Crtbp { 0.0 } else { t.nu0 };
    let forward = exit_of(propagate_until_exit(model, s0, y0, region, budget, TimeDirection::Forward, cfg), mu)?;
    let backward = exit_of(propagate_until_exit(model, s0, y0, region, budget, TimeDirection::Backward, cfg), mu)?;
    let expected = Classification::from_face(t.boundary);
    Ok(NodeRecord {
        tangent: *t,
        forward,
        backward,
        pass: forward.classification == expected && backward.classification == expected,
    })
}

/// Tangent-trajectory test of both boundaries over epochs and energies.
/// The verdict passes iff every tangent state exits through the boundary it
/// touches, forward and backward; budget exhaustion counts as a failure.
pub fn verify_neighborhood(
    spec: &NeighborhoodSpec,
    model: &Model,
    settings: &VerifySettings,
) -> Result<VerificationReport> {
    let mu = model.params.mu;
    spec.validate(mu)?;
    if !matches!(model.kind, ModelKind::Crtbp | ModelKind::ErtbpPulsating) {
        return Err(Error::InvalidInput(format!("verification runs in the CRTBP or pulsating model, not {:?}", model.kind)));
    }
    let region = spec.region(mu)?;
    let epochs: Vec<f64> = if model.kind == ModelKind::Crtbp { vec![0.0] } else { settings.epochs.clone() };
    let mut tangents = Vec::new();
    for &nu0 in &epochs {
        for &c in &settings.energies {
            for face in [Face::Left, Face::Right] {
                tangents.extend(tangent_grid(spec, face, settings.grid, c, nu0, mu)?);
            }
        }
    }
    let records: Vec<NodeRecord> = tangents
        .par_iter()
        .map(|t| check_tangent(model, &region, t, settings.budget, settings.integrator))
        .collect::<Result<_>>()?;
    let mut left = FaceTally::default();
    let mut right = FaceTally::default();
    let mut c_range = [f64::INFINITY, f64::NEG_INFINITY];
    for r in &records {
        let tally = if r.tangent.boundary == Face::Left { &mut left } else { &mut right };
        tally.tested += 1;
        tally.passed += r.pass as usize;
        if r.forward.classification == Classification::Remains || r.backward.classification == Classification::Remains
        {
            tally.inconclusive += 1;
        }
        for c in [r.forward.exit_c, r.backward.exit_c].into_iter().flatten() {
            c_range[0] = c_range[0].min(c);
            c_range[1] = c_range[1].max(c);
        }
    }
    let pass = !records.is_empty() && records.iter().all(|r| r.pass);
    Ok(VerificationReport {
        model: model.kind,
        spec: *spec,
        settings: VerifySettings { epochs, ..settings.clone() },
        left,
        right,
        exit_c_range: c_range,
        pass,
        records,
    })
}

/// Rectangle `[x0, x1] x [y0, y1]` in the plane z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Window {
    /// Neighborhood of L2.
    pub fn l2() -> Self {
        Self { x: [0.6, 1.4], y: [-0.4, 0.4] }
    }
}

/// Zero-velocity curves `2 Phi(x, y, 0) = c` inside `window`, traced by
/// marching squares on a `resolution x resolution` lattice with every vertex
/// refined onto the curve by Brent's method along its lattice edge.
pub fn hill_boundary_curve(c: f64, mu: f64, resolution: usize, window: Window) -> Result<Vec<Vec<[f64; 2]>>> {
    let n = resolution.max(2);
    let f = |x: f64, y: f64| -> f64 {
        match pseudo_potential(&[x, y, 0.0], mu) {
            Ok(phi) => 2.0 * phi - c,
            // inside a primary: deep in the allowed region
            Err(_) => f64::MAX,
        }
    };
    let xs: Vec<f64> = (0..=n).map(|i| window.x[0] + (window.x[1] - window.x[0]) * i as f64 / n as f64).collect();
    let ys: Vec<f64> = (0..=n).map(|j| window.y[0] + (window.y[1] - window.y[0]) * j as f64 / n as f64).collect();
    let vals: Vec<Vec<f64>> = xs.iter().map(|&x| ys.iter().map(|&y| f(x, y)).collect()).collect();

    // lattice edge key: (i, j, horizontal?)
    type Key = (usize, usize, bool);
    let mut points: HashMap<Key, [f64; 2]> = HashMap::new();
    let mut crossing = |i: usize, j: usize, horiz: bool| -> Result<Option<[f64; 2]>> {
        let key = (i, j, horiz);
        if let Some(p) = points.get(&key) {
            return Ok(Some(*p));
        }
        let (i2, j2) = if horiz { (i + 1, j) } else { (i, j + 1) };
        let (fa, fb) = (vals[i][j], vals[i2][j2]);
        if (fa >= 0.0) == (fb >= 0.0) || fa == f64::MAX || fb == f64::MAX {
            return Ok(None);
        }
        let p = if horiz {
            let y = ys[j];
            let x = brent(|x| f(x, y), xs[i], xs[i2], fa, fb, 1e-15, 200)?;
            [x, y]
        } else {
            let x = xs[i];
            let y = brent(|y| f(x, y), ys[j], ys[j2], fa, fb, 1e-15, 200)?;
            [x, y]
        };
        points.insert(key, p);
        Ok(Some(p))
    };

    // segments between edge keys, one or two per cell
    let mut adjacency: HashMap<Key, Vec<Key>> = HashMap::new();
    for i in 0..n {
        for j in 0..n {
            let edges = [(i, j, true), (i + 1, j, false), (i, j + 1, true), (i, j, false)];
            let mut hits = Vec::new();
            for &(a, b, h) in &edges {
                if crossing(a, b, h)?.is_some() {
                    hits.push((a, b, h));
                }
            }
            let pairs: Vec<(Key, Key)> = match hits.len() {
                2 => vec![(hits[0], hits[1])],
                4 => {
                    // saddle cell: disambiguate with the center value
                    let center = f(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
                    if (center >= 0.0) == (vals[i][j] >= 0.0) {
                        vec![(hits[0], hits[1]), (hits[2], hits[3])]
                    } else {
                        vec![(hits[0], hits[3]), (hits[1], hits[2])]
                    }
                }
                _ => vec![],
            };
            for (a, b) in pairs {
                adjacency.entry(a).or_default().push(b);
                adjacency.entry(b).or_default().push(a);
            }
        }
    }

    // chain segments into polylines, open ends first
    let mut keys: Vec<Key> = adjacency.keys().copied().collect();
    keys.sort_by_key(|k| (adjacency[k].len(), *k));
    let mut used: HashMap<Key, bool> = HashMap::new();
    let mut curves = Vec::new();
    for start in keys {
        if used.contains_key(&start) {
            continue;
        }
        let mut line = vec![points[&start]];
        used.insert(start, true);
        let mut cur = start;
        while let Some(&next) = adjacency[&cur].iter().find(|k| !used.contains_key(k)) {
            used.insert(next, true);
            line.push(points[&next]);
            cur = next;
        }
        if adjacency[&cur].contains(&start) && line.len() > 2 {
            line.push(points[&start]);
        }
        curves.push(line);
    }
    if curves.is_empty() {
        return Err(Error::InvalidInput(format!("no zero-velocity curve for C = {c} in the window")));
    }
    Ok(curves)
}
