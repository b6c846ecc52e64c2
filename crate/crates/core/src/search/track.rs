//! Orbit tracking: propagate to the next section crossing, then rotate the
//! velocity by the smallest angle that puts it back on the boundary between
//! left and right exits.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sphere::rotate_towards;
use super::{bisect_param, ExitProbe, ProbeOutcome};
use crate::error::{Error, Result};
use crate::integrate::events::{Classification, TimeDirection, START_TOL};
use crate::integrate::{integrate_until_event, Direction, Event, EventOptions, Outcome};
use crate::neighborhood::speed_from_jacobi;
use crate::state::PhaseState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    /// `y = 0`, planar tracking.
    PlaneY,
    /// `z = 0`, spatial tracking.
    PlaneZ,
}

impl SectionKind {
    pub fn coord(self) -> usize {
        match self {
            SectionKind::PlaneY => 1,
            SectionKind::PlaneZ => 2,
        }
    }

    pub fn family(self) -> Family {
        match self {
            SectionKind::PlaneY => Family::InPlane,
            SectionKind::PlaneZ => Family::GreatCircle,
        }
    }
}

/// Speed of the corrected velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedRule {
    /// Reset from the Jacobi constant at the crossing position.
    Jacobi(f64),
    /// Keep the speed the trajectory crosses the section with.
    KeepCrossing,
}

/// One-parameter family the correction searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// In-plane velocity angle.
    InPlane,
    /// Great circle toward the nearest point of the local exit boundary.
    GreatCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionPolicy {
    pub speed: SpeedRule,
    pub family: Family,
    /// Bisection tolerance on the correction angle, in radians.
    pub angle_tol: f64,
    /// First trial angle of the outward search; doubled until the exit flips.
    pub initial_step: f64,
    /// Directions on the local ring used by the great-circle family.
    pub ring: usize,
}

impl CorrectionPolicy {
    pub fn crtbp(c: f64, section: SectionKind) -> Self {
        Self { speed: SpeedRule::Jacobi(c), family: section.family(), angle_tol: 1e-12, initial_step: 1e-10, ring: 64 }
    }

    pub fn ertbp(section: SectionKind) -> Self {
        Self { speed: SpeedRule::KeepCrossing, ..Self::crtbp(0.0, section) }
    }

    fn validate(&self) -> Result<()> {
        if !(self.angle_tol > 0.0 && self.initial_step > 0.0) {
            return Err(Error::InvalidInput("correction tolerances must be positive".into()));
        }
        if self.family == Family::GreatCircle && (self.ring < 8 || self.ring % 8 != 0) {
            return Err(Error::InvalidInput(format!("ring size {} must be a positive multiple of 8", self.ring)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub index: usize,
    pub s: f64,
    pub pos: [f64; 3],
    pub vel_in: [f64; 3],
    pub vel_out: [f64; 3],
    pub dv: [f64; 3],
    pub dv_mag: f64,
    /// Sign of the section coordinate's rate.
    pub sign: f64,
    /// Jacobi function of the corrected state.
    pub c: f64,
}

impl CrossingRecord {
    pub fn state_out(&self) -> [f64; 6] {
        [self.pos[0], self.pos[1], self.pos[2], self.vel_out[0], self.vel_out[1], self.vel_out[2]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum RunStatus {
    Completed,
    /// No left/right flip was found around the crossing velocity.
    BracketLost { crossing: usize },
    /// The trajectory left the neighborhood before the next crossing.
    Escaped { crossing: usize, classification: Classification, s: f64 },
    NoCrossing { crossing: usize },
    Collision { crossing: usize, s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingRun {
    pub model: crate::models::ModelKind,
    pub section: SectionKind,
    pub policy: CorrectionPolicy,
    pub initial: [f64; 6],
    pub nu0: f64,
    pub crossings: Vec<CrossingRecord>,
    pub total_dv: f64,
    pub total_dv_mps: f64,
    /// Range of the Jacobi function over the exits of every classified trajectory.
    pub exit_c_range: Option<[f64; 2]>,
    pub classifications: usize,
    pub status: RunStatus,
}

impl TrackingRun {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Largest position jump between consecutive arcs; corrections touch velocity only.
    pub fn max_position_jump(&self) -> f64 {
        self.crossings
            .iter()
            .map(|c| {
                let out = c.state_out();
                (0..3).map(|i| (out[i] - c.pos[i]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

struct Tracker<'a> {
    probe: &'a ExitProbe,
    policy: CorrectionPolicy,
    classifications: usize,
    c_range: Option<[f64; 2]>,
    prev_sign: f64,
}

enum Correction {
    Found([f64; 3]),
    Lost,
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl Tracker<'_> {
    fn note(&mut self, out: &ProbeOutcome) {
        self.classifications += 1;
        if let Some(c) = out.exit_c {
            let r = self.c_range.get_or_insert([c, c]);
            r[0] = r[0].min(c);
            r[1] = r[1].max(c);
        }
    }

    fn classify(&mut self, s: f64, pos: &[f64; 3], vel: [f64; 3]) -> Result<ProbeOutcome> {
        let out = self.probe.classify(s, [pos[0], pos[1], pos[2], vel[0], vel[1], vel[2]], TimeDirection::Forward)?;
        self.note(&out);
        Ok(out)
    }

    fn speed(&self, pos: &[f64; 3], vel: &[f64; 3]) -> Result<f64> {
        match self.policy.speed {
            SpeedRule::Jacobi(c) => speed_from_jacobi(pos, c, self.probe.mu()),
            SpeedRule::KeepCrossing => Ok(norm(vel)),
        }
    }

    fn correct(&mut self, s: f64, pos: &[f64; 3], vel: &[f64; 3]) -> Result<Correction> {
        match self.policy.family {
            Family::InPlane => self.correct_in_plane(s, pos, vel),
            Family::GreatCircle => self.correct_great_circle(s, pos, vel),
        }
    }

    fn correct_in_plane(&mut self, s: f64, pos: &[f64; 3], vel: &[f64; 3]) -> Result<Correction> {
        let speed = self.speed(pos, vel)?;
        let vz = vel[2];
        let planar = (speed * speed - vz * vz).max(0.0).sqrt();
        let at = |a: f64| [planar * a.cos(), planar * a.sin(), vz];
        let a0 = vel[1].atan2(vel[0]);
        let c0 = self.classify(s, pos, at(a0))?;
        if c0.classification == Classification::Remains {
            return Ok(Correction::Found(at(a0)));
        }
        let tol = self.policy.angle_tol;
        let mut prev_rho = 0.0;
        let mut rho = self.policy.initial_step;
        while rho <= PI {
            for sign in [self.prev_sign, -self.prev_sign] {
                let out = self.classify(s, pos, at(a0 + sign * rho))?;
                if out.classification == c0.classification {
                    continue;
                }
                self.prev_sign = sign;
                if out.classification == Classification::Remains {
                    return Ok(Correction::Found(at(a0 + sign * rho)));
                }
                let (a, _) = bisect_param(a0 + sign * prev_rho, a0 + sign * rho, c0.classification, tol, |a| {
                    self.classify(s, pos, at(a))
                })?;
                return Ok(Correction::Found(at(a)));
            }
            prev_rho = rho;
            rho *= 2.0;
        }
        Ok(Correction::Lost)
    }

    fn ring_classes(&mut self, s: f64, pos: &[f64; 3], dirs: &[[f64; 3]], speed: f64) -> Result<Vec<ProbeOutcome>> {
        let probe = self.probe;
        let outs: Vec<ProbeOutcome> = dirs
            .par_iter()
            .map(|d| {
                probe.classify(
                    s,
                    [pos[0], pos[1], pos[2], speed * d[0], speed * d[1], speed * d[2]],
                    TimeDirection::Forward,
                )
            })
            .collect::<Result<_>>()?;
        for o in &outs {
            self.note(o);
        }
        Ok(outs)
    }

    fn correct_great_circle(&mut self, s: f64, pos: &[f64; 3], vel: &[f64; 3]) -> Result<Correction> {
        let speed = self.speed(pos, vel)?;
        let n0 = norm(vel);
        let d0 = [vel[0] / n0, vel[1] / n0, vel[2] / n0];
        let c0 = self.classify(s, pos, [speed * d0[0], speed * d0[1], speed * d0[2]])?.classification;
        if c0 == Classification::Remains {
            return Ok(Correction::Found([speed * d0[0], speed * d0[1], speed * d0[2]]));
        }
        // tangent basis at d0
        let helper = if d0[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let e1 = {
            let c = [helper[1] * d0[2] - helper[2] * d0[1], helper[2] * d0[0] - helper[0] * d0[2], helper[0] * d0[1] - helper[1] * d0[0]];
            let n = norm(&c);
            [c[0] / n, c[1] / n, c[2] / n]
        };
        let e2 = [d0[1] * e1[2] - d0[2] * e1[1], d0[2] * e1[0] - d0[0] * e1[2], d0[0] * e1[1] - d0[1] * e1[0]];
        let tangent = |beta: f64| {
            let (sb, cb) = beta.sin_cos();
            [cb * e1[0] + sb * e2[0], cb * e1[1] + sb * e2[1], cb * e1[2] + sb * e2[2]]
        };
        let ring = self.policy.ring;
        let coarse = 8;
        let dir_at = |rho: f64, beta: f64| rotate_towards(&d0, &tangent(beta), rho);
        let vel_of = |d: [f64; 3]| [speed * d[0], speed * d[1], speed * d[2]];

        let mut rho = self.policy.initial_step;
        let mut found = None;
        while rho <= PI {
            let dirs: Vec<[f64; 3]> =
                (0..coarse).map(|k| dir_at(rho, std::f64::consts::TAU * k as f64 / coarse as f64)).collect();
            let outs = self.ring_classes(s, pos, &dirs, speed)?;
            if outs.iter().any(|o| o.classification != c0) {
                found = Some(rho);
                break;
            }
            rho *= 2.0;
        }
        let Some(rho) = found else { return Ok(Correction::Lost) };

        // full ring at the first radius where the exit flips
        let step = std::f64::consts::TAU / ring as f64;
        let dirs: Vec<[f64; 3]> = (0..ring).map(|k| dir_at(rho, k as f64 * step)).collect();
        let outs = self.ring_classes(s, pos, &dirs, speed)?;
        let same: Vec<bool> = outs.iter().map(|o| o.classification == c0).collect();
        // boundary points on the ring, in tangent-plane coordinates
        let mut crossings: Vec<(usize, [f64; 2])> = Vec::new();
        for k in 0..ring {
            let k1 = (k + 1) % ring;
            if same[k] == same[k1] {
                continue;
            }
            let (b_same, b_other) = if same[k] { (k as f64 * step, (k + 1) as f64 * step) } else { ((k + 1) as f64 * step, k as f64 * step) };
            let (beta, _) = bisect_param(b_same, b_other, c0, step * 1e-3, |b| self.classify(s, pos, vel_of(dir_at(rho, b))))?;
            crossings.push((k, [rho * beta.cos(), rho * beta.sin()]));
        }
        // nearest foot of the chords spanning each arc of the other class
        let mut best: Option<[f64; 2]> = None;
        let m = crossings.len();
        for i in 0..m {
            let k = crossings[i].0;
            // the chord starting here spans an other-class arc if the ring turns other after k
            if same[(k + 1) % ring] {
                continue;
            }
            let (p, q) = (crossings[i].1, crossings[(i + 1) % m].1);
            let dx = [q[0] - p[0], q[1] - p[1]];
            let len2 = dx[0] * dx[0] + dx[1] * dx[1];
            let t = if len2 > 0.0 { (-(p[0] * dx[0] + p[1] * dx[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let f = [p[0] + t * dx[0], p[1] + t * dx[1]];
            if best.is_none_or(|b| f[0].hypot(f[1]) < b[0].hypot(b[1])) {
                best = Some(f);
            }
        }
        let tol = self.policy.angle_tol;
        if let Some(f) = best {
            let dist = f[0].hypot(f[1]);
            let beta = f[1].atan2(f[0]);
            let t_hi = (2.0 * dist).min(PI);
            if dist > 0.0 {
                let out = self.classify(s, pos, vel_of(dir_at(t_hi, beta)))?;
                if out.classification != c0 {
                    let (t, _) = bisect_param(0.0, t_hi, c0, tol, |t| self.classify(s, pos, vel_of(dir_at(t, beta))))?;
                    return Ok(Correction::Found(vel_of(dir_at(t, beta))));
                }
            }
        }
        // fallback: straight to the nearest other-class ring direction
        let target = best.map_or(0.0, |f| f[1].atan2(f[0]));
        let k = (0..ring)
            .filter(|&k| !same[k])
            .min_by(|&a, &b| {
                let da = ((a as f64 * step - target + PI).rem_euclid(std::f64::consts::TAU) - PI).abs();
                let db = ((b as f64 * step - target + PI).rem_euclid(std::f64::consts::TAU) - PI).abs();
                da.total_cmp(&db)
            })
            .expect("ring has an other-class direction");
        let beta = k as f64 * step;
        let (t, _) = bisect_param(0.0, rho, c0, tol, |t| self.classify(s, pos, vel_of(dir_at(t, beta))))?;
        Ok(Correction::Found(vel_of(dir_at(t, beta))))
    }
}

/// Tracks the orbit through `initial` for `n_crossings` section crossings,
/// correcting the velocity at each crossing. Failures during the run end it
/// with a status and the crossings recorded so far.
pub fn track_orbit(
    probe: &ExitProbe,
    initial: &PhaseState,
    section: SectionKind,
    n_crossings: usize,
    policy: CorrectionPolicy,
) -> Result<TrackingRun> {
    policy.validate()?;
    initial.expect_frame(probe.frame())?;
    let y0 = initial.to_array();
    probe.check_interior(&[y0[0], y0[1], y0[2]])?;
    let coord = section.coord();
    let mut tracker = Tracker { probe, policy, classifications: 0, c_range: None, prev_sign: 1.0 };
    let mut crossings = Vec::with_capacity(n_crossings);
    let mut total_dv = 0.0;
    let (mut s, mut y) = (initial.s, y0);
    let mut status = RunStatus::Completed;

    let section_g = move |_s: f64, y: &[f64; 6]| y[coord];
    let faces: Vec<_> = probe.region.events.iter().map(|e| move |_s: f64, y: &[f64; 6]| e.margin(y)).collect();
    let mut events = vec![Event { g: &section_g, direction: Direction::Either, start_tol: 0.0, skip_start: true }];
    for g in &faces {
        events.push(Event { g, direction: Direction::Falling, start_tol: START_TOL, skip_start: false });
    }

    for index in 0..n_crossings {
        let next = integrate_until_event(&probe.model, s, y, s + probe.budget, probe.integrator, &events, EventOptions::default());
        let hit = match next {
            Ok((Outcome::Event(hit), _)) => hit,
            Ok((Outcome::Reached { .. }, _)) => {
                status = RunStatus::NoCrossing { crossing: index };
                break;
            }
            Err(Error::Collision { s, .. }) => {
                status = RunStatus::Collision { crossing: index, s };
                break;
            }
            Err(e) => return Err(e),
        };
        if hit.index > 0 {
            let face = probe.region.events[hit.index - 1].face;
            status = RunStatus::Escaped { crossing: index, classification: Classification::from_face(face), s: hit.s };
            break;
        }
        let pos = [hit.y[0], hit.y[1], hit.y[2]];
        let vel_in = [hit.y[3], hit.y[4], hit.y[5]];
        let mut dy = [0.0; 6];
        crate::integrate::OdeSystem::rhs(&probe.model, hit.s, &hit.y, &mut dy)?;
        let vel_out = match tracker.correct(hit.s, &pos, &vel_in) {
            Ok(Correction::Found(v)) => v,
            Ok(Correction::Lost) => {
                status = RunStatus::BracketLost { crossing: index };
                break;
            }
            Err(Error::Collision { s, .. }) => {
                status = RunStatus::Collision { crossing: index, s };
                break;
            }
            Err(e) => return Err(e),
        };
        let dv = [vel_out[0] - vel_in[0], vel_out[1] - vel_in[1], vel_out[2] - vel_in[2]];
        let dv_mag = norm(&dv);
        total_dv += dv_mag;
        y = [pos[0], pos[1], pos[2], vel_out[0], vel_out[1], vel_out[2]];
        s = hit.s;
        crossings.push(CrossingRecord {
            index,
            s,
            pos,
            vel_in,
            vel_out,
            dv,
            dv_mag,
            sign: dy[coord].signum(),
            c: crate::models::jacobi_of(&y, probe.mu())?,
        });
    }
    Ok(TrackingRun {
        model: probe.model.kind,
        section,
        policy,
        initial: y0,
        nu0: initial.s,
        total_dv_mps: total_dv * probe.model.params.vel_unit_mps,
        total_dv,
        crossings,
        exit_c_range: tracker.c_range,
        classifications: tracker.classifications,
        status,
    })
}
