//! Exit classification of velocity families at a base point and bisection for
//! the directions whose trajectories stay in the neighborhood.

pub mod morphology;
pub mod sphere;
pub mod track;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::events::{propagate_until_exit, Classification, RegionSpec, TimeDirection};
use crate::integrate::IntegratorConfig;
use crate::models::{jacobi_of, Model, ModelKind};
use crate::neighborhood::{speed_from_jacobi, NeighborhoodSpec, DEFAULT_BUDGET};
use crate::state::PhaseState;

pub use morphology::{cluster_spread, fit_closed_curve, section_points, section_spread, CurveFit, MorphologyStats, Projection, CURVE_ORDER};
pub use sphere::{boundary_intersection_states, sphere_exit_sets, IntersectionState, SphereExitMap, SphereGrid};
pub use track::{track_orbit, CorrectionPolicy, CrossingRecord, Family, RunStatus, SectionKind, SpeedRule, TrackingRun};

/// A model together with the region its trajectories are classified against.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitProbe {
    pub model: Model,
    pub region: RegionSpec,
    pub budget: f64,
    pub integrator: IntegratorConfig,
}

/// Exit of one probe trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub classification: Classification,
    pub dwell: f64,
    /// Jacobi function at the exit state, for exits through a face.
    pub exit_c: Option<f64>,
}

impl ExitProbe {
    pub fn new(model: Model, spec: &NeighborhoodSpec) -> Result<Self> {
        if !matches!(model.kind, ModelKind::Crtbp | ModelKind::ErtbpPulsating) {
            return Err(Error::InvalidInput(format!(
                "exit probes run in the CRTBP or pulsating model, not {:?}",
                model.kind
            )));
        }
        Ok(Self { region: spec.region(model.params.mu)?, model, budget: DEFAULT_BUDGET, integrator: IntegratorConfig::default() })
    }

    pub fn with_integrator(mut self, cfg: IntegratorConfig) -> Self {
        self.integrator = cfg;
        self
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    pub fn mu(&self) -> f64 {
        self.model.params.mu
    }

    pub fn frame(&self) -> crate::state::Frame {
        self.model.frame()
    }

    /// Requires `pos` strictly inside the region.
    pub fn check_interior(&self, pos: &[f64; 3]) -> Result<()> {
        let (margin, face) = self.region.min_margin(pos);
        if margin <= 0.0 {
            return Err(Error::StartOutside { face: format!("{face:?}"), margin });
        }
        Ok(())
    }

    pub fn classify(&self, s0: f64, y0: [f64; 6], time: TimeDirection) -> Result<ProbeOutcome> {
        let rec = propagate_until_exit(&self.model, s0, y0, &self.region, self.budget, time, self.integrator)?;
        let exit_c = match rec.classification {
            Classification::Left | Classification::Right => {
                let y: [f64; 6] = rec.exit_state.as_slice().try_into().expect("six components");
                Some(jacobi_of(&y, self.mu())?)
            }
            _ => None,
        };
        Ok(ProbeOutcome { classification: rec.classification, dwell: rec.dwell(s0), exit_c })
    }
}

/// A planar velocity of speed fixed by `c_target` at a base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityCircleProbe {
    pub base_point: [f64; 2],
    pub c_target: f64,
    pub nu0: f64,
    pub angle: f64,
}

/// A spatial velocity of speed fixed by `c_target` at a base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySphereProbe {
    pub base_point: [f64; 3],
    pub c_target: f64,
    pub nu0: f64,
    pub direction: [f64; 3],
}

impl From<VelocityCircleProbe> for VelocitySphereProbe {
    fn from(p: VelocityCircleProbe) -> Self {
        Self {
            base_point: [p.base_point[0], p.base_point[1], 0.0],
            c_target: p.c_target,
            nu0: p.nu0,
            direction: [p.angle.cos(), p.angle.sin(), 0.0],
        }
    }
}

impl VelocitySphereProbe {
    pub fn state(&self, mu: f64) -> Result<[f64; 6]> {
        let d = self.direction;
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("velocity direction has norm {norm}")));
        }
        let s = speed_from_jacobi(&self.base_point, self.c_target, mu)?;
        let p = self.base_point;
        Ok([p[0], p[1], p[2], s * d[0], s * d[1], s * d[2]])
    }
}

/// Exit face of the trajectory launched from a probe.
pub fn classify_velocity(
    probe: &ExitProbe,
    velocity: impl Into<VelocitySphereProbe>,
    time: TimeDirection,
) -> Result<ProbeOutcome> {
    let v = velocity.into();
    probe.check_interior(&v.base_point)?;
    probe.classify(v.nu0, v.state(probe.mu())?, time)
}

/// One iteration of a bisection between left and right exits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub lo: f64,
    pub hi: f64,
    pub mid: f64,
    pub dwell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleBisection {
    pub angle: f64,
    pub bracket_width: f64,
    /// Forward dwell in `N` from the converged angle.
    pub dwell: f64,
    pub left_dwell: f64,
    pub right_dwell: f64,
    pub history: Vec<BisectionStep>,
    pub state: PhaseState,
}

/// Adjacent sample angles on the velocity circle whose forward exits are
/// left and right, as `(angle_left, angle_right)` with `angle_right` within
/// one sample step of `angle_left`.
pub fn find_circle_brackets(
    probe: &ExitProbe,
    base_point: [f64; 2],
    c_target: f64,
    nu0: f64,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    use rayon::prelude::*;
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two circle samples".into()));
    }
    let step = std::f64::consts::TAU / samples as f64;
    let classes: Vec<Classification> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let v = VelocityCircleProbe { base_point, c_target, nu0, angle: k as f64 * step };
            classify_velocity(probe, v, TimeDirection::Forward).map(|o| o.classification)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for k in 0..samples {
        let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
        match (classes[k], classes[(k + 1) % samples]) {
            (Classification::Left, Classification::Right) => out.push((a, b)),
            (Classification::Right, Classification::Left) => out.push((b, a)),
            _ => {}
        }
    }
    Ok(out)
}

/// Bisects the velocity angle between a left-exiting and a right-exiting
/// direction until the bracket is narrower than `tol`.
pub fn bisect_circle_boundary(
    probe: &ExitProbe,
    base_point: [f64; 2],
    c_target: f64,
    nu0: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<CircleBisection> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("angle tolerance {tol} must be positive")));
    }
    let pos = [base_point[0], base_point[1], 0.0];
    probe.check_interior(&pos)?;
    let speed = speed_from_jacobi(&pos, c_target, probe.mu())?;
    let at = |angle: f64| -> Result<ProbeOutcome> {
        let y = [pos[0], pos[1], 0.0, speed * angle.cos(), speed * angle.sin(), 0.0];
        probe.classify(nu0, y, TimeDirection::Forward)
    };
    let left = at(bracket.0)?;
    let right = at(bracket.1)?;
    if left.classification != Classification::Left || right.classification != Classification::Right {
        return Err(Error::InvalidBracket(format!(
            "bracket ends exit {:?} and {:?}, expected Left and Right",
            left.classification, right.classification
        )));
    }
    let (mut lo, mut hi) = bracket;
    let mut history = Vec::new();
    while (hi - lo).abs() >= tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let out = at(mid)?;
        history.push(BisectionStep { lo, hi, mid, dwell: out.dwell });
        match out.classification {
            Classification::Left => lo = mid,
            Classification::Right => hi = mid,
            Classification::Remains => {
                lo = mid;
                hi = mid;
            }
            Classification::OtherFace => {
                return Err(Error::InvalidBracket(format!("angle {mid} exits through an unexpected face")))
            }
        }
    }
    let angle = 0.5 * (lo + hi);
    let dwell = at(angle)?.dwell;
    let y = [pos[0], pos[1], 0.0, speed * angle.cos(), speed * angle.sin(), 0.0];
    Ok(CircleBisection {
        angle,
        bracket_width: (hi - lo).abs(),
        dwell,
        left_dwell: left.dwell,
        right_dwell: right.dwell,
        history,
        state: PhaseState::from_array(nu0, &y, probe.frame()),
    })
}

/// Bisection on a scalar parameter between `same` (classifying as `class0`)
/// and `other` (classifying otherwise). Returns the parameter and the
/// outcome there.
pub(crate) fn bisect_param(
    mut same: f64,
    mut other: f64,
    class0: Classification,
    tol: f64,
    mut at: impl FnMut(f64) -> Result<ProbeOutcome>,
) -> Result<(f64, ProbeOutcome)> {
    while (other - same).abs() >= tol {
        let mid = 0.5 * (same + other);
        if mid == same || mid == other {
            break;
        }
        let out = at(mid)?;
        if out.classification == Classification::Remains {
            return Ok((mid, out));
        }
        if out.classification == class0 {
            same = mid;
        } else {
            other = mid;
        }
    }
    let t = 0.5 * (same + other);
    Ok((t, at(t)?))
}
