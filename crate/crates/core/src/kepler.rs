//! Two-body machinery: Kepler's equation, anomaly/time conversions and the
//! elliptic reference solution that drives the primaries in every elliptic
//! model.
//!
//! Time is measured from periapse in units where the mean motion of the
//! primaries is `sqrt(K / a^3)`. The stock constructors pick `K = a^3`, so the
//! mean motion is one and an orbit of the primaries takes `2*pi` time units,
//! the same period as in true anomaly.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Earth–Moon mass ratio `m2 / (m1 + m2)`.
pub const EARTH_MOON_MU: f64 = 1.215_058_427_057_154_5e-2;

/// Mean lunar orbital eccentricity, the default for elliptic runs.
pub const LUNAR_ECCENTRICITY: f64 = 0.0549;

/// Earth–Moon velocity unit in m/s (distance unit over time unit).
pub const EARTH_MOON_VEL_UNIT_MPS: f64 = 1024.0;

/// Choice of distance unit for the primaries' ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Normalization {
    /// Periapse distance `a(1 - e)` is one.
    #[default]
    #[serde(rename = "peri")]
    Periapsis,
    /// Semi-major axis `a` is one.
    #[serde(rename = "sma")]
    SemiMajorAxis,
}

/// Constants for one primary–secondary system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    pub mu: f64,
    pub e: f64,
    pub a: f64,
    /// `G m1 + G m2`.
    pub k: f64,
    /// Angular momentum of the relative Kepler orbit, `sqrt(K a (1 - e^2))`.
    pub sigma: f64,
    /// Rotation rate of the uniformly rotating frame, `sqrt(K / a^3)`.
    pub omega: f64,
    pub vel_unit_mps: f64,
    pub normalization: Normalization,
}

impl SystemParams {
    pub fn new(mu: f64, e: f64, normalization: Normalization) -> Result<Self> {
        if !(mu > 0.0 && mu < 0.5) {
            return Err(Error::InvalidParams(format!("mass ratio {mu} outside (0, 0.5)")));
        }
        if !(0.0..1.0).contains(&e) {
            return Err(Error::InvalidParams(format!("eccentricity {e} outside [0, 1)")));
        }
        let a = match normalization {
            Normalization::Periapsis => 1.0 / (1.0 - e),
            Normalization::SemiMajorAxis => 1.0,
        };
        let k = a * a * a;
        Ok(Self {
            mu,
            e,
            a,
            k,
            sigma: (k * a * (1.0 - e * e)).sqrt(),
            omega: (k / (a * a * a)).sqrt(),
            vel_unit_mps: EARTH_MOON_VEL_UNIT_MPS,
            normalization,
        })
    }

    /// Earth–Moon system on the mean lunar ellipse.
    pub fn earth_moon() -> Self {
        Self::new(EARTH_MOON_MU, LUNAR_ECCENTRICITY, Normalization::Periapsis)
            .expect("built-in constants are valid")
    }

    /// Circular problem with the given mass ratio.
    pub fn circular(mu: f64) -> Result<Self> {
        Self::new(mu, 0.0, Normalization::Periapsis)
    }

    pub fn with_eccentricity(self, e: f64) -> Result<Self> {
        Self::new(self.mu, e, self.normalization).map(|p| p.with_vel_unit(self.vel_unit_mps))
    }

    pub fn with_vel_unit(mut self, vel_unit_mps: f64) -> Self {
        self.vel_unit_mps = vel_unit_mps;
        self
    }

    pub fn mean_motion(&self) -> f64 {
        (self.k / (self.a * self.a * self.a)).sqrt()
    }

    /// Semi-latus rectum `a(1 - e^2)`.
    pub fn semi_latus(&self) -> f64 {
        self.a * (1.0 - self.e * self.e)
    }

    pub fn period(&self) -> f64 {
        TAU / self.mean_motion()
    }

    pub fn is_circular(&self) -> bool {
        self.e == 0.0
    }
}

/// Consistent set of anomalies for one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyTriple {
    pub nu: f64,
    pub ecc: f64,
    pub mean: f64,
    pub t: f64,
}

impl AnomalyTriple {
    pub fn from_time(t: f64, params: &SystemParams) -> Result<Self> {
        let mean = params.mean_motion() * t;
        let ecc = solve_kepler(mean, params.e)?;
        Ok(Self { nu: true_from_eccentric(ecc, params.e), ecc, mean, t })
    }

    pub fn from_nu(nu: f64, params: &SystemParams) -> Self {
        let ecc = eccentric_from_true(nu, params.e);
        let mean = ecc - params.e * ecc.sin();
        Self { nu, ecc, mean, t: mean / params.mean_motion() }
    }
}

/// Splits `angle` into a representative in `[-pi, pi)` and a whole number of turns.
fn reduce(angle: f64) -> (f64, f64) {
    let turns = (angle / TAU).round();
    let mut r = angle - turns * TAU;
    let mut turns = turns;
    if r >= PI {
        r -= TAU;
        turns += 1.0;
    } else if r < -PI {
        r += TAU;
        turns -= 1.0;
    }
    (r, turns)
}

/// Solves `M = E - e sin E` for the eccentric anomaly, keeping the branch of `M`.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64> {
    if !mean_anomaly.is_finite() || !(0.0..1.0).contains(&e) {
        return Err(Error::KeplerNonConvergence { mean_anomaly, eccentricity: e });
    }
    let (m, turns) = reduce(mean_anomaly);
    if e == 0.0 {
        return Ok(mean_anomaly);
    }

    let residual = |ea: f64| ea - e * ea.sin() - m;
    let mut ea = if e < 0.8 { m + e * m.sin() } else { PI.copysign(m) };
    let mut converged = false;
    for _ in 0..50 {
        let f = residual(ea);
        let step = f / (1.0 - e * ea.cos());
        ea -= step;
        if step.abs() <= 4.0 * f64::EPSILON * ea.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged || !ea.is_finite() {
        // f is increasing and changes sign on [M - e, M + e]
        let (mut lo, mut hi) = (m - e, m + e);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        ea = 0.5 * (lo + hi);
        if residual(ea).abs() > 1e-12 {
            return Err(Error::KeplerNonConvergence { mean_anomaly, eccentricity: e });
        }
    }
    Ok(ea + turns * TAU)
}

/// Half-angle form, continuous across every branch.
pub fn true_from_eccentric(ecc: f64, e: f64) -> f64 {
    if e == 0.0 {
        return ecc;
    }
    let (r, turns) = reduce(ecc);
    let half = 0.5 * r;
    2.0 * ((1.0 + e).sqrt() * half.sin()).atan2((1.0 - e).sqrt() * half.cos()) + turns * TAU
}

pub fn eccentric_from_true(nu: f64, e: f64) -> f64 {
    if e == 0.0 {
        return nu;
    }
    let (r, turns) = reduce(nu);
    let half = 0.5 * r;
    2.0 * ((1.0 - e).sqrt() * half.sin()).atan2((1.0 + e).sqrt() * half.cos()) + turns * TAU
}

/// True anomaly of the primaries at time `t` after periapse.
pub fn time_to_nu(t: f64, params: &SystemParams) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time {t} is not finite")));
    }
    if params.e == 0.0 {
        return Ok(params.mean_motion() * t);
    }
    let ecc = solve_kepler(params.mean_motion() * t, params.e)?;
    Ok(true_from_eccentric(ecc, params.e))
}

/// Time after periapse at true anomaly `nu`.
pub fn nu_to_time(nu: f64, params: &SystemParams) -> f64 {
    if params.e == 0.0 {
        return nu / params.mean_motion();
    }
    let ecc = eccentric_from_true(nu, params.e);
    (ecc - params.e * ecc.sin()) / params.mean_motion()
}

/// `gamma(nu) = 1 + e cos(nu)`.
#[inline]
pub fn gamma(nu: f64, e: f64) -> f64 {
    1.0 + e * nu.cos()
}

/// `phi = gamma' / gamma`.
#[inline]
pub fn phi(nu: f64, e: f64) -> f64 {
    -e * nu.sin() / gamma(nu, e)
}

/// Separation of the primaries, `a(1 - e^2) / gamma(nu)`.
#[inline]
pub fn radius(nu: f64, params: &SystemParams) -> f64 {
    params.semi_latus() / gamma(nu, params.e)
}

/// `dr/dnu = -r phi`.
#[inline]
pub fn radius_prime(nu: f64, params: &SystemParams) -> f64 {
    -radius(nu, params) * phi(nu, params.e)
}

/// `dnu/dt = sigma / r^2`.
#[inline]
pub fn nu_rate(nu: f64, params: &SystemParams) -> f64 {
    let r = radius(nu, params);
    params.sigma / (r * r)
}

/// Inertial position and velocity of the relative Kepler orbit `Q*` at true
/// anomaly `nu`, starting at periapse on the +x axis and moving toward +y.
pub fn kepler_reference_state(nu: f64, params: &SystemParams) -> (Vector3<f64>, Vector3<f64>) {
    let r = radius(nu, params);
    let nu_dot = nu_rate(nu, params);
    let r_dot = radius_prime(nu, params) * nu_dot;
    let (s, c) = nu.sin_cos();
    let pos = Vector3::new(r * c, r * s, 0.0);
    let vel = Vector3::new(r_dot * c - r * nu_dot * s, r_dot * s + r * nu_dot * c, 0.0);
    (pos, vel)
}
