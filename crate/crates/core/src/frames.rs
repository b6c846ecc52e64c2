//! Transformations between the inertial, uniformly rotating, non-uniformly
//! rotating and pulsating coordinate systems.
//!
//! Chain used throughout:
//!
//! ```text
//! Pulsating (nu, u, u')
//!   X = r u,  X' = r u' + r' u
//! VariableRotating (nu, X, X')      <->  VariableRotatingTime (t, X, dX/dt = nu_dot X')
//!   Xc = R(nu - omega t) X
//! ConstantRotating (t, Xc, dXc/dt)
//!   Q = R(omega t) Xc
//! Inertial (t, Q, dQ/dt)
//! ```

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kepler::{self, SystemParams};
use crate::state::{Frame, PhaseState};

/// Rotation about +z by `angle`.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `S v = e_z x v`, the generator of [`rot_z`]: `d/dθ R(θ) = R(θ) S`.
#[inline]
pub fn cross_z(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-v.y, v.x, 0.0)
}

/// Geometry of the primaries at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationContext {
    pub nu: f64,
    pub t: f64,
    /// Separation of the primaries.
    pub r: f64,
    /// `dr/dnu = -r phi`.
    pub r_prime: f64,
    /// `dnu/dt`.
    pub nu_dot: f64,
    /// Rate of the uniformly rotating frame.
    pub omega: f64,
}

impl RotationContext {
    pub fn from_nu(nu: f64, p: &SystemParams) -> Self {
        Self {
            nu,
            t: kepler::nu_to_time(nu, p),
            r: kepler::radius(nu, p),
            r_prime: kepler::radius_prime(nu, p),
            nu_dot: kepler::nu_rate(nu, p),
            omega: p.omega,
        }
    }

    pub fn from_time(t: f64, p: &SystemParams) -> Result<Self> {
        let nu = kepler::time_to_nu(t, p)?;
        Ok(Self { t, ..Self::from_nu(nu, p) })
    }

    /// Angle of the primaries' axis in the uniformly rotating frame.
    pub fn delta(&self) -> f64 {
        self.nu - self.omega * self.t
    }
}

fn expect(state: &PhaseState, frame: Frame) -> Result<()> {
    state.expect_frame(frame)
}

pub fn constant_rotating_to_inertial(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    expect(state, Frame::ConstantRotating)?;
    let r = rot_z(p.omega * state.s);
    let pos = r * state.pos;
    let vel = r * (p.omega * cross_z(&state.pos) + state.vel);
    Ok(PhaseState::new(state.s, pos, vel, Frame::Inertial))
}

pub fn inertial_to_constant_rotating(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    expect(state, Frame::Inertial)?;
    let rt = rot_z(p.omega * state.s).transpose();
    let pos = rt * state.pos;
    let vel = rt * state.vel - p.omega * cross_z(&pos);
    Ok(PhaseState::new(state.s, pos, vel, Frame::ConstantRotating))
}

/// Maps a true-anomaly state to the uniformly rotating frame at `t(nu)`.
pub fn variable_to_constant_rotating(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    expect(state, Frame::VariableRotating)?;
    let ctx = RotationContext::from_nu(state.s, p);
    let r = rot_z(ctx.delta());
    let pos = r * state.pos;
    let vel = r * ((ctx.nu_dot - ctx.omega) * cross_z(&state.pos) + ctx.nu_dot * state.vel);
    Ok(PhaseState::new(ctx.t, pos, vel, Frame::ConstantRotating))
}

pub fn constant_to_variable_rotating(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    expect(state, Frame::ConstantRotating)?;
    let ctx = RotationContext::from_time(state.s, p)?;
    let rt = rot_z(ctx.delta()).transpose();
    let pos = rt * state.pos;
    let vel = (rt * state.vel - (ctx.nu_dot - ctx.omega) * cross_z(&pos)) / ctx.nu_dot;
    Ok(PhaseState::new(ctx.nu, pos, vel, Frame::VariableRotating))
}

pub fn pulsating_to_variable_rotating(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    expect(state, Frame::Pulsating)?;
    let r = kepler::radius(state.s, p);
    let r_prime = kepler::radius_prime(state.s, p);
    let pos = r * state.pos;
    let vel = r * state.vel + r_prime * state.pos;
    Ok(PhaseState::new(state.s, pos, vel, Frame::VariableRotating))
}

pub fn variable_rotating_to_pulsating(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    expect(state, Frame::VariableRotating)?;
    let r = kepler::radius(state.s, p);
    let r_prime = kepler::radius_prime(state.s, p);
    let pos = state.pos / r;
    let vel = (state.vel - r_prime * pos) / r;
    Ok(PhaseState::new(state.s, pos, vel, Frame::Pulsating))
}

/// Reparameterizes a rotating state by time: `dX/dt = nu_dot X'`.
pub fn variable_nu_to_time(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    expect(state, Frame::VariableRotating)?;
    let ctx = RotationContext::from_nu(state.s, p);
    Ok(PhaseState::new(ctx.t, state.pos, ctx.nu_dot * state.vel, Frame::VariableRotatingTime))
}

pub fn variable_time_to_nu(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    expect(state, Frame::VariableRotatingTime)?;
    let ctx = RotationContext::from_time(state.s, p)?;
    Ok(PhaseState::new(ctx.nu, state.pos, state.vel / ctx.nu_dot, Frame::VariableRotating))
}

/// Pulsating state seen in the uniformly rotating frame.
pub fn pulsating_to_crtbp_view(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    variable_to_constant_rotating(&pulsating_to_variable_rotating(state, p)?, p)
}

pub fn crtbp_view_to_pulsating(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    variable_rotating_to_pulsating(&constant_to_variable_rotating(state, p)?, p)
}

fn to_hub(state: &PhaseState, p: &SystemParams) -> Result<PhaseState> {
    match state.frame {
        Frame::ConstantRotating => Ok(*state),
        Frame::Inertial => inertial_to_constant_rotating(state, p),
        Frame::VariableRotating => variable_to_constant_rotating(state, p),
        Frame::VariableRotatingTime => variable_to_constant_rotating(&variable_time_to_nu(state, p)?, p),
        Frame::Pulsating => pulsating_to_crtbp_view(state, p),
    }
}

fn from_hub(state: &PhaseState, target: Frame, p: &SystemParams) -> Result<PhaseState> {
    match target {
        Frame::ConstantRotating => Ok(*state),
        Frame::Inertial => constant_rotating_to_inertial(state, p),
        Frame::VariableRotating => constant_to_variable_rotating(state, p),
        Frame::VariableRotatingTime => variable_nu_to_time(&constant_to_variable_rotating(state, p)?, p),
        Frame::Pulsating => crtbp_view_to_pulsating(state, p),
    }
}

/// Converts a state to any other frame.
pub fn convert(state: &PhaseState, target: Frame, p: &SystemParams) -> Result<PhaseState> {
    if !state.is_finite() {
        return Err(Error::InvalidInput("state has non-finite components".into()));
    }
    if state.frame == target {
        return Ok(*state);
    }
    // direct links avoid a Kepler solve
    match (state.frame, target) {
        (Frame::Pulsating, Frame::VariableRotating) => return pulsating_to_variable_rotating(state, p),
        (Frame::VariableRotating, Frame::Pulsating) => return variable_rotating_to_pulsating(state, p),
        (Frame::VariableRotating, Frame::VariableRotatingTime) => return variable_nu_to_time(state, p),
        (Frame::VariableRotatingTime, Frame::VariableRotating) => return variable_time_to_nu(state, p),
        _ => {}
    }
    from_hub(&to_hub(state, p)?, target, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kepler::EARTH_MOON_MU;

    const ALL: [Frame; 5] = [
        Frame::Inertial,
        Frame::ConstantRotating,
        Frame::VariableRotating,
        Frame::VariableRotatingTime,
        Frame::Pulsating,
    ];

    fn sample(frame: Frame) -> PhaseState {
        PhaseState::new(0.83, Vector3::new(1.12, -0.07, 0.03), Vector3::new(0.01, 0.19, -0.04), frame)
    }

    fn close(a: &PhaseState, b: &PhaseState, tol: f64) -> bool {
        a.frame == b.frame
            && (a.s - b.s).abs() < tol
            && (a.pos - b.pos).amax() < tol
            && (a.vel - b.vel).amax() < tol
    }

    #[test]
    fn identity_at_time_zero() {
        let p = SystemParams::earth_moon();
        let st = PhaseState { s: 0.0, ..sample(Frame::ConstantRotating) };
        let q = constant_rotating_to_inertial(&st, &p).unwrap();
        assert_eq!(q.pos, st.pos);
        // velocity picks up omega x X only
        assert!((q.vel - (st.vel + cross_z(&st.pos))).amax() < 1e-15);
    }

    #[test]
    fn rotation_preserves_norm_and_z() {
        let p = SystemParams::earth_moon();
        let st = sample(Frame::ConstantRotating);
        let q = constant_rotating_to_inertial(&st, &p).unwrap();
        assert!((q.pos.norm() - st.pos.norm()).abs() < 1e-15);
        assert_eq!(q.pos.z, st.pos.z);
        assert_eq!(q.vel.z, st.vel.z);
    }

    #[test]
    fn circular_problem_transforms_are_identities() {
        let p = SystemParams::circular(EARTH_MOON_MU).unwrap();
        let st = sample(Frame::Pulsating);
        let v = pulsating_to_variable_rotating(&st, &p).unwrap();
        assert!(close(&v, &PhaseState { frame: Frame::VariableRotating, ..st }, 1e-15));
        let c = pulsating_to_crtbp_view(&st, &p).unwrap();
        assert!(close(&c, &PhaseState { frame: Frame::ConstantRotating, ..st }, 1e-15));
    }

    #[test]
    fn periapse_scaling() {
        let p = SystemParams::earth_moon();
        let st = PhaseState { s: 0.0, ..sample(Frame::Pulsating) };
        let v = pulsating_to_variable_rotating(&st, &p).unwrap();
        assert!((v.pos - st.pos).amax() < 1e-15);
        // r'(0) = 0 as well
        assert!((v.vel - st.vel).amax() < 1e-15);
        let st = PhaseState { s: 1.0, ..st };
        let v = pulsating_to_variable_rotating(&st, &p).unwrap();
        let r = kepler::radius(1.0, &p);
        let rp = kepler::radius_prime(1.0, &p);
        assert!((v.vel - (r * st.vel + rp * st.pos)).amax() < 1e-15);
    }

    #[test]
    fn primaries_map_onto_moving_axis() {
        let p = SystemParams::earth_moon();
        let mu = p.mu;
        for k in 0..6 {
            let nu = k as f64;
            let r = kepler::radius(nu, &p);
            let st = PhaseState::new(nu, Vector3::new(1.0 - mu, 0.0, 0.0), Vector3::zeros(), Frame::Pulsating);
            let v = pulsating_to_variable_rotating(&st, &p).unwrap();
            assert!((v.pos - Vector3::new((1.0 - mu) * r, 0.0, 0.0)).amax() < 1e-15);
        }
    }

    #[test]
    fn all_round_trips() {
        let p = SystemParams::earth_moon();
        for from in ALL {
            for to in ALL {
                let st = sample(from);
                let there = convert(&st, to, &p).unwrap();
                assert_eq!(there.frame, to);
                let back = convert(&there, from, &p).unwrap();
                assert!(close(&back, &st, 1e-12), "{from} -> {to}: {back:?} vs {st:?}");
            }
        }
    }

    #[test]
    fn composition_matches_steps() {
        let p = SystemParams::earth_moon();
        let st = sample(Frame::Pulsating);
        let a = pulsating_to_crtbp_view(&st, &p).unwrap();
        let b = convert(&convert(&st, Frame::VariableRotating, &p).unwrap(), Frame::ConstantRotating, &p).unwrap();
        assert!(close(&a, &b, 1e-13));
    }

    #[test]
    fn frame_mismatch_is_an_error() {
        let p = SystemParams::earth_moon();
        assert!(matches!(
            constant_rotating_to_inertial(&sample(Frame::Pulsating), &p),
            Err(Error::FrameMismatch { .. })
        ));
    }
}
