//! Equations of motion for the circular and elliptic restricted three-body
//! problems in every coordinate system used here, and the Jacobi integral.
//!
//! State vectors are `[x, y, z, vx, vy, vz]`. In every model the primary of
//! mass `1 - mu` sits on the negative x side and the secondary of mass `mu` on
//! the positive side; rotating frames rotate counter-clockwise about +z.

use serde::{Deserialize, Serialize};

use crate::error::{Body, Error, Result};
use crate::integrate::OdeSystem;
use crate::kepler::{self, SystemParams};
use crate::state::{Frame, PhaseState};

/// Distance below which a close approach to a primary is reported as a collision.
pub const COLLISION_RADIUS: f64 = 1e-6;

/// Dynamical model. Each kind has one natural frame for its states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Crtbp,
    ErtbpInertial,
    ErtbpUniformRotating,
    ErtbpNonUniformRotatingNu,
    ErtbpNonUniformRotatingTime,
    ErtbpPulsating,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Crtbp,
        ModelKind::ErtbpInertial,
        ModelKind::ErtbpUniformRotating,
        ModelKind::ErtbpNonUniformRotatingNu,
        ModelKind::ErtbpNonUniformRotatingTime,
        ModelKind::ErtbpPulsating,
    ];

    pub fn frame(self) -> Frame {
        match self {
            ModelKind::Crtbp | ModelKind::ErtbpUniformRotating => Frame::ConstantRotating,
            ModelKind::ErtbpInertial => Frame::Inertial,
            ModelKind::ErtbpNonUniformRotatingNu => Frame::VariableRotating,
            ModelKind::ErtbpNonUniformRotatingTime => Frame::VariableRotatingTime,
            ModelKind::ErtbpPulsating => Frame::Pulsating,
        }
    }

    /// Whether the independent variable is the true anomaly.
    pub fn uses_true_anomaly(self) -> bool {
        self.frame().uses_true_anomaly()
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "crtbp" => ModelKind::Crtbp,
            "ertbp_inertial" | "inertial" => ModelKind::ErtbpInertial,
            "ertbp_uniform_rotating" | "uniform" => ModelKind::ErtbpUniformRotating,
            "ertbp_non_uniform_rotating_nu" | "nonuniform_nu" => ModelKind::ErtbpNonUniformRotatingNu,
            "ertbp_non_uniform_rotating_time" | "nonuniform_time" => ModelKind::ErtbpNonUniformRotatingTime,
            "ertbp_pulsating" | "ertbp" | "pulsating" => ModelKind::ErtbpPulsating,
            other => return Err(Error::InvalidInput(format!("unknown model `{other}`"))),
        })
    }
}

/// A model together with its system constants; implements [`OdeSystem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub params: SystemParams,
}

impl Model {
    pub fn new(kind: ModelKind, params: SystemParams) -> Self {
        Self { kind, params }
    }

    pub fn crtbp(mu: f64) -> Result<Self> {
        Ok(Self { kind: ModelKind::Crtbp, params: SystemParams::circular(mu)? })
    }

    pub fn frame(&self) -> Frame {
        self.kind.frame()
    }

    pub fn derivative(&self, state: &PhaseState) -> Result<[f64; 6]> {
        state.expect_frame(self.frame())?;
        let mut dy = [0.0; 6];
        self.rhs(state.s, &state.to_array(), &mut dy)?;
        Ok(dy)
    }
}

impl OdeSystem<6> for Model {
    fn rhs(&self, s: f64, y: &[f64; 6], dy: &mut [f64; 6]) -> Result<()> {
        let p = &self.params;
        match self.kind {
            ModelKind::Crtbp => crtbp_rhs(s, y, p.mu, dy),
            ModelKind::ErtbpInertial => ertbp_inertial_rhs(s, y, p, dy),
            ModelKind::ErtbpUniformRotating => ertbp_uniform_rhs(s, y, p, dy),
            ModelKind::ErtbpNonUniformRotatingNu => ertbp_nonuniform_nu_rhs(s, y, p, dy),
            ModelKind::ErtbpNonUniformRotatingTime => ertbp_nonuniform_time_rhs(s, y, p, dy),
            ModelKind::ErtbpPulsating => ertbp_pulsating_rhs(s, y, p, dy),
        }
    }
}

#[inline]
fn guard(d: f64, body: Body, s: f64) -> Result<()> {
    if d < COLLISION_RADIUS {
        Err(Error::Collision { body, distance: d, s })
    } else {
        Ok(())
    }
}

/// Distances to primaries placed at `(x1, 0, 0)` and `(x2, 0, 0)`.
#[inline]
fn distances(y: &[f64; 6], mu: f64, x1: f64, x2: f64, s: f64) -> Result<(f64, f64)> {
    let yz = y[1] * y[1] + y[2] * y[2];
    let r1 = ((y[0] - x1).powi(2) + yz).sqrt();
    let r2 = ((y[0] - x2).powi(2) + yz).sqrt();
    guard(r1, Body::Primary, s)?;
    // a massless secondary exerts no force and cannot be hit
    if mu > 0.0 {
        guard(r2, Body::Secondary, s)?;
    }
    Ok((r1, r2))
}

/// Gravitational acceleration `sum m_j (X_j - X) / |X_j - X|^3` for unit total
/// `G m`, primaries on the x-axis at `x1` (mass `1 - mu`) and `x2` (mass `mu`).
#[inline]
fn gravity_on_axis(y: &[f64; 6], mu: f64, x1: f64, x2: f64, s: f64) -> Result<[f64; 3]> {
    let (r1, r2) = distances(y, mu, x1, x2, s)?;
    let k1 = (1.0 - mu) / (r1 * r1 * r1);
    let k2 = if mu > 0.0 { mu / (r2 * r2 * r2) } else { 0.0 };
    Ok([
        k1 * (x1 - y[0]) + k2 * (x2 - y[0]),
        -(k1 + k2) * y[1],
        -(k1 + k2) * y[2],
    ])
}

/// Circular problem in the uniformly rotating frame.
pub fn crtbp_rhs(s: f64, y: &[f64; 6], mu: f64, dy: &mut [f64; 6]) -> Result<()> {
    let g = gravity_on_axis(y, mu, -mu, 1.0 - mu, s)?;
    dy[0] = y[3];
    dy[1] = y[4];
    dy[2] = y[5];
    dy[3] = 2.0 * y[4] + y[0] + g[0];
    dy[4] = -2.0 * y[3] + y[1] + g[1];
    dy[5] = g[2];
    Ok(())
}

/// Elliptic problem in the pulsating frame; the independent variable is the
/// true anomaly and the primaries are fixed at `(-mu, 0, 0)` and `(1 - mu, 0, 0)`.
pub fn ertbp_pulsating_rhs(nu: f64, y: &[f64; 6], p: &SystemParams, dy: &mut [f64; 6]) -> Result<()> {
    let mu = p.mu;
    let g = gravity_on_axis(y, mu, -mu, 1.0 - mu, nu)?;
    let inv_gamma = 1.0 / kepler::gamma(nu, p.e);
    dy[0] = y[3];
    dy[1] = y[4];
    dy[2] = y[5];
    dy[3] = 2.0 * y[4] + (y[0] + g[0]) * inv_gamma;
    dy[4] = -2.0 * y[3] + (y[1] + g[1]) * inv_gamma;
    dy[5] = -y[2] + (y[2] + g[2]) * inv_gamma;
    Ok(())
}

/// Elliptic problem in the frame rotating with the primaries, unscaled, with
/// the true anomaly as independent variable. Primaries at `-mu r(nu)` and
/// `(1 - mu) r(nu)` on the x-axis.
pub fn ertbp_nonuniform_nu_rhs(nu: f64, y: &[f64; 6], p: &SystemParams, dy: &mut [f64; 6]) -> Result<()> {
    let mu = p.mu;
    let r = kepler::radius(nu, p);
    let gam = kepler::gamma(nu, p.e);
    let phi = kepler::phi(nu, p.e);
    let g = gravity_on_axis(y, mu, -mu * r, (1.0 - mu) * r, nu)?;
    // K / nu_dot^2 = r^4 / semi_latus = r^3 / gamma
    let scale = p.k * r * r * r * r / (p.sigma * p.sigma);
    debug_assert!((scale - r * r * r / gam).abs() <= 1e-9 * scale.max(1.0));
    dy[0] = y[3];
    dy[1] = y[4];
    dy[2] = y[5];
    dy[3] = 2.0 * y[4] + y[0] - 2.0 * phi * (y[3] - y[1]) + scale * g[0];
    dy[4] = -2.0 * y[3] + y[1] - 2.0 * phi * (y[4] + y[0]) + scale * g[1];
    dy[5] = -2.0 * phi * y[5] + scale * g[2];
    Ok(())
}

/// Instantaneous rotation rate `n = dnu/dt` and its derivative at time `t`,
/// from the eccentric anomaly.
pub fn rotation_rate(t: f64, p: &SystemParams) -> Result<(f64, f64)> {
    let nm = p.mean_motion();
    let ecc = kepler::solve_kepler(nm * t, p.e)?;
    let (se, ce) = ecc.sin_cos();
    let d = 1.0 - p.e * ce;
    let root = (1.0 - p.e * p.e).sqrt();
    let n = nm * root / (d * d);
    let n_dot = -2.0 * p.e * nm * nm * root * se / (d * d * d * d);
    Ok((n, n_dot))
}

/// Elliptic problem in the frame rotating with the primaries, unscaled, with
/// time as independent variable.
pub fn ertbp_nonuniform_time_rhs(t: f64, y: &[f64; 6], p: &SystemParams, dy: &mut [f64; 6]) -> Result<()> {
    let mu = p.mu;
    let (n, n_dot) = rotation_rate(t, p)?;
    let nu = kepler::time_to_nu(t, p)?;
    let r = kepler::radius(nu, p);
    let g = gravity_on_axis(y, mu, -mu * r, (1.0 - mu) * r, t)?;
    dy[0] = y[3];
    dy[1] = y[4];
    dy[2] = y[5];
    dy[3] = 2.0 * n * y[4] + n * n * y[0] + n_dot * y[1] + p.k * g[0];
    dy[4] = -2.0 * n * y[3] + n * n * y[1] - n_dot * y[0] + p.k * g[1];
    dy[5] = p.k * g[2];
    Ok(())
}

/// Angle of the primaries' axis relative to the uniformly rotating frame, and
/// their separation, at time `t`.
pub fn uniform_frame_offset(t: f64, p: &SystemParams) -> Result<(f64, f64)> {
    let nu = kepler::time_to_nu(t, p)?;
    Ok((nu - p.omega * t, kepler::radius(nu, p)))
}

/// Elliptic problem in the frame rotating at the constant mean rate `omega`.
pub fn ertbp_uniform_rhs(t: f64, y: &[f64; 6], p: &SystemParams, dy: &mut [f64; 6]) -> Result<()> {
    let (delta, r) = uniform_frame_offset(t, p)?;
    let (sd, cd) = delta.sin_cos();
    let w = p.omega;
    let acc = point_masses(y, p, [-p.mu * r * cd, -p.mu * r * sd], [(1.0 - p.mu) * r * cd, (1.0 - p.mu) * r * sd], t)?;
    dy[0] = y[3];
    dy[1] = y[4];
    dy[2] = y[5];
    dy[3] = 2.0 * w * y[4] + w * w * y[0] + acc[0];
    dy[4] = -2.0 * w * y[3] + w * w * y[1] + acc[1];
    dy[5] = acc[2];
    Ok(())
}

/// Elliptic problem in inertial barycentric coordinates.
pub fn ertbp_inertial_rhs(t: f64, y: &[f64; 6], p: &SystemParams, dy: &mut [f64; 6]) -> Result<()> {
    let nu = kepler::time_to_nu(t, p)?;
    let r = kepler::radius(nu, p);
    let (sn, cn) = nu.sin_cos();
    let acc = point_masses(y, p, [-p.mu * r * cn, -p.mu * r * sn], [(1.0 - p.mu) * r * cn, (1.0 - p.mu) * r * sn], t)?;
    dy[0] = y[3];
    dy[1] = y[4];
    dy[2] = y[5];
    dy[3] = acc[0];
    dy[4] = acc[1];
    dy[5] = acc[2];
    Ok(())
}

/// Newtonian acceleration toward primaries in the z = 0 plane at `q1`, `q2`.
#[inline]
fn point_masses(y: &[f64; 6], p: &SystemParams, q1: [f64; 2], q2: [f64; 2], s: f64) -> Result<[f64; 3]> {
    let d1 = [q1[0] - y[0], q1[1] - y[1], -y[2]];
    let d2 = [q2[0] - y[0], q2[1] - y[1], -y[2]];
    let r1 = (d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]).sqrt();
    let r2 = (d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]).sqrt();
    guard(r1, Body::Primary, s)?;
    guard(r2, Body::Secondary, s)?;
    let k1 = (1.0 - p.mu) * p.k / (r1 * r1 * r1);
    let k2 = p.mu * p.k / (r2 * r2 * r2);
    Ok([k1 * d1[0] + k2 * d2[0], k1 * d1[1] + k2 * d2[1], k1 * d1[2] + k2 * d2[2]])
}

/// Effective potential `(x^2 + y^2)/2 + (1 - mu)/r1 + mu/r2` of the rotating frame.
pub fn pseudo_potential(pos: &[f64; 3], mu: f64) -> Result<f64> {
    let y = [pos[0], pos[1], pos[2], 0.0, 0.0, 0.0];
    let (r1, r2) = distances(&y, mu, -mu, 1.0 - mu, 0.0)?;
    let secondary = if mu > 0.0 { mu / r2 } else { 0.0 };
    Ok(0.5 * (pos[0] * pos[0] + pos[1] * pos[1]) + (1.0 - mu) / r1 + secondary)
}

/// Gradient of [`pseudo_potential`].
pub fn pseudo_potential_gradient(pos: &[f64; 3], mu: f64) -> Result<[f64; 3]> {
    let y = [pos[0], pos[1], pos[2], 0.0, 0.0, 0.0];
    let g = gravity_on_axis(&y, mu, -mu, 1.0 - mu, 0.0)?;
    Ok([pos[0] + g[0], pos[1] + g[1], g[2]])
}

/// Jacobi integral `2 Phi - |v|^2` of a state array in rotating coordinates.
pub fn jacobi_of(y: &[f64; 6], mu: f64) -> Result<f64> {
    let phi = pseudo_potential(&[y[0], y[1], y[2]], mu)?;
    Ok(2.0 * phi - (y[3] * y[3] + y[4] * y[4] + y[5] * y[5]))
}

/// Jacobi constant of a circular-problem state.
pub fn jacobi_constant(state: &PhaseState, mu: f64) -> Result<f64> {
    state.expect_frame(Frame::ConstantRotating)?;
    jacobi_of(&state.to_array(), mu)
}

/// Jacobi function evaluated on a pulsating-frame state.
///
/// The pulsating frame keeps the primaries at their circular-problem
/// positions, so its coordinates and true-anomaly derivatives are read as a
/// circular-problem state. This is the energy that parameterizes speeds on the
/// boundaries and defines the layer. For `e = 0` it is the Jacobi constant.
pub fn instantaneous_jacobi(state: &PhaseState, mu: f64) -> Result<f64> {
    state.expect_frame(Frame::Pulsating)?;
    jacobi_of(&state.to_array(), mu)
}
