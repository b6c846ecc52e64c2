//! Propagating in one model and mapping the result must agree with mapping
//! first and propagating in the other model.

use isonbhd::frames::convert;
use isonbhd::integrate::{integrate, IntegratorConfig};
use isonbhd::kepler::{nu_to_time, SystemParams, EARTH_MOON_MU};
use isonbhd::models::{jacobi_of, Model, ModelKind};
use isonbhd::{Frame, PhaseState};

fn propagate(model: &Model, st: &PhaseState, s1: f64) -> PhaseState {
    assert_eq!(st.frame, model.frame());
    let (y, _) = integrate(model, st.s, st.to_array(), s1, IntegratorConfig::default()).unwrap();
    PhaseState::from_array(s1, &y, st.frame)
}

fn max_diff(a: &PhaseState, b: &PhaseState) -> f64 {
    assert_eq!(a.frame, b.frame);
    (a.pos - b.pos).amax().max((a.vel - b.vel).amax()).max((a.s - b.s).abs())
}

// stays at least 0.5 from the secondary, so errors are not amplified by a close pass
const EXTERIOR: [f64; 6] = [1.5, 0.0, 0.05, 0.0, -0.6, 0.02];
// starts near L2 and keeps clear of the secondary for six units
const NEAR_L2: [f64; 6] = [1.16, 0.0, 0.02, 0.0, 0.1, 0.02];

fn check_flow_commutes(p: SystemParams, y0: [f64; 6], nu0: f64, nu1: f64, tol: f64) {
    let puls = Model::new(ModelKind::ErtbpPulsating, p);
    let start = PhaseState::from_array(nu0, &y0, Frame::Pulsating);
    let end = propagate(&puls, &start, nu1);
    for kind in [
        ModelKind::ErtbpNonUniformRotatingNu,
        ModelKind::ErtbpNonUniformRotatingTime,
        ModelKind::ErtbpUniformRotating,
        ModelKind::ErtbpInertial,
    ] {
        let model = Model::new(kind, p);
        let frame = model.frame();
        let a = convert(&start, frame, &p).unwrap();
        let s1 = if frame.uses_true_anomaly() { nu1 } else { nu_to_time(nu1, &p) };
        let b = propagate(&model, &a, s1);
        let expected = convert(&end, frame, &p).unwrap();
        let d = max_diff(&b, &expected);
        assert!(d < tol, "{kind:?}: {d:e}");
    }
}

#[test]
fn elliptic_models_agree_through_frames() {
    check_flow_commutes(SystemParams::earth_moon(), EXTERIOR, 0.4, 5.4, 1e-9);
    check_flow_commutes(SystemParams::earth_moon(), NEAR_L2, 0.4, 6.4, 1e-9);
}

#[test]
fn elliptic_models_agree_from_apoapse_epoch() {
    let p = SystemParams::earth_moon().with_eccentricity(0.2).unwrap();
    check_flow_commutes(p, NEAR_L2, std::f64::consts::PI, std::f64::consts::PI + 6.0, 1e-9);
}

#[test]
fn circular_models_match_crtbp() {
    let p = SystemParams::circular(EARTH_MOON_MU).unwrap();
    let crtbp = Model::new(ModelKind::Crtbp, p);
    let ic = PhaseState::from_array(0.0, &EXTERIOR, Frame::ConstantRotating);
    let reference = propagate(&crtbp, &ic, 10.0);
    for kind in ModelKind::ALL {
        let model = Model::new(kind, p);
        let a = convert(&ic, model.frame(), &p).unwrap();
        let b = propagate(&model, &a, 10.0);
        let back = convert(&b, Frame::ConstantRotating, &p).unwrap();
        assert!(max_diff(&back, &reference) < 1e-9, "{kind:?}");
    }
}

#[test]
fn crtbp_jacobi_drift() {
    let mu = EARTH_MOON_MU;
    let model = Model::crtbp(mu).unwrap();
    let y0 = EXTERIOR;
    let c0 = jacobi_of(&y0, mu).unwrap();
    let (y, _) = integrate(&model, 0.0, y0, 50.0, IntegratorConfig::default()).unwrap();
    let c1 = jacobi_of(&y, mu).unwrap();
    assert!((c1 - c0).abs() < 1e-10, "{:e}", c1 - c0);
}

#[test]
fn planar_states_stay_planar() {
    let p = SystemParams::earth_moon();
    for kind in ModelKind::ALL {
        let model = Model::new(kind, p);
        let st = PhaseState::from_array(0.2, &[1.1, 0.05, 0.0, 0.02, -0.2, 0.0], model.frame());
        let end = propagate(&model, &st, 3.0);
        assert!(end.pos.z.abs() < 1e-13 && end.vel.z.abs() < 1e-13, "{kind:?}");
    }
}

#[test]
fn pulsating_time_reversal_symmetry() {
    // (nu, x, y, z, x', y', z') -> (-nu, x, -y, z, -x', y', -z') maps solutions to solutions
    let p = SystemParams::earth_moon();
    let model = Model::new(ModelKind::ErtbpPulsating, p);
    let y0 = [1.12, 0.03, 0.02, 0.05, -0.2, 0.01];
    let (ya, _) = integrate(&model, 0.3, y0, 2.0, IntegratorConfig::default()).unwrap();
    let m = |y: [f64; 6]| [y[0], -y[1], y[2], -y[3], y[4], -y[5]];
    let (yb, _) = integrate(&model, -0.3, m(y0), -2.0, IntegratorConfig::default()).unwrap();
    let yb = m(yb);
    for i in 0..6 {
        assert!((ya[i] - yb[i]).abs() < 1e-10);
    }
}
