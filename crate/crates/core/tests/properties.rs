use std::f64::consts::{PI, TAU};

use isonbhd::frames::{convert, rot_z};
use isonbhd::integrate::events::{propagate_until_exit, Classification, Face, TimeDirection};
use isonbhd::integrate::{integrate, IntegratorConfig};
use isonbhd::kepler::{kepler_reference_state, nu_to_time, time_to_nu, Normalization, SystemParams, EARTH_MOON_MU};
use isonbhd::models::{jacobi_of, Model, ModelKind};
use isonbhd::neighborhood::{tangent_grid, NeighborhoodSpec, TangentGrid, TangentState};
use isonbhd::search::{bisect_circle_boundary, find_circle_brackets, BisectionStep, ExitProbe, VelocityCircleProbe};
use isonbhd::toy::toy_find_nonexiting;
use isonbhd::{Frame, PhaseState};
use nalgebra::Vector3;
use proptest::prelude::*;

const FRAMES: [Frame; 5] =
    [Frame::Inertial, Frame::ConstantRotating, Frame::VariableRotating, Frame::VariableRotatingTime, Frame::Pulsating];

fn params(e: f64, sma: bool) -> SystemParams {
    let norm = if sma { Normalization::SemiMajorAxis } else { Normalization::Periapsis };
    SystemParams::new(EARTH_MOON_MU, e, norm).unwrap()
}

fn max_diff(a: &PhaseState, b: &PhaseState) -> f64 {
    let (ya, yb) = (a.to_array(), b.to_array());
    (0..6).map(|i| (ya[i] - yb[i]).abs()).fold((a.s - b.s).abs(), f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn anomaly_round_trip(nu in 0.0..20.0 * PI, e in 0.0..0.9f64, sma in any::<bool>()) {
        let p = params(e, sma);
        let back = time_to_nu(nu_to_time(nu, &p), &p).unwrap();
        prop_assert!((back - nu).abs() < 1e-12, "{nu} -> {back}");
    }

    #[test]
    fn circular_anomaly_is_time(t in -100.0..100.0f64) {
        let p = params(0.0, false);
        prop_assert_eq!(time_to_nu(t, &p).unwrap(), t);
        prop_assert_eq!(nu_to_time(t, &p), t);
    }

    #[test]
    fn reference_orbit_integrals(nu in 0.0..4.0 * PI, e in 0.0..0.9f64, sma in any::<bool>()) {
        let p = params(e, sma);
        let integrals = |nu: f64| {
            let (r, v) = kepler_reference_state(nu, &p);
            (0.5 * v.norm_squared() - p.k / r.norm(), r.cross(&v).norm())
        };
        let (e0, h0) = integrals(0.0);
        let (e1, h1) = integrals(nu);
        prop_assert!((e1 - e0).abs() < 1e-12 * e0.abs().max(1.0));
        prop_assert!((h1 - h0).abs() < 1e-12 * h0.max(1.0));
        prop_assert!((h0 - p.sigma).abs() < 1e-12 * h0);
    }

    #[test]
    fn frame_round_trips(
        from in 0usize..5,
        to in 0usize..5,
        s in 0.0..20.0f64,
        y in proptest::array::uniform6(-1.5..1.5f64),
        e in 0.0..0.2f64,
    ) {
        let p = params(e, false);
        let st = PhaseState::from_array(s, &y, FRAMES[from]);
        let there = convert(&st, FRAMES[to], &p).unwrap();
        prop_assert_eq!(there.frame, FRAMES[to]);
        let back = convert(&there, FRAMES[from], &p).unwrap();
        prop_assert!(max_diff(&back, &st) < 1e-12, "{:?} -> {:?}: {}", FRAMES[from], FRAMES[to], max_diff(&back, &st));
    }

    #[test]
    fn rotations_leave_z_alone(angle in -10.0..10.0f64, v in proptest::array::uniform3(-5.0..5.0f64)) {
        let w = rot_z(angle) * Vector3::from(v);
        prop_assert_eq!(w.z, v[2]);
        prop_assert!((w.norm() - Vector3::from(v).norm()).abs() < 1e-13);
    }

    #[test]
    fn planar_states_convert_to_planar_states(
        from in 0usize..5,
        to in 0usize..5,
        s in 0.0..20.0f64,
        y in proptest::array::uniform4(-1.5..1.5f64),
    ) {
        let p = params(0.0549, false);
        let st = PhaseState::from_array(s, &[y[0], y[1], 0.0, y[2], y[3], 0.0], FRAMES[from]);
        let there = convert(&st, FRAMES[to], &p).unwrap();
        prop_assert_eq!(there.pos.z, 0.0);
        prop_assert_eq!(there.vel.z, 0.0);
    }

    #[test]
    fn tangent_velocity_is_orthogonal_to_the_normal(
        right in any::<bool>(),
        theta in -PI..PI,
        z in -0.2..0.2f64,
        pitch in -1.5..1.5f64,
        sense in any::<bool>(),
        speed in 0.01..2.0f64,
    ) {
        let t = TangentState {
            boundary: if right { Face::Right } else { Face::Left },
            r: if right { 0.35 } else { 0.993 },
            theta,
            z,
            speed,
            phi_v: theta + if sense { 1.0 } else { -1.0 } * std::f64::consts::FRAC_PI_2,
            pitch,
            nu0: 0.0,
            c: 3.14,
        };
        let y = t.to_array(EARTH_MOON_MU);
        let n = t.normal();
        let dot = y[3] * n[0] + y[4] * n[1] + y[5] * n[2];
        prop_assert!(dot.abs() < 1e-13 * speed.max(1.0), "{dot}");
    }
}

/// Tangent states of both faces of the CRTBP neighborhood at `c`.
fn crtbp_nodes(c: f64, n_theta: usize) -> Vec<TangentState> {
    let spec = NeighborhoodSpec::crtbp();
    let mut v = tangent_grid(&spec, Face::Left, TangentGrid::planar(n_theta), c, 0.0, EARTH_MOON_MU).unwrap();
    v.extend(tangent_grid(&spec, Face::Right, TangentGrid::planar(n_theta), c, 0.0, EARTH_MOON_MU).unwrap());
    v
}

#[test]
fn exit_records_replay_forward_and_backward() {
    let model = Model::crtbp(EARTH_MOON_MU).unwrap();
    let region = NeighborhoodSpec::crtbp().region(EARTH_MOON_MU).unwrap();
    let cfg = IntegratorConfig::default();
    let mut checked = 0;
    for (k, t) in crtbp_nodes(3.14, 24).iter().enumerate() {
        let y0 = t.to_array(EARTH_MOON_MU);
        let time = if k % 2 == 0 { TimeDirection::Forward } else { TimeDirection::Backward };
        let rec = propagate_until_exit(&model, 0.0, y0, &region, 100.0, time, cfg).unwrap();
        if !matches!(rec.classification, Classification::Left | Classification::Right) {
            continue;
        }
        let exit: [f64; 6] = rec.exit_state.clone().try_into().unwrap();
        let (replay, _) = integrate(&model, 0.0, y0, rec.exit_s, cfg).unwrap();
        let fwd = (0..6).map(|i| (replay[i] - exit[i]).abs()).fold(0.0, f64::max);
        assert!(fwd < 1e-9, "replay misses the exit by {fwd}");
        let (back, _) = integrate(&model, rec.exit_s, exit, 0.0, cfg).unwrap();
        let rev = (0..6).map(|i| (back[i] - y0[i]).abs()).fold(0.0, f64::max);
        assert!(rev < 1e-8, "reversal misses the start by {rev}");
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn classification_is_stable_under_tighter_tolerance() {
    let crtbp = Model::crtbp(EARTH_MOON_MU).unwrap();
    let pulsating = Model::new(ModelKind::ErtbpPulsating, SystemParams::earth_moon());
    for (model, spec) in [(crtbp, NeighborhoodSpec::crtbp()), (pulsating, NeighborhoodSpec::ertbp())] {
        let region = spec.region(EARTH_MOON_MU).unwrap();
        for c in [3.10, 3.14, 3.17] {
            let mut nodes = tangent_grid(&spec, Face::Left, TangentGrid::planar(36), c, 0.0, EARTH_MOON_MU).unwrap();
            nodes.extend(tangent_grid(&spec, Face::Right, TangentGrid::planar(36), c, 0.0, EARTH_MOON_MU).unwrap());
            for t in nodes {
                for time in [TimeDirection::Forward, TimeDirection::Backward] {
                    let classify = |tol: f64| {
                        propagate_until_exit(&model, 0.0, t.to_array(EARTH_MOON_MU), &region, 100.0, time, IntegratorConfig::with_tol(tol))
                            .unwrap()
                            .classification
                    };
                    assert_eq!(classify(1e-12), classify(1e-13), "{:?} {t:?} {time:?}", model.kind);
                }
            }
        }
    }
}

#[test]
fn crtbp_exits_keep_the_construction_energy() {
    let model = Model::crtbp(EARTH_MOON_MU).unwrap();
    let region = NeighborhoodSpec::crtbp().region(EARTH_MOON_MU).unwrap();
    for c in [3.10, 3.17] {
        for t in crtbp_nodes(c, 20) {
            let y0 = t.to_array(EARTH_MOON_MU);
            assert!((jacobi_of(&y0, EARTH_MOON_MU).unwrap() - c).abs() < 1e-12);
            let rec = propagate_until_exit(&model, 0.0, y0, &region, 100.0, TimeDirection::Forward, IntegratorConfig::default()).unwrap();
            let exit: [f64; 6] = rec.exit_state.try_into().unwrap();
            assert!((jacobi_of(&exit, EARTH_MOON_MU).unwrap() - c).abs() < 1e-10);
        }
    }
}

/// Dwell of each new bracket end, per side. A midpoint that replaces the
/// left end lies nearer the boundary on the left side, so each side's
/// sequence rises. The midpoint sequence as a whole need not.
fn per_side_dwells(history: &[BisectionStep]) -> (Vec<f64>, Vec<f64>) {
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for w in history.windows(2) {
        if w[1].lo == w[0].mid {
            lo.push(w[0].dwell);
        } else {
            hi.push(w[0].dwell);
        }
    }
    (lo, hi)
}

fn rising(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

#[test]
fn circle_bisection_keeps_its_bracket_and_dwell_rises() {
    let probe = ExitProbe::new(Model::crtbp(EARTH_MOON_MU).unwrap(), &NeighborhoodSpec::crtbp()).unwrap();
    let base = [1.16, 0.0];
    let br = find_circle_brackets(&probe, base, 3.14, 0.0, 72).unwrap();
    let b = bisect_circle_boundary(&probe, base, 3.14, 0.0, br[0], 1e-12).unwrap();
    for step in &b.history {
        for (angle, want) in [(step.lo, Classification::Left), (step.hi, Classification::Right)] {
            let v = VelocityCircleProbe { base_point: base, c_target: 3.14, nu0: 0.0, angle };
            let got = isonbhd::search::classify_velocity(&probe, v, TimeDirection::Forward).unwrap();
            assert_eq!(got.classification, want, "{step:?}");
        }
    }
    let (lo, hi) = per_side_dwells(&b.history);
    assert!(rising(&lo) && rising(&hi), "{lo:?} {hi:?}");
    assert!(b.dwell > b.left_dwell && b.dwell > b.right_dwell);
}

#[test]
fn toy_bisection_dwell_rises_per_side() {
    for t0 in [0.0, PI / 2.0, PI, 3.0 * PI / 2.0] {
        let r = toy_find_nonexiting(0.8, t0, 0.6, 1e-14, IntegratorConfig::default()).unwrap();
        let (lo, hi) = per_side_dwells(&r.history);
        assert!(rising(&lo) && rising(&hi), "t0 {t0}: {lo:?} {hi:?}");
        assert!(r.dwell > r.left_endpoint_dwell && r.dwell > r.right_endpoint_dwell);
        assert!(r.dwell > 25.0, "t0 {t0}: dwell {}", r.dwell);
    }
}

#[test]
fn toy_endpoints_exit_on_their_sides_at_every_epoch() {
    for k in 0..32 {
        let t0 = TAU * k as f64 / 32.0;
        let cfg = IntegratorConfig::default();
        assert_eq!(isonbhd::toy::toy_classify(-1.0, 0.8, t0, 0.6, cfg).unwrap().0, Classification::Left);
        assert_eq!(isonbhd::toy::toy_classify(1.0, 0.8, t0, 0.6, cfg).unwrap().0, Classification::Right);
    }
}

#[test]
fn refined_sweeps_keep_their_failures() {
    // Below the layer the ERTBP inner boundary fails. Midpoint nodes of a
    // grid reappear in the grid three times finer; twice finer shares none.
    let model = Model::new(ModelKind::ErtbpPulsating, SystemParams::earth_moon());
    let spec = NeighborhoodSpec { r_left: 0.993, layer: [3.0, 3.17], ..NeighborhoodSpec::ertbp() };
    let verdicts = |n: usize| {
        let settings = isonbhd::neighborhood::VerifySettings {
            epochs: vec![0.0],
            energies: vec![3.05],
            grid: TangentGrid::planar(n),
            ..Default::default()
        };
        isonbhd::neighborhood::verify_neighborhood(&spec, &model, &settings).unwrap()
    };
    let coarse = verdicts(24);
    assert!(!coarse.pass, "the sweep below the layer should fail");
    for factor in [2, 3] {
        let fine = verdicts(24 * factor);
        assert!(!fine.pass);
        if factor == 3 {
            for f in coarse.failures() {
                let same = fine.records.iter().find(|r| {
                    r.tangent.boundary == f.tangent.boundary
                        && (r.tangent.theta - f.tangent.theta).abs() < 1e-12
                        && (r.tangent.phi_v - f.tangent.phi_v).abs() < 1e-12
                });
                assert!(!same.expect("nested node").pass, "{:?}", f.tangent);
            }
        }
    }
}
