//! Experiment drivers. Each returns its summary and data files without
//! touching the file system, so reruns can be compared byte for byte.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use isonbhd::integrate::events::Classification;
use isonbhd::integrate::{integrate_dense, IntegratorConfig};
use isonbhd::io::{self, OutputMeta, Table};
use isonbhd::models::{jacobi_of, Model, ModelKind};
use isonbhd::neighborhood::{hill_boundary_curve, verify_neighborhood, NeighborhoodSpec, VerifySettings};
use isonbhd::search::{
    bisect_circle_boundary, boundary_intersection_states, find_circle_brackets, section_spread, sphere_exit_sets,
    track_orbit, CorrectionPolicy, ExitProbe, Projection, SectionKind, TrackingRun, CURVE_ORDER,
};
use isonbhd::toy::{toy_boundary_check, toy_find_nonexiting, toy_quiver, Toy, TRANSVERSAL_LIMIT};
use isonbhd::PhaseState;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    BisectParams, ConvertParams, Experiment, ExperimentConfig, HillParams, SphereParams, ToyParams, TrackParams,
    TrackStart, VerifyParams,
};
use crate::CliError;

/// Crossings dropped before the section scatter is measured.
const SPREAD_SKIP: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub pass: bool,
    pub summary: Value,
    /// File name and contents, in write order.
    pub files: Vec<(String, Vec<u8>)>,
    /// One-line result for the terminal.
    pub line: String,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model: Model,
    spec: NeighborhoodSpec,
    meta: OutputMeta,
    files: Vec<(String, Vec<u8>)>,
}

impl Ctx<'_> {
    fn probe(&self, budget: f64) -> Result<ExitProbe, CliError> {
        Ok(ExitProbe::new(self.model, &self.spec)?.with_integrator(self.cfg.integrator).with_budget(budget))
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        self.files.push((name.to_string(), t.render()?.into_bytes()));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, key: &str, value: &T) -> Result<(), CliError> {
        let doc = json!({ "version": self.meta.version, "config_sha256": self.meta.config_sha256, key: value });
        let mut text = serde_json::to_string_pretty(&doc).map_err(isonbhd::Error::from)?;
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
        Ok(())
    }

    fn finish(self, pass: bool, mut summary: Value, line: String) -> RunOutput {
        let head = json!({
            "kind": self.cfg.experiment.name(),
            "version": self.meta.version,
            "config_sha256": self.meta.config_sha256,
            "pass": pass,
        });
        if let (Value::Object(h), Value::Object(s)) = (head, &mut summary) {
            let mut merged = h;
            merged.append(s);
            summary = Value::Object(merged);
        }
        RunOutput { pass, summary, files: self.files, line }
    }
}

/// Runs the configured experiment. `base_dir` resolves relative input paths.
pub fn execute(cfg: &ExperimentConfig, base_dir: &Path) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let mut ctx = Ctx { cfg, model: cfg.model()?, spec: cfg.neighborhood(), meta: OutputMeta::new(cfg.sha256()), files: Vec::new() };
    match &cfg.experiment {
        Experiment::Verify(p) => verify(&mut ctx, p).map(|(pass, s, l)| ctx.finish(pass, s, l)),
        Experiment::Bisect(p) => bisect(&mut ctx, p).map(|(pass, s, l)| ctx.finish(pass, s, l)),
        Experiment::Track(p) => track(&mut ctx, p).map(|(pass, s, l)| ctx.finish(pass, s, l)),
        Experiment::Sphere(p) => sphere(&mut ctx, p).map(|(pass, s, l)| ctx.finish(pass, s, l)),
        Experiment::Toy(p) => toy(&mut ctx, p).map(|(pass, s, l)| ctx.finish(pass, s, l)),
        Experiment::Convert(p) => convert(&mut ctx, p, base_dir).map(|(pass, s, l)| ctx.finish(pass, s, l)),
        Experiment::Hill(p) => hill(&mut ctx, p).map(|(pass, s, l)| ctx.finish(pass, s, l)),
    }
}

type Step = Result<(bool, Value, String), CliError>;

fn verify(ctx: &mut Ctx, p: &VerifyParams) -> Step {
    let settings = VerifySettings {
        epochs: p.epochs.clone(),
        energies: p.energies.clone(),
        grid: p.grid,
        budget: p.budget,
        integrator: ctx.cfg.integrator,
    };
    let report = verify_neighborhood(&ctx.spec, &ctx.model, &settings)?;
    let failures = report.failures().count();
    ctx.json("report.json", "report", &report)?;
    let mut t = Table::new(&["face", "r", "theta", "z", "pitch", "nu0", "c", "forward", "backward"]);
    for r in report.failures() {
        let tg = &r.tangent;
        let face = if tg.boundary == isonbhd::integrate::events::Face::Left { -1.0 } else { 1.0 };
        t.push(vec![
            face,
            tg.r,
            tg.theta,
            tg.z,
            tg.pitch,
            tg.nu0,
            tg.c,
            class_code(r.forward.classification),
            class_code(r.backward.classification),
        ])?;
    }
    let t = with_meta(t, &ctx.meta);
    ctx.table("failures.csv", &t)?;
    let line = format!(
        "verify {:?}: {} of {} tangent states pass, exit C in [{:.6}, {:.6}]",
        ctx.model.kind,
        report.tested() - failures,
        report.tested(),
        report.exit_c_range[0],
        report.exit_c_range[1]
    );
    let summary = json!({
        "model": ctx.model.kind,
        "neighborhood": ctx.spec,
        "tested": report.tested(),
        "failures": failures,
        "left": report.left,
        "right": report.right,
        "exit_c_range": report.exit_c_range,
    });
    Ok((report.pass, summary, line))
}

fn class_code(c: Classification) -> f64 {
    match c {
        Classification::Left => -1.0,
        Classification::Remains => 0.0,
        Classification::Right => 1.0,
        Classification::OtherFace => 2.0,
    }
}

fn with_meta(mut t: Table, meta: &OutputMeta) -> Table {
    t.meta.insert(0, ("config_sha256".into(), meta.config_sha256.clone()));
    t.meta.insert(0, ("version".into(), meta.version.clone()));
    t
}

fn trace_table(model: &Model, cfg: IntegratorConfig, s0: f64, y0: [f64; 6], s1: f64, n: usize, meta: &OutputMeta) -> Result<Table, CliError> {
    let dense = integrate_dense(model, s0, y0, s1, cfg)?;
    let states: Vec<PhaseState> = dense.sample(n).into_iter().map(|(s, y)| PhaseState::from_array(s, &y, model.frame())).collect();
    Ok(io::trajectory_table(&states, meta)?)
}

fn bisect(ctx: &mut Ctx, p: &BisectParams) -> Step {
    let probe = ctx.probe(p.budget)?;
    let brackets = find_circle_brackets(&probe, p.base, p.c, p.nu0, p.samples)?;
    let Some(&bracket) = brackets.get(p.bracket) else {
        let line = format!("bisect: {} brackets found, bracket {} requested", brackets.len(), p.bracket);
        return Ok((false, json!({ "brackets": brackets }), line));
    };
    let b = bisect_circle_boundary(&probe, p.base, p.c, p.nu0, bracket, p.tol)?;
    ctx.json("bisection.json", "bisection", &b)?;
    let mut dwell = Table::new(&["iteration", "lo", "hi", "mid", "dwell"]);
    for (k, h) in b.history.iter().enumerate() {
        dwell.push(vec![k as f64, h.lo, h.hi, h.mid, h.dwell])?;
    }
    let dwell = with_meta(dwell, &ctx.meta);
    ctx.table("dwell.csv", &dwell)?;
    let y = b.state.to_array();
    let trace = trace_table(&ctx.model, ctx.cfg.integrator, b.state.s, y, b.state.s + b.dwell, p.trace_points, &ctx.meta)?;
    ctx.table("trajectory.csv", &trace)?;
    let pass = b.dwell > b.left_dwell && b.dwell > b.right_dwell;
    let line = format!(
        "bisect: angle {:.15} rad, width {:.1e}, dwell {:.4} (bracket ends {:.4}, {:.4})",
        b.angle, b.bracket_width, b.dwell, b.left_dwell, b.right_dwell
    );
    let summary = json!({
        "brackets": brackets,
        "angle": b.angle,
        "bracket_width": b.bracket_width,
        "dwell": b.dwell,
        "left_dwell": b.left_dwell,
        "right_dwell": b.right_dwell,
        "iterations": b.history.len(),
    });
    Ok((pass, summary, line))
}

/// Initial state of a tracking run, with the Jacobi constant it was built on.
fn track_start(ctx: &Ctx, probe: &ExitProbe, start: &TrackStart) -> Result<Result<(PhaseState, f64, Value), String>, CliError> {
    let frame = ctx.model.frame();
    match *start {
        TrackStart::Circle { base, c, nu0, samples, bracket } => {
            let brackets = find_circle_brackets(probe, base, c, nu0, samples)?;
            let Some(&br) = brackets.get(bracket) else {
                return Ok(Err(format!("{} brackets found, bracket {bracket} requested", brackets.len())));
            };
            let b = bisect_circle_boundary(probe, base, c, nu0, br, 1e-12)?;
            Ok(Ok((b.state, c, json!({ "angle": b.angle, "dwell": b.dwell }))))
        }
        TrackStart::Sphere { base, c, nu0, grid, refine_tol } => {
            let map = sphere_exit_sets(probe, base, c, nu0, grid)?;
            let xs = boundary_intersection_states(probe, &map, refine_tol)?;
            let Some(best) = xs.iter().max_by(|a, b| a.min_dwell().total_cmp(&b.min_dwell())) else {
                return Ok(Err("no boundary intersections on the velocity sphere".into()));
            };
            let info = json!({ "intersections": xs.len(), "direction": best.direction, "min_dwell": best.min_dwell() });
            Ok(Ok((PhaseState::from_array(nu0, &best.state, frame), c, info)))
        }
        TrackStart::State { s, y } => Ok(Ok((PhaseState::from_array(s, &y, frame), jacobi_of(&y, ctx.model.params.mu)?, json!({})))),
    }
}

fn track(ctx: &mut Ctx, p: &TrackParams) -> Step {
    let probe = ctx.probe(p.budget)?;
    let (initial, c, start_info) = match track_start(ctx, &probe, &p.start)? {
        Ok(v) => v,
        Err(msg) => return Ok((false, json!({ "start": msg }), format!("track: {msg}"))),
    };
    let section = p.section.unwrap_or(match p.start {
        TrackStart::Circle { .. } => SectionKind::PlaneY,
        _ => SectionKind::PlaneZ,
    });
    let n = p.n_crossings.unwrap_or(if section == SectionKind::PlaneY { 100 } else { 500 });
    let mut policy = match ctx.model.kind {
        ModelKind::Crtbp => CorrectionPolicy::crtbp(c, section),
        _ => CorrectionPolicy::ertbp(section),
    };
    policy.angle_tol = p.angle_tol;
    policy.initial_step = p.initial_step;
    policy.ring = p.ring;
    let run = track_orbit(&probe, &initial, section, n, policy)?;
    ctx.json("run.json", "run", &run)?;
    let sec = io::section_table(&io::section_rows(&run), &ctx.meta);
    ctx.table("section.csv", &sec)?;
    if p.per_arc > 0 {
        let states = io::sample_run(&ctx.model, ctx.cfg.integrator, &run, p.per_arc)?;
        let frames = if p.frames.is_empty() { vec![ctx.model.frame()] } else { p.frames.clone() };
        for f in frames {
            let conv = io::convert_all(&states, f, &ctx.model)?;
            let t = io::trajectory_table(&conv, &ctx.meta)?;
            ctx.table(&format!("trajectory_{}.csv", f.name()), &t)?;
        }
    }
    let spread = section_spread(&run, Projection::default(), SPREAD_SKIP, CURVE_ORDER).ok().map(|m| m.spread);
    let line = track_line(&run);
    let summary = json!({
        "start": start_info,
        "status": run.status,
        "crossings": run.crossings.len(),
        "revolutions_if_two_crossings_each": run.crossings.len() as f64 / 2.0,
        "total_dv": run.total_dv,
        "total_dv_mps": run.total_dv_mps,
        "exit_c_range": run.exit_c_range,
        "max_position_jump": run.max_position_jump(),
        "section_curve_rms": spread,
    });
    Ok((run.completed(), summary, line))
}

fn track_line(run: &TrackingRun) -> String {
    let c = run.exit_c_range.map_or("none".to_string(), |r| format!("[{:.6}, {:.6}]", r[0], r[1]));
    format!(
        "track: {:?} after {} crossings ({} revolutions at two crossings each), total dV {:.4e} ({:.4e} m/s), exit C {c}",
        run.status,
        run.crossings.len(),
        run.crossings.len() / 2,
        run.total_dv,
        run.total_dv_mps
    )
}

fn sphere(ctx: &mut Ctx, p: &SphereParams) -> Step {
    let probe = ctx.probe(p.budget)?;
    let map = sphere_exit_sets(&probe, p.base, p.c, p.nu0, p.grid)?;
    let xs = boundary_intersection_states(&probe, &map, p.refine_tol)?;
    let mut t = Table::new(&["dx", "dy", "dz", "forward", "backward", "forward_dwell", "backward_dwell"]);
    for ((d, f), b) in map.directions.iter().zip(&map.forward).zip(&map.backward) {
        t.push(vec![d[0], d[1], d[2], class_code(f.classification), class_code(b.classification), f.dwell, b.dwell])?;
    }
    let t = with_meta(t, &ctx.meta);
    ctx.table("exit_map.csv", &t)?;
    ctx.json("intersections.json", "intersections", &xs)?;
    let counts: Vec<Value> = map
        .combination_counts()
        .into_iter()
        .map(|((f, b), n)| json!({ "forward": f, "backward": b, "count": n }))
        .collect();
    let line = format!("sphere: {} directions, {} boundary intersections", map.directions.len(), xs.len());
    let summary = json!({ "speed": map.speed, "combinations": counts, "intersections": xs.len() });
    Ok((!xs.is_empty(), summary, line))
}

fn toy(ctx: &mut Ctx, p: &ToyParams) -> Step {
    let check = toy_boundary_check(p.epsilon, p.grid)?;
    ctx.json("block_check.json", "check", &check)?;
    let mut quiver = Table::new(&["t", "x1", "x2", "f1", "f2"]);
    for k in 0..4 {
        let t = k as f64 * FRAC_PI_2;
        for q in toy_quiver(t, p.epsilon, p.quiver) {
            quiver.push(vec![t, q[0], q[1], q[2], q[3]])?;
        }
    }
    let quiver = with_meta(quiver, &ctx.meta);
    ctx.table("quiver.csv", &quiver)?;
    let res = toy_find_nonexiting(p.x2, p.t0, p.epsilon, p.tol, ctx.cfg.integrator)?;
    ctx.json("nonexiting.json", "result", &res)?;
    let mut dwell = Table::new(&["iteration", "lo", "hi", "mid", "dwell"]);
    for (k, h) in res.history.iter().enumerate() {
        dwell.push(vec![k as f64, h.lo, h.hi, h.mid, h.dwell])?;
    }
    let dwell = with_meta(dwell, &ctx.meta);
    ctx.table("dwell.csv", &dwell)?;
    let orbit = integrate_dense(&Toy { epsilon: p.epsilon }, p.t0, [res.x1, res.x2], p.t0 + res.dwell, ctx.cfg.integrator)?;
    let mut trace = Table::new(&["t", "x1", "x2"]);
    for (t, x) in orbit.sample(p.trace_points) {
        trace.push(vec![t, x[0], x[1]])?;
    }
    let trace = with_meta(trace, &ctx.meta);
    ctx.table("orbit.csv", &trace)?;
    let pass = check.pass && res.dwell >= p.dwell_target;
    let line = format!(
        "toy: block check {}, x1* = {:.16} (width {:.1e}), dwell {:.3} vs target {}",
        if check.pass { "passes" } else { "fails" },
        res.x1,
        res.bracket_width,
        res.dwell,
        p.dwell_target
    );
    let summary = json!({
        "transversal_guarantee": p.epsilon.abs() < TRANSVERSAL_LIMIT,
        "block_check": check.pass,
        "violations": check.violations.len(),
        "x1": res.x1,
        "bracket_width": res.bracket_width,
        "dwell": res.dwell,
        "dwell_target": p.dwell_target,
    });
    Ok((pass, summary, line))
}

fn convert(ctx: &mut Ctx, p: &ConvertParams, base_dir: &Path) -> Step {
    let path = base_dir.join(&p.input);
    let file = std::fs::File::open(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let table = Table::read(std::io::BufReader::new(file))?;
    let states = io::parse_trajectory_table(&table)?;
    for f in &p.to {
        let conv = io::convert_all(&states, *f, &ctx.model)?;
        let t = io::trajectory_table(&conv, &ctx.meta)?;
        ctx.table(&format!("trajectory_{}.csv", f.name()), &t)?;
    }
    let from = states.first().map(|s| s.frame);
    let line = format!("convert: {} states from {:?} to {:?}", states.len(), from, p.to);
    Ok((true, json!({ "states": states.len(), "from": from, "to": p.to }), line))
}

fn hill(ctx: &mut Ctx, p: &HillParams) -> Step {
    let mu = ctx.model.params.mu;
    let mut t = Table::new(&["c", "curve", "x", "y"]);
    let mut counts = Vec::new();
    for &c in &p.energies {
        let curves = match hill_boundary_curve(c, mu, p.resolution, p.window) {
            Ok(curves) => curves,
            Err(_) => Vec::new(),
        };
        for (k, curve) in curves.iter().enumerate() {
            for pt in curve {
                t.push(vec![c, k as f64, pt[0], pt[1]])?;
            }
        }
        counts.push(json!({ "c": c, "curves": curves.len(), "points": curves.iter().map(Vec::len).sum::<usize>() }));
    }
    let t = with_meta(t, &ctx.meta);
    ctx.table("hill.csv", &t)?;
    let pass = counts.iter().all(|c| c["curves"].as_u64() > Some(0));
    let line = format!("hill: zero-velocity curves for {} energies", p.energies.len());
    Ok((pass, json!({ "energies": counts }), line))
}
