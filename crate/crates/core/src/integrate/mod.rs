//! Adaptive integration with dense output and event location.

mod dop853;
pub mod events;
pub mod root;

pub use dop853::{DenseStep, Dop853, Stats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side of `y' = f(s, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, s: f64, y: &[f64; N], dy: &mut [f64; N]) -> Result<()>;
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N], &mut [f64; N]) -> Result<()>,
{
    fn rhs(&self, s: f64, y: &[f64; N], dy: &mut [f64; N]) -> Result<()> {
        self(s, y, dy)
    }
}

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-12, h_max: 0.5, max_steps: 2_000_000 }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for tol in [self.rtol, self.atol] {
            if !(1e-14..=1e-6).contains(&tol) {
                return Err(Error::Tolerance(tol));
            }
        }
        if !(self.h_max > 0.0) {
            return Err(Error::InvalidInput(format!("h_max must be positive, got {}", self.h_max)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Integrates from `s0` to `s1` (either direction) and returns the final state.
pub fn integrate<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    s0: f64,
    y0: [f64; N],
    s1: f64,
    cfg: IntegratorConfig,
) -> Result<([f64; N], Stats)> {
    if s1 == s0 {
        return Ok((y0, Stats::default()));
    }
    let mut st = Dop853::new(sys, s0, y0, s1 > s0, s1 - s0, cfg)?;
    while st.s() != s1 {
        st.step(s1)?;
    }
    Ok((*st.y(), st.stats))
}

/// Piecewise-polynomial solution covering `[s0, s1]`.
#[derive(Debug, Clone)]
pub struct DenseTrajectory<const N: usize> {
    pub s0: f64,
    pub y0: [f64; N],
    pub steps: Vec<DenseStep<N>>,
    pub stats: Stats,
}

impl<const N: usize> DenseTrajectory<N> {
    pub fn s_end(&self) -> f64 {
        self.steps.last().map_or(self.s0, |d| d.s_new())
    }

    pub fn y_end(&self) -> [f64; N] {
        self.steps.last().map_or(self.y0, |d| d.eval(d.s_new()))
    }

    /// Evaluates the interpolant; `s` is clamped to the covered interval.
    pub fn eval(&self, s: f64) -> [f64; N] {
        if self.steps.is_empty() {
            return self.y0;
        }
        let forward = self.s_end() >= self.s0;
        let key = |d: &DenseStep<N>| if forward { d.s_new() } else { -d.s_new() };
        let target = if forward { s } else { -s };
        let idx = self.steps.partition_point(|d| key(d) < target).min(self.steps.len() - 1);
        self.steps[idx].eval(s)
    }

    /// `n >= 2` equally spaced samples from start to end, inclusive.
    pub fn sample(&self, n: usize) -> Vec<(f64, [f64; N])> {
        let n = n.max(2);
        let (a, b) = (self.s0, self.s_end());
        (0..n)
            .map(|i| {
                let s = if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 };
                (s, self.eval(s))
            })
            .collect()
    }
}

/// Integrates `s0 -> s1` keeping the continuous extension of every step.
pub fn integrate_dense<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    s0: f64,
    y0: [f64; N],
    s1: f64,
    cfg: IntegratorConfig,
) -> Result<DenseTrajectory<N>> {
    let mut steps = Vec::new();
    if s1 == s0 {
        return Ok(DenseTrajectory { s0, y0, steps, stats: Stats::default() });
    }
    let mut st = Dop853::new(sys, s0, y0, s1 > s0, s1 - s0, cfg)?;
    while st.s() != s1 {
        st.step(s1)?;
        steps.push(st.dense()?);
    }
    Ok(DenseTrajectory { s0, y0, steps, stats: st.stats })
}

/// Which sign changes of an event function count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `g_a <= 0 < g_b`.
    Rising,
    /// `g_a >= 0 > g_b`.
    Falling,
    Either,
}

impl Direction {
    fn triggers(self, ga: f64, gb: f64) -> bool {
        match self {
            Direction::Rising => ga <= 0.0 && gb > 0.0,
            Direction::Falling => ga >= 0.0 && gb < 0.0,
            Direction::Either => (ga <= 0.0 && gb > 0.0) || (ga >= 0.0 && gb < 0.0),
        }
    }
}

/// Scalar event function of the state.
pub struct Event<'a, const N: usize> {
    pub g: &'a (dyn Fn(f64, &[f64; N]) -> f64 + Sync),
    pub direction: Direction,
    /// Values of `|g(s0)|` up to this tolerance are treated as zero.
    pub start_tol: f64,
    /// Ignore a trigger located exactly at the starting point.
    pub skip_start: bool,
}

/// First event located on a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<const N: usize> {
    pub index: usize,
    pub s: f64,
    pub y: [f64; N],
}

/// Result of [`integrate_until_event`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome<const N: usize> {
    Event(EventHit<N>),
    /// The integration reached `s_end` with no event.
    Reached { s: f64, y: [f64; N] },
}

/// Event search tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOptions {
    /// Root tolerance in the independent variable.
    pub xtol: f64,
    /// Interior samples per step when some `|g|` is below `near`.
    pub samples: usize,
    pub near: f64,
}

impl Default for EventOptions {
    fn default() -> Self {
        Self { xtol: 1e-13, samples: 6, near: 0.05 }
    }
}

/// Integrates until the first event fires or `s_end` is reached.
///
/// Within every accepted step the event functions are evaluated at the step
/// ends and, if any of them is close to zero, at interior points of the
/// continuous extension, so that grazing double crossings are not skipped.
/// The earliest trigger is refined with Brent's method on the interpolant.
pub fn integrate_until_event<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    s0: f64,
    y0: [f64; N],
    s_end: f64,
    cfg: IntegratorConfig,
    events: &[Event<'_, N>],
    opts: EventOptions,
) -> Result<(Outcome<N>, Stats)> {
    if s_end == s0 {
        return Ok((Outcome::Reached { s: s0, y: y0 }, Stats::default()));
    }
    let forward = s_end > s0;
    let mut st = Dop853::new(sys, s0, y0, forward, s_end - s0, cfg)?;
    let clamp0 = |i: usize, v: f64| if v.abs() <= events[i].start_tol { 0.0 } else { v };
    let mut g_prev: Vec<f64> = events.iter().enumerate().map(|(i, e)| clamp0(i, (e.g)(s0, &y0))).collect();
    let mut first = true;
    let mut g_buf = vec![0.0; events.len()];

    while st.s() != s_end {
        st.step(s_end)?;
        let (sa, sb) = (st.s_prev(), st.s());
        let yb = *st.y();
        for (i, e) in events.iter().enumerate() {
            g_buf[i] = (e.g)(sb, &yb);
        }
        let near = g_prev.iter().chain(g_buf.iter()).any(|g| g.abs() < opts.near);
        let any_trigger = events.iter().enumerate().any(|(i, e)| e.direction.triggers(g_prev[i], g_buf[i]));

        if near || any_trigger {
            let dense = st.dense()?;
            let m = if near { opts.samples.max(1) } else { 1 };
            // walk sub-intervals of the step in order
            let mut s_left = sa;
            let mut g_left = g_prev.clone();
            for j in 1..=m {
                let s_right = if j == m { sb } else { sa + (sb - sa) * j as f64 / m as f64 };
                let y_right = if j == m { yb } else { dense.eval(s_right) };
                let g_right: Vec<f64> = if j == m {
                    g_buf.clone()
                } else {
                    events.iter().map(|e| (e.g)(s_right, &y_right)).collect()
                };
                let mut best: Option<(f64, usize)> = None;
                for (i, e) in events.iter().enumerate() {
                    let g_at = |s: f64| (e.g)(s, &dense.eval(s));
                    let (gl, gr) = (g_left[i], g_right[i]);
                    let root = if e.direction.triggers(gl, gr) {
                        brent(g_at, s_left, s_right, gl, gr, opts.xtol)?
                    } else if near && gl.abs().min(gr.abs()) < opts.near {
                        // both ends on one side: look for an excursion across zero
                        let falling = e.direction != Direction::Rising && gl > 0.0 && gr > 0.0;
                        let rising = e.direction != Direction::Falling && gl < 0.0 && gr < 0.0;
                        if !(falling || rising) {
                            continue;
                        }
                        let sign = if falling { 1.0 } else { -1.0 };
                        let (s_ext, g_ext) = golden_min(|s| sign * g_at(s), s_left, s_right);
                        if g_ext >= 0.0 {
                            continue;
                        }
                        brent(g_at, s_left, s_ext, gl, sign * g_ext, opts.xtol)?
                    } else {
                        continue;
                    };
                    if first && e.skip_start && root == s0 {
                        continue;
                    }
                    let ahead = match best {
                        None => true,
                        Some((sb_, _)) => (root - sb_) * (sb - sa).signum() < 0.0,
                    };
                    if ahead {
                        best = Some((root, i));
                    }
                }
                if let Some((s_hit, index)) = best {
                    let y = if s_hit == s0 { y0 } else { dense.eval(s_hit) };
                    return Ok((Outcome::Event(EventHit { index, s: s_hit, y }), st.stats));
                }
                s_left = s_right;
                g_left = g_right;
            }
        }
        first = false;
        g_prev.copy_from_slice(&g_buf);
    }
    Ok((Outcome::Reached { s: st.s(), y: *st.y() }, st.stats))
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
fn golden_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if fc < 0.0 || fd < 0.0 {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn brent<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64) -> Result<f64> {
    root::brent(f, a, b, fa, fb, xtol, 200)
}
