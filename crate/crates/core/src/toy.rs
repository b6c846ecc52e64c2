//! A planar saddle with a rotating perturbation, `x' = (A + eps P(t)) x`, in
//! the square `[-1, 1]^2`: the smallest non-autonomous system where bisection
//! between left and right exits finds an orbit that stays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::events::{propagate_until_exit, Classification, EventSpec, Face, RegionSpec, TimeDirection};
use crate::integrate::{IntegratorConfig, OdeSystem};
pub use crate::search::BisectionStep;

/// Perturbation strength below which the field is never tangent to the square.
pub const TRANSVERSAL_LIMIT: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub epsilon: f64,
    pub t0: f64,
}

impl ToyConfig {
    /// Whether transversality of the square's faces is guaranteed.
    pub fn is_transversal(&self) -> bool {
        self.epsilon.abs() < TRANSVERSAL_LIMIT
    }
}

/// Vector field of the toy system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Toy {
    pub epsilon: f64,
}

pub fn toy_rhs(t: f64, x: &[f64; 2], epsilon: f64) -> [f64; 2] {
    let (s, c) = t.sin_cos();
    [x[0] + epsilon * (c * x[0] + s * x[1]), -x[1] + epsilon * (-s * x[0] + c * x[1])]
}

impl OdeSystem<2> for Toy {
    fn rhs(&self, t: f64, y: &[f64; 2], dy: &mut [f64; 2]) -> Result<()> {
        *dy = toy_rhs(t, y, self.epsilon);
        Ok(())
    }
}

/// The square `B` with faces `E_R = 1 - x1`, `E_L = 1 + x1`, `E_U = 1 - x2`, `E_D = 1 + x2`.
pub fn unit_square() -> RegionSpec {
    let faces = [
        (vec![1.0, 0.0], vec![-1.0, 0.0], Face::Right),
        (vec![-1.0, 0.0], vec![1.0, 0.0], Face::Left),
        (vec![0.0, 1.0], vec![0.0, -1.0], Face::Up),
        (vec![0.0, -1.0], vec![0.0, 1.0], Face::Down),
    ];
    RegionSpec::new(
        faces
            .into_iter()
            .map(|(b, u, f)| EventSpec::plane(b, u, f).expect("unit normals"))
            .collect(),
    )
    .expect("non-empty")
}

/// Sampling of the faces and of one period in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyGrid {
    /// Points per face, corners included.
    pub n_face: usize,
    /// Times in `[0, 2 pi)`.
    pub n_time: usize,
}

impl Default for ToyGrid {
    fn default() -> Self {
        Self { n_face: 19, n_time: 20 }
    }
}

/// A sample where the field has the wrong orientation on a face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceViolation {
    pub face: Face,
    pub t: f64,
    pub x: [f64; 2],
    /// Outward normal component of the field.
    pub outward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCheckReport {
    pub epsilon: f64,
    pub samples_per_face: usize,
    /// Smallest `sign * outward` over each face, where `sign` is +1 on the
    /// exit faces (right, left) and -1 on the entrance faces (up, down).
    pub min_margin: Vec<(Face, f64)>,
    pub violations: Vec<FaceViolation>,
    pub pass: bool,
}

/// Checks that the field points out of the square on the left and right
/// faces and into it on the top and bottom faces.
pub fn toy_boundary_check(epsilon: f64, grid: ToyGrid) -> Result<BlockCheckReport> {
    if grid.n_face < 2 || grid.n_time < 1 {
        return Err(Error::InvalidInput("toy grid needs n_face >= 2 and n_time >= 1".into()));
    }
    // face, fixed coordinate index and value, outward normal sign, exit face?
    let faces = [
        (Face::Right, 0, 1.0, true),
        (Face::Left, 0, -1.0, true),
        (Face::Up, 1, 1.0, false),
        (Face::Down, 1, -1.0, false),
    ];
    let mut min_margin = Vec::new();
    let mut violations = Vec::new();
    for (face, idx, val, exit) in faces {
        let mut worst = f64::INFINITY;
        for k in 0..grid.n_time {
            let t = std::f64::consts::TAU * k as f64 / grid.n_time as f64;
            for j in 0..grid.n_face {
                let along = -1.0 + 2.0 * j as f64 / (grid.n_face - 1) as f64;
                let x = if idx == 0 { [val, along] } else { [along, val] };
                let f = toy_rhs(t, &x, epsilon);
                let outward = f[idx] * val;
                let margin = if exit { outward } else { -outward };
                worst = worst.min(margin);
                if margin <= 0.0 {
                    violations.push(FaceViolation { face, t, x, outward });
                }
            }
        }
        min_margin.push((face, worst));
    }
    Ok(BlockCheckReport {
        epsilon,
        samples_per_face: grid.n_face * grid.n_time,
        pass: violations.is_empty(),
        min_margin,
        violations,
    })
}

/// Exit budget for toy trajectories.
pub const TOY_BUDGET: f64 = 200.0;

/// Exit record of the toy orbit through `(x1, x2)` at `t0`.
pub fn toy_classify(x1: f64, x2: f64, t0: f64, epsilon: f64, cfg: IntegratorConfig) -> Result<(Classification, f64)> {
    let rec = propagate_until_exit(&Toy { epsilon }, t0, [x1, x2], &unit_square(), TOY_BUDGET, TimeDirection::Forward, cfg)?;
    Ok((rec.classification, rec.dwell(t0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonExitingResult {
    pub x1: f64,
    pub x2: f64,
    pub t0: f64,
    pub epsilon: f64,
    pub bracket_width: f64,
    /// Time the orbit through `(x1, x2)` spends in the square.
    pub dwell: f64,
    pub left_endpoint_dwell: f64,
    pub right_endpoint_dwell: f64,
    pub history: Vec<BisectionStep>,
}

/// Bisects on `x1 in [-1, 1]` along the segment at height `x2` for the
/// boundary between left and right exits.
pub fn toy_find_nonexiting(x2: f64, t0: f64, epsilon: f64, tol: f64, cfg: IntegratorConfig) -> Result<NonExitingResult> {
    let (cl, dl) = toy_classify(-1.0, x2, t0, epsilon, cfg)?;
    let (cr, dr) = toy_classify(1.0, x2, t0, epsilon, cfg)?;
    if cl != Classification::Left || cr != Classification::Right {
        return Err(Error::InvalidBracket(format!("endpoints classify {cl:?} and {cr:?}, expected Left and Right")));
    }
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let mut history = Vec::new();
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (c, dwell) = toy_classify(mid, x2, t0, epsilon, cfg)?;
        history.push(BisectionStep { lo, hi, mid, dwell });
        match c {
            Classification::Left => lo = mid,
            Classification::Right => hi = mid,
            Classification::Remains => {
                lo = mid;
                hi = mid;
            }
            Classification::OtherFace => {
                return Err(Error::InvalidBracket(format!("midpoint {mid} exits through the top or bottom")))
            }
        }
    }
    let x1 = 0.5 * (lo + hi);
    let (_, dwell) = toy_classify(x1, x2, t0, epsilon, cfg)?;
    Ok(NonExitingResult {
        x1,
        x2,
        t0,
        epsilon,
        bracket_width: hi - lo,
        dwell,
        left_endpoint_dwell: dl,
        right_endpoint_dwell: dr,
        history,
    })
}

/// Field samples `(x1, x2, f1, f2)` on an `n x n` lattice over the square.
pub fn toy_quiver(t: f64, epsilon: f64, n: usize) -> Vec<[f64; 4]> {
    let n = n.max(2);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = [-1.0 + 2.0 * i as f64 / (n - 1) as f64, -1.0 + 2.0 * j as f64 / (n - 1) as f64];
            let f = toy_rhs(t, &x, epsilon);
            out.push([x[0], x[1], f[0], f[1]]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rhs_examples() {
        assert_eq!(toy_rhs(0.3, &[1.0, 1.0], 0.0), [1.0, -1.0]);
        // the perturbation's second row, -sin(t) x1 + cos(t) x2, vanishes at (1, 0) for t = 0, pi
        let f = toy_rhs(0.0, &[1.0, 0.0], 0.6);
        assert!((f[0] - 1.6).abs() < 1e-15 && f[1].abs() < 1e-15);
        let f = toy_rhs(PI, &[1.0, 0.0], 0.6);
        assert!((f[0] - 0.4).abs() < 1e-15 && f[1].abs() < 1e-15);
    }

    #[test]
    fn endpoints_exit_on_their_sides() {
        let cfg = IntegratorConfig::default();
        for k in 0..16 {
            let t0 = k as f64 * PI / 8.0;
            assert_eq!(toy_classify(-1.0, 0.8, t0, 0.6, cfg).unwrap().0, Classification::Left);
            assert_eq!(toy_classify(1.0, 0.8, t0, 0.6, cfg).unwrap().0, Classification::Right);
        }
    }

    #[test]
    fn block_check() {
        assert!(toy_boundary_check(0.6, ToyGrid::default()).unwrap().pass);
        assert!(toy_boundary_check(0.0, ToyGrid::default()).unwrap().pass);
        let r = toy_boundary_check(0.9, ToyGrid::default()).unwrap();
        assert!(!r.pass && !r.violations.is_empty());
        assert!(ToyConfig { epsilon: 0.6, t0: 0.0 }.is_transversal());
        assert!(!ToyConfig { epsilon: 0.9, t0: 0.0 }.is_transversal());
    }

    #[test]
    fn unperturbed_saddle_converges_to_stable_axis() {
        let r = toy_find_nonexiting(0.8, 1.3, 0.0, 1e-14, IntegratorConfig::default()).unwrap();
        assert!(r.x1.abs() < 1e-14, "{}", r.x1);
    }

    #[test]
    fn quiver_size() {
        let q = toy_quiver(0.0, 0.6, 21);
        assert_eq!(q.len(), 441);
        assert_eq!(q[0][..2], [-1.0, -1.0]);
    }
}
