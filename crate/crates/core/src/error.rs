use thiserror::Error;

use crate::state::Frame;

/// Massive body involved in a close approach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Body {
    Primary,
    Secondary,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("Kepler's equation did not converge for M = {mean_anomaly}, e = {eccentricity}")]
    KeplerNonConvergence { mean_anomaly: f64, eccentricity: f64 },

    #[error("collision with the {body:?}: distance {distance:e} at s = {s}")]
    Collision { body: Body, distance: f64, s: f64 },

    #[error("non-finite state or derivative at s = {s}")]
    NonFinite { s: f64 },

    #[error("step size underflow at s = {s} (h = {h:e})")]
    StepUnderflow { s: f64, h: f64 },

    #[error("step limit of {0} exceeded")]
    StepLimit(usize),

    #[error("integrator tolerance {0:e} outside [1e-14, 1e-6]")]
    Tolerance(f64),

    #[error("frame mismatch: expected {expected:?}, found {found:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("initial state lies outside the region (face {face}, margin {margin:e})")]
    StartOutside { face: String, margin: f64 },

    #[error("event root refinement failed after {0} iterations")]
    RootRefinement(usize),

    #[error("no section crossing within the budget of {budget}")]
    NoCrossing { budget: f64 },

    #[error("position lies in the forbidden region: 2*Phi - C = {0:e}")]
    ForbiddenRegion(f64),

    #[error("invalid bisection bracket: {0}")]
    InvalidBracket(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
