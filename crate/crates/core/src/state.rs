//! Phase-space states tagged with the coordinate system they live in.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate system of a [`PhaseState`].
///
/// The tag fixes the meaning of the independent variable: `Inertial`,
/// `ConstantRotating` and `VariableRotatingTime` carry time with dotted
/// velocities, `VariableRotating` and `Pulsating` carry true anomaly with
/// velocities differentiated by `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Inertial,
    ConstantRotating,
    VariableRotating,
    VariableRotatingTime,
    Pulsating,
}

impl Frame {
    pub fn uses_true_anomaly(self) -> bool {
        matches!(self, Frame::VariableRotating | Frame::Pulsating)
    }

    pub fn name(self) -> &'static str {
        match self {
            Frame::Inertial => "inertial",
            Frame::ConstantRotating => "constant_rotating",
            Frame::VariableRotating => "variable_rotating",
            Frame::VariableRotatingTime => "variable_rotating_time",
            Frame::Pulsating => "pulsating",
        }
    }
}

impl std::str::FromStr for Frame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "inertial" => Frame::Inertial,
            "constant_rotating" | "constant-rotating" | "crtbp" => Frame::ConstantRotating,
            "variable_rotating" | "variable-rotating" => Frame::VariableRotating,
            "variable_rotating_time" | "variable-rotating-time" => Frame::VariableRotatingTime,
            "pulsating" => Frame::Pulsating,
            other => return Err(Error::InvalidInput(format!("unknown frame `{other}`"))),
        })
    }
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Independent variable, position and velocity in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub s: f64,
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub frame: Frame,
}

impl PhaseState {
    pub fn new(s: f64, pos: Vector3<f64>, vel: Vector3<f64>, frame: Frame) -> Self {
        Self { s, pos, vel, frame }
    }

    pub fn from_array(s: f64, y: &[f64; 6], frame: Frame) -> Self {
        Self {
            s,
            pos: Vector3::new(y[0], y[1], y[2]),
            vel: Vector3::new(y[3], y[4], y[5]),
            frame,
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.pos.x, self.pos.y, self.pos.z, self.vel.x, self.vel.y, self.vel.z]
    }

    pub fn expect_frame(&self, expected: Frame) -> Result<()> {
        if self.frame == expected {
            Ok(())
        } else {
            Err(Error::FrameMismatch { expected, found: self.frame })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn speed(&self) -> f64 {
        self.vel.norm()
    }
}
