//! Experiment configuration files.

use std::path::PathBuf;

use isonbhd::integrate::IntegratorConfig;
use isonbhd::kepler::{Normalization, SystemParams, EARTH_MOON_MU, EARTH_MOON_VEL_UNIT_MPS, LUNAR_ECCENTRICITY};
use isonbhd::models::{Model, ModelKind};
use isonbhd::neighborhood::{NeighborhoodSpec, TangentGrid, Window, DEFAULT_BUDGET};
use isonbhd::search::{SectionKind, SphereGrid};
use isonbhd::toy::ToyGrid;
use isonbhd::Frame;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub mu: f64,
    /// Eccentricity; defaults to zero for the CRTBP and to the lunar value otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(default)]
    pub normalization: Normalization,
    pub vel_unit_mps: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { mu: EARTH_MOON_MU, e: None, normalization: Normalization::Periapsis, vel_unit_mps: EARTH_MOON_VEL_UNIT_MPS }
    }
}

fn default_model() -> ModelKind {
    ModelKind::ErtbpPulsating
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    /// Defaults to the standard neighborhood of the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighborhood: Option<NeighborhoodSpec>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Verify(VerifyParams),
    Bisect(BisectParams),
    Track(TrackParams),
    Sphere(SphereParams),
    Toy(ToyParams),
    Convert(ConvertParams),
    Hill(HillParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Verify(_) => "verify",
            Experiment::Bisect(_) => "bisect",
            Experiment::Track(_) => "track",
            Experiment::Sphere(_) => "sphere",
            Experiment::Toy(_) => "toy",
            Experiment::Convert(_) => "convert",
            Experiment::Hill(_) => "hill",
        }
    }
}

fn c_default() -> f64 {
    3.14
}
fn angle_tol_default() -> f64 {
    1e-12
}
fn circle_samples_default() -> usize {
    72
}
fn refine_tol_default() -> f64 {
    1e-10
}
fn budget_default() -> f64 {
    DEFAULT_BUDGET
}
fn trace_default() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    /// Initial true anomalies; ignored by the CRTBP.
    #[serde(default = "default_epochs")]
    pub epochs: Vec<f64>,
    #[serde(default = "default_energies")]
    pub energies: Vec<f64>,
    #[serde(default)]
    pub grid: TangentGrid,
    #[serde(default = "budget_default")]
    pub budget: f64,
}

fn default_epochs() -> Vec<f64> {
    isonbhd::neighborhood::VerifySettings::default().epochs
}
fn default_energies() -> Vec<f64> {
    vec![3.10, 3.14, 3.17]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectParams {
    pub base: [f64; 2],
    #[serde(default = "c_default")]
    pub c: f64,
    #[serde(default)]
    pub nu0: f64,
    /// Velocity-circle samples used to find left/right brackets.
    #[serde(default = "circle_samples_default")]
    pub samples: usize,
    /// Which bracket to refine, in order of increasing angle.
    #[serde(default)]
    pub bracket: usize,
    #[serde(default = "angle_tol_default")]
    pub tol: f64,
    #[serde(default = "budget_default")]
    pub budget: f64,
    /// Points written for the converged trajectory.
    #[serde(default = "trace_default")]
    pub trace_points: usize,
}

/// Where a tracking run starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case")]
pub enum TrackStart {
    /// Bisected velocity-circle boundary at a planar base point.
    Circle {
        base: [f64; 2],
        #[serde(default = "c_default")]
        c: f64,
        #[serde(default)]
        nu0: f64,
        #[serde(default = "circle_samples_default")]
        samples: usize,
        #[serde(default)]
        bracket: usize,
    },
    /// Intersection of the forward and backward exit boundaries on the
    /// velocity sphere with the longest dwell.
    Sphere {
        base: [f64; 3],
        #[serde(default = "c_default")]
        c: f64,
        #[serde(default)]
        nu0: f64,
        #[serde(default)]
        grid: SphereGrid,
        #[serde(default = "refine_tol_default")]
        refine_tol: f64,
    },
    /// An explicit state in the model's frame.
    State { s: f64, y: [f64; 6] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackParams {
    pub start: TrackStart,
    /// Defaults to 100 for planar and 500 for spatial runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_crossings: Option<usize>,
    /// Defaults to `y = 0` for circle starts and `z = 0` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionKind>,
    #[serde(default = "angle_tol_default")]
    pub angle_tol: f64,
    #[serde(default = "initial_step_default")]
    pub initial_step: f64,
    #[serde(default = "ring_default")]
    pub ring: usize,
    #[serde(default = "budget_default")]
    pub budget: f64,
    /// Frames of the trajectory files; defaults to the model frame.
    #[serde(default)]
    pub frames: Vec<Frame>,
    /// Samples per arc between crossings; zero skips the trajectory files.
    #[serde(default = "per_arc_default")]
    pub per_arc: usize,
}

fn initial_step_default() -> f64 {
    1e-10
}
fn ring_default() -> usize {
    64
}
fn per_arc_default() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereParams {
    pub base: [f64; 3],
    #[serde(default = "c_default")]
    pub c: f64,
    #[serde(default)]
    pub nu0: f64,
    #[serde(default)]
    pub grid: SphereGrid,
    #[serde(default = "refine_tol_default")]
    pub refine_tol: f64,
    #[serde(default = "budget_default")]
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyParams {
    #[serde(default = "toy_epsilon_default")]
    pub epsilon: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "toy_x2_default")]
    pub x2: f64,
    #[serde(default = "toy_tol_default")]
    pub tol: f64,
    /// Dwell the converged orbit must reach.
    #[serde(default = "toy_dwell_default")]
    pub dwell_target: f64,
    #[serde(default)]
    pub grid: ToyGrid,
    /// Lattice size of the field samples.
    #[serde(default = "toy_quiver_default")]
    pub quiver: usize,
    #[serde(default = "trace_default")]
    pub trace_points: usize,
}

fn toy_epsilon_default() -> f64 {
    0.6
}
fn toy_x2_default() -> f64 {
    0.8
}
fn toy_tol_default() -> f64 {
    1e-14
}
fn toy_dwell_default() -> f64 {
    25.0
}
fn toy_quiver_default() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertParams {
    /// Trajectory table, relative to the config file.
    pub input: PathBuf,
    pub to: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HillParams {
    #[serde(default = "default_energies")]
    pub energies: Vec<f64>,
    #[serde(default = "hill_resolution_default")]
    pub resolution: usize,
    #[serde(default = "Window::l2")]
    pub window: Window,
}

fn hill_resolution_default() -> usize {
    400
}

impl ExperimentConfig {
    /// Parses a configuration; errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| CliError::Usage(format!("config: {m}"));
        let model = self.model().map_err(|e| usage(e.to_string()))?;
        self.integrator.validate().map_err(|e| usage(e.to_string()))?;
        if matches!(self.experiment, Experiment::Verify(_) | Experiment::Bisect(_) | Experiment::Track(_) | Experiment::Sphere(_)) {
            if !matches!(model.kind, ModelKind::Crtbp | ModelKind::ErtbpPulsating) {
                return Err(usage(format!("{} runs in the crtbp or ertbp_pulsating model", self.experiment.name())));
            }
            self.neighborhood().validate(model.params.mu).map_err(|e| usage(e.to_string()))?;
        }
        if self.jobs == Some(0) {
            return Err(usage("jobs must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> isonbhd::Result<Model> {
        let s = &self.system;
        let e = match (self.model, s.e) {
            (ModelKind::Crtbp, Some(e)) if e != 0.0 => {
                return Err(isonbhd::Error::InvalidParams(format!("the CRTBP has zero eccentricity, got {e}")))
            }
            (ModelKind::Crtbp, _) => 0.0,
            (_, Some(e)) => e,
            (_, None) => LUNAR_ECCENTRICITY,
        };
        let params = SystemParams::new(s.mu, e, s.normalization)?.with_vel_unit(s.vel_unit_mps);
        Ok(Model::new(self.model, params))
    }

    pub fn neighborhood(&self) -> NeighborhoodSpec {
        self.neighborhood.unwrap_or(match self.model {
            ModelKind::Crtbp => NeighborhoodSpec::crtbp(),
            _ => NeighborhoodSpec::ertbp(),
        })
    }

    /// SHA-256 of the canonical JSON of every setting that affects results.
    pub fn sha256(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = None;
        canon.jobs = None;
        let text = serde_json::to_string(&canon).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
