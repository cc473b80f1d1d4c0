//! Report files written by the pipeline stages.

use serde::Serialize;

use crate::identify::aao::AaoWeights;
use crate::identify::reduced::StopReason;
use crate::uq::{ParameterUncertainty, UncertaintyReport};

pub const TOOL: &str = "calibrix";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fields shared by every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            config_hash,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub name: String,
    pub unit: String,
    pub value: f64,
}

impl Estimate {
    pub fn new(name: &str, unit: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_misfit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub determinant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_ratio: Option<f64>,
}

/// Outcome of one all-at-once start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartSummary {
    pub initial: [f64; 2],
    pub young: f64,
    pub poisson: f64,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub stage: &'static str,
    pub method: String,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    pub warnings: Vec<String>,
    /// Estimate in the identification coordinates.
    pub parameters: Vec<Estimate>,
    /// Plane-stress `(E, ν)` and `(C11, C12)` of the estimate.
    pub elastic: Vec<Estimate>,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<AaoWeights>,
    /// Objective after every accepted iterate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objectives: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub starts: Vec<StartSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyReport>,
}

/// Parameter derived from the estimate, e.g. `K(E, ν)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedEstimate {
    pub name: String,
    pub unit: String,
    pub estimate: f64,
    /// First-order propagated standard deviation.
    pub propagated_std: f64,
    pub monte_carlo_mean: f64,
    pub monte_carlo_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerSummary {
    pub walkers: usize,
    pub steps: usize,
    pub stretch: f64,
    pub burn_in: f64,
    pub acceptance_rate: f64,
    pub samples: usize,
    /// Posterior standard deviation over the asymptotic one, per parameter.
    pub std_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchicalSummary {
    pub draws: usize,
    pub skipped: usize,
    pub mean_of_means: Vec<f64>,
    pub spread_of_means: Vec<f64>,
    pub mean_of_stds: Vec<f64>,
}

/// Uncertainty table with one row per parameter: estimate, `Δ`, `δ` and
/// interval bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UqReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub stage: &'static str,
    pub method: String,
    pub confidence: f64,
    pub warnings: Vec<String>,
    pub parameters: Vec<ParameterUncertainty>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub elastic: Vec<ParameterUncertainty>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub derived: Vec<DerivedEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hierarchical: Option<HierarchicalSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub covariance: Vec<Vec<f64>>,
}

/// Data-generation manifest: everything needed to regenerate the data file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: String,
    pub seed: u64,
    pub data: String,
    pub truth: toml::Table,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plate: Option<PlateManifest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniaxial: Option<toml::Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateManifest {
    pub sigma: f64,
    pub load: f64,
    pub mesh: String,
    pub mesh_sha256: String,
    pub mesh_elements: usize,
    pub fine_mesh: String,
    pub fine_mesh_sha256: String,
    pub fine_mesh_elements: usize,
}
