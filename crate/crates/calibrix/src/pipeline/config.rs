//! Stage configuration files (TOML). Relative paths are resolved against the
//! directory of the config file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::identify::aao::{BlockSolver, DEFAULT_INITIAL_COEFFICIENTS};
use crate::identify::reduced::ElasticCoordinates;
use crate::identify::vfm::DEFAULT_RESULTANT_WEIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Plate,
    Uniaxial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Data CSV.
    pub output: PathBuf,
    /// Defaults to the data path with extension `manifest.toml`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Material parameter table: `E`/`nu` or `K`/`G`, optionally `k`, `b`,
    /// `c`, `eta`, `r`.
    pub truth: toml::Table,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plate: Option<PlateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniaxial: Option<UniaxialSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateSection {
    /// Mesh whose nodes are the measurement points.
    pub mesh: PathBuf,
    /// Mesh of the reference solve.
    pub fine_mesh: PathBuf,
    /// Total edge force in N.
    #[serde(default = "default_load")]
    pub load: f64,
    /// Displacement noise in mm.
    #[serde(default)]
    pub sigma: f64,
}

fn default_load() -> f64 {
    1500.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniaxialSection {
    #[serde(default = "one")]
    pub exp: usize,
    pub max_strain: f64,
    pub steps: usize,
    #[serde(default = "unit_f64")]
    pub dt: f64,
    #[serde(default)]
    pub stress_noise: f64,
    /// Lateral strain rows are written only when this is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_noise: Option<f64>,
}

fn one() -> usize {
    1
}

fn unit_f64() -> f64 {
    1.0
}

/// Identification method of `calibrate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Reduced,
    Vfm,
    AaoFem,
    AaoVfm,
    LandweberReduced,
    LandweberAao,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Reduced,
        Method::Vfm,
        Method::AaoFem,
        Method::AaoVfm,
        Method::LandweberReduced,
        Method::LandweberAao,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Reduced => "reduced",
            Method::Vfm => "vfm",
            Method::AaoFem => "aao-fem",
            Method::AaoVfm => "aao-vfm",
            Method::LandweberReduced => "landweber-reduced",
            Method::LandweberAao => "landweber-aao",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub data: PathBuf,
    pub mesh: PathBuf,
    /// Report file.
    pub output: PathBuf,
    #[serde(default)]
    pub reduced: ReducedSection,
    #[serde(default)]
    pub vfm: VfmSection,
    #[serde(default)]
    pub aao: AaoSection,
    #[serde(default)]
    pub landweber: LandweberSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReducedSection {
    /// Start in the chosen coordinates.
    pub initial: [f64; 2],
    pub coordinates: ElasticCoordinates,
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub objective_tol: f64,
    pub nd_relative: f64,
    pub nd_absolute: f64,
    pub confidence: f64,
}

impl Default for ReducedSection {
    fn default() -> Self {
        Self {
            initial: [180_000.0, 0.35],
            coordinates: ElasticCoordinates::YoungPoisson,
            max_iterations: 100,
            gradient_tol: 1e-10,
            step_tol: 1e-8,
            objective_tol: 1e-8,
            nd_relative: 1e-6,
            nd_absolute: 1e-8,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VfmSection {
    pub sigma_r: f64,
}

impl Default for VfmSection {
    fn default() -> Self {
        Self {
            sigma_r: DEFAULT_RESULTANT_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AaoSection {
    pub sigma_r: f64,
    /// Formulation default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_d: Option<f64>,
    pub gamma_s: f64,
    pub gamma_p: f64,
    /// `(C11, C12)` of the first start.
    pub initial: [f64; 2],
    pub starts: usize,
    /// Relative spread of the additional starts around `initial`.
    pub start_spread: f64,
    pub block_solver: BlockSolver,
    pub max_iterations: usize,
}

impl Default for AaoSection {
    fn default() -> Self {
        Self {
            sigma_r: DEFAULT_RESULTANT_WEIGHT,
            sigma_s: None,
            sigma_d: None,
            gamma_s: 0.0,
            gamma_p: 0.0,
            initial: DEFAULT_INITIAL_COEFFICIENTS,
            starts: 1,
            start_spread: 0.1,
            block_solver: BlockSolver::GaussNewton,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandweberSection {
    /// Defaults to 2000 for the reduced and 100000 for the all-at-once variant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    /// `μ_k = fraction · 2 / ‖J‖²`.
    pub fraction: f64,
    pub tol: f64,
}

impl Default for LandweberSection {
    fn default() -> Self {
        Self {
            max_iterations: None,
            fraction: 0.9,
            tol: 1e-10,
        }
    }
}

/// Method of `uq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UqStage {
    Asymptotic,
    TwoStep,
    Bayes,
    Hierarchical,
}

impl UqStage {
    pub const ALL: [UqStage; 4] = [
        UqStage::Asymptotic,
        UqStage::TwoStep,
        UqStage::Bayes,
        UqStage::Hierarchical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UqStage::Asymptotic => "asymptotic",
            UqStage::TwoStep => "two-step",
            UqStage::Bayes => "bayes",
            UqStage::Hierarchical => "hierarchical",
        }
    }
}

impl fmt::Display for UqStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UqStage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UqStage::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown uq method `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UqConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<UqStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Report file.
    pub output: PathBuf,
    /// Chain CSV of `bayes`, per-draw CSV of `hierarchical`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<PathBuf>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Monte-Carlo sample size of the `(E, ν) → (K, G)` conversion.
    #[serde(default = "default_conversion_samples")]
    pub conversion_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plate: Option<PlateUqSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniaxial: Option<UniaxialUqSection>,
    #[serde(default)]
    pub sampler: SamplerSection,
}

fn default_confidence() -> f64 {
    0.95
}

fn default_conversion_samples() -> usize {
    4000
}

/// Inputs of the plate methods (`asymptotic`, `bayes`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateUqSection {
    pub data: PathBuf,
    pub mesh: PathBuf,
    /// Report of a reduced calibration; its estimate is the starting point.
    pub calibration: PathBuf,
    /// Prescribed displacement noise; the residual estimate `s` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// Inputs of the uniaxial two-step methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniaxialUqSection {
    /// Elastic test with `sig` and `epsq` rows.
    pub elastic_data: PathBuf,
    /// Plastic test with `sig` rows.
    pub plastic_data: PathBuf,
    pub stress_noise: f64,
    pub lateral_noise: f64,
    #[serde(default = "unit_f64")]
    pub dt: f64,
    /// `(K, G)`.
    pub elastic_initial: [f64; 2],
    /// `(k, b, c)`.
    pub plastic_initial: [f64; 3],
    #[serde(default)]
    pub viscosity: f64,
    #[serde(default = "unit_f64")]
    pub exponent: f64,
    /// Number of elastic draws of the hierarchical method.
    #[serde(default = "default_outer")]
    pub n_outer: usize,
}

fn default_outer() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub walkers: usize,
    pub steps: usize,
    pub stretch: f64,
    pub burn_in: f64,
    /// Half-width of the uniform elastic prior relative to the estimate.
    pub elastic_prior: f64,
    /// Half-width of the uniform plastic prior relative to the estimate.
    pub plastic_prior: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            walkers: 16,
            steps: 1000,
            stretch: 2.0,
            burn_in: 0.5,
            elastic_prior: 0.1,
            plastic_prior: 0.2,
        }
    }
}
