//! Frequentist and Bayesian uncertainty quantification.

mod ensemble;
mod frequentist;
mod hierarchical;
mod propagation;
mod two_step;

pub use ensemble::{ensemble_sample, EnsembleChain, EnsembleOptions, LogDensity};
pub use frequentist::{
    covariance_and_ci, hessian_approx, identifiability_check, log_likelihood, z_value,
    Identifiability, Verdict,
};
pub use hierarchical::{
    hierarchical_two_step_bayes, HierarchicalOptions, HierarchicalResult, InnerSummary,
};
pub use propagation::{gaussian_error_propagation, monte_carlo_convert, ConversionSummary};
pub use two_step::{two_step_covariance, two_step_sensitivities, TwoStepSensitivities};

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::identify::{IdentifyError, Parameter};

#[derive(Debug, Error)]
pub enum UqError {
    #[error("parameters are not identifiable: {0}")]
    Identifiability(String),
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("confidence level {0} is outside (0, 1)")]
    Level(f64),
    #[error("covariance is not positive semidefinite: eigenvalue {0:e}")]
    NotPsd(f64),
    #[error("invalid sampler setting: {0}")]
    Sampler(String),
    #[error(transparent)]
    Identify(#[from] IdentifyError),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), UqError> {
    if expected == got {
        Ok(())
    } else {
        Err(UqError::Dimension {
            what,
            expected,
            got,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UqMethod {
    Asymptotic,
    TwoStep,
    GaussProp,
    MonteCarlo,
    Bayes,
}

/// One row of an uncertainty table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterUncertainty {
    pub name: String,
    pub unit: String,
    pub estimate: f64,
    /// Standard deviation `Δ` from the one-step (or sampled) covariance.
    pub std: f64,
    /// Standard deviation `δ` including the propagated elastic uncertainty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_step_std: Option<f64>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub method: UqMethod,
    pub level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub det_hessian: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_ratio: Option<f64>,
    pub parameters: Vec<ParameterUncertainty>,
    pub covariance: Vec<Vec<f64>>,
}

impl UncertaintyReport {
    /// Rows with symmetric intervals `estimate ± z·std` from a covariance.
    pub fn from_covariance(
        method: UqMethod,
        meta: &[Parameter],
        estimate: &[f64],
        covariance: &DMatrix<f64>,
        level: f64,
    ) -> Result<Self, UqError> {
        check_len("estimate", meta.len(), estimate.len())?;
        check_len("covariance", meta.len(), covariance.nrows())?;
        let z = z_value(level)?;
        let parameters = meta
            .iter()
            .zip(estimate)
            .enumerate()
            .map(|(i, (p, &est))| {
                let std = covariance[(i, i)].max(0.0).sqrt();
                ParameterUncertainty {
                    name: p.name.clone(),
                    unit: p.unit.clone(),
                    estimate: est,
                    std,
                    two_step_std: None,
                    lower: est - z * std,
                    upper: est + z * std,
                }
            })
            .collect();
        Ok(Self {
            method,
            level,
            s2: None,
            det_hessian: None,
            eigen_ratio: None,
            parameters,
            covariance: matrix_rows(covariance),
        })
    }

    pub fn std(&self, name: &str) -> Option<f64> {
        self.parameters
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.std)
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.covariance.len();
        DMatrix::from_fn(n, n, |i, j| self.covariance[i][j])
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
