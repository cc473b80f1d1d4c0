//! Parameter identification: reduced least squares, virtual fields and
//! all-at-once formulations.

pub mod aao;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod reduced;
pub mod vfm;

use std::fmt;

use thiserror::Error;

use crate::fem::FemError;
use crate::linalg::SolverError;
use crate::synthetic::DataError;

#[derive(Debug, Error)]
pub enum IdentifyError {
    #[error("forward model failed at {kappa:?}: {message}")]
    Forward { kappa: Vec<f64>, message: String },
    #[error("sensitivity for `{name}` failed: {message}")]
    Jacobian { name: String, message: String },
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("iteration {iteration} produced a non-finite iterate")]
    Divergence { iteration: usize },
    #[error("parameters are not identifiable: {0}")]
    Identifiability(String),
    #[error("invalid option: {0}")]
    Options(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

impl From<SolverError> for IdentifyError {
    fn from(e: SolverError) -> Self {
        IdentifyError::Fem(FemError::Solver(e))
    }
}

pub(crate) fn check_len(
    what: &'static str,
    expected: usize,
    got: usize,
) -> Result<(), IdentifyError> {
    if expected == got {
        Ok(())
    } else {
        Err(IdentifyError::Dimension {
            what,
            expected,
            got,
        })
    }
}

/// Name, unit and box bounds of one material parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub unit: String,
    pub lower: f64,
    pub upper: f64,
}

impl Parameter {
    pub fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.to_string(),
            unit: unit.to_string(),
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn bounded(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }
}

/// Named parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub meta: Vec<Parameter>,
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(meta: Vec<Parameter>, values: Vec<f64>) -> Result<Self, IdentifyError> {
        check_len("parameter values", meta.len(), values.len())?;
        Ok(Self { meta, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.meta
            .iter()
            .position(|p| p.name == name)
            .map(|i| self.values[i])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.meta.iter().map(|p| p.name.as_str())
    }
}

impl fmt::Display for ParameterVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (p, v)) in self.meta.iter().zip(&self.values).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} = {v}", p.name)?;
        }
        Ok(())
    }
}

pub(crate) fn project(meta: &[Parameter], kappa: &mut [f64]) {
    for (p, v) in meta.iter().zip(kappa.iter_mut()) {
        *v = p.clamp(*v);
    }
}
