//! Reduced approach: the forward model is solved exactly and only the
//! parameters are optimized through the parameter-to-observable map.

mod landweber;
mod lm;
mod plate;
mod uniaxial;

pub use landweber::{landweber_reduced, LandweberHistory, LandweberOptions, StepRule};
pub use lm::{solve_nls, CalibrationResult, NlsOptions, StopReason};
pub use plate::{ElasticCoordinates, PlateModel};
pub use uniaxial::UniaxialPlasticModel;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{check_len, IdentifyError, Parameter};
use crate::synthetic::ObservationSet;

/// Parameter-to-observable map `κ ↦ s(κ)`.
pub trait ForwardModel: Sync {
    fn parameters(&self) -> &[Parameter];

    fn n_outputs(&self) -> usize;

    fn evaluate(&self, kappa: &[f64]) -> Result<Vec<f64>, IdentifyError>;

    fn n_parameters(&self) -> usize {
        self.parameters().len()
    }
}

/// Affine model `s(κ) = A κ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    params: Vec<Parameter>,
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl LinearModel {
    pub fn new(
        params: Vec<Parameter>,
        matrix: DMatrix<f64>,
        offset: DVector<f64>,
    ) -> Result<Self, IdentifyError> {
        check_len("model columns", params.len(), matrix.ncols())?;
        check_len("model offset", matrix.nrows(), offset.len())?;
        Ok(Self {
            params,
            matrix,
            offset,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl ForwardModel for LinearModel {
    fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    fn n_outputs(&self) -> usize {
        self.matrix.nrows()
    }

    fn evaluate(&self, kappa: &[f64]) -> Result<Vec<f64>, IdentifyError> {
        check_len("parameter vector", self.params.len(), kappa.len())?;
        Ok(
            (&self.matrix * DVector::from_column_slice(kappa) + &self.offset)
                .as_slice()
                .to_vec(),
        )
    }
}

/// Model given by a closure.
pub struct ClosureModel<F> {
    params: Vec<Parameter>,
    outputs: usize,
    f: F,
}

impl<F> ClosureModel<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, IdentifyError> + Sync,
{
    pub fn new(params: Vec<Parameter>, outputs: usize, f: F) -> Self {
        Self { params, outputs, f }
    }
}

impl<F> ForwardModel for ClosureModel<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, IdentifyError> + Sync,
{
    fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    fn n_outputs(&self) -> usize {
        self.outputs
    }

    fn evaluate(&self, kappa: &[f64]) -> Result<Vec<f64>, IdentifyError> {
        let s = (self.f)(kappa)?;
        check_len("model output", self.outputs, s.len())?;
        Ok(s)
    }
}

/// Unweighted residual `r = s(κ) − d` and weighted residual `W r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub raw: Vec<f64>,
    pub weighted: Vec<f64>,
}

impl Residual {
    pub fn from_outputs(s: &[f64], data: &ObservationSet) -> Self {
        let raw: Vec<f64> = s.iter().zip(data.values()).map(|(s, d)| s - d).collect();
        let weighted = raw.iter().zip(data.weights()).map(|(r, w)| r * w).collect();
        Self { raw, weighted }
    }

    /// `½‖W r‖²`.
    pub fn objective(&self) -> f64 {
        0.5 * self.weighted.iter().map(|r| r * r).sum::<f64>()
    }
}

pub fn residual(
    model: &dyn ForwardModel,
    data: &ObservationSet,
    kappa: &[f64],
) -> Result<Residual, IdentifyError> {
    check_len("observations", model.n_outputs(), data.len())?;
    Ok(Residual::from_outputs(&model.evaluate(kappa)?, data))
}

/// Forward-difference step per parameter: `max(relative·|κ_i|, absolute)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            relative: 1e-6,
            absolute: 1e-8,
        }
    }
}

impl StepPolicy {
    pub fn step(&self, value: f64) -> f64 {
        (self.relative * value.abs()).max(self.absolute)
    }
}

/// Model output at `κ` and its forward-difference Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    pub outputs: Vec<f64>,
    pub jacobian: DMatrix<f64>,
}

/// External numerical differentiation with `n_κ + 1` model evaluations.
/// Perturbed evaluations run in parallel. A step that would leave the upper
/// bound is taken backwards.
pub fn jacobian_external_nd(
    model: &dyn ForwardModel,
    kappa: &[f64],
    steps: &StepPolicy,
) -> Result<Sensitivity, IdentifyError> {
    let outputs = model.evaluate(kappa)?;
    let jacobian = jacobian_at(model, kappa, &outputs, steps)?;
    Ok(Sensitivity { outputs, jacobian })
}

pub(crate) fn jacobian_at(
    model: &dyn ForwardModel,
    kappa: &[f64],
    base: &[f64],
    steps: &StepPolicy,
) -> Result<DMatrix<f64>, IdentifyError> {
    let params = model.parameters();
    check_len("parameter vector", params.len(), kappa.len())?;
    let columns: Vec<Vec<f64>> = (0..kappa.len())
        .into_par_iter()
        .map(|i| {
            let mut h = steps.step(kappa[i]);
            if kappa[i] + h > params[i].upper {
                h = -h;
            }
            let mut shifted = kappa.to_vec();
            shifted[i] += h;
            let h = shifted[i] - kappa[i];
            let s = model
                .evaluate(&shifted)
                .map_err(|e| IdentifyError::Jacobian {
                    name: params[i].name.clone(),
                    message: e.to_string(),
                })?;
            Ok(s.iter().zip(base).map(|(a, b)| (a - b) / h).collect())
        })
        .collect::<Result<_, IdentifyError>>()?;
    Ok(DMatrix::from_fn(base.len(), kappa.len(), |r, c| {
        columns[c][r]
    }))
}

pub(crate) fn weighted_rows(j: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(j.nrows(), j.ncols(), |r, c| weights[r] * j[(r, c)])
}

#[cfg(test)]
mod tests;
