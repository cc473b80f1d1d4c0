use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{jacobian_at, weighted_rows, ForwardModel, Residual, StepPolicy};
use crate::identify::{check_len, project, IdentifyError, ParameterVector};
use crate::synthetic::ObservationSet;
use crate::uq::{
    covariance_and_ci, hessian_approx, identifiability_check, Identifiability, UncertaintyReport,
};

#[derive(Debug, Clone, PartialEq)]
pub struct NlsOptions {
    pub max_iterations: usize,
    /// Bound on `‖Jᵀ Wᵀ W r‖ / (1 + ‖Jᵀ Wᵀ W d‖)`.
    pub gradient_tol: f64,
    /// Relative parameter step.
    pub step_tol: f64,
    /// Relative objective change.
    pub objective_tol: f64,
    pub initial_damping: f64,
    pub steps: StepPolicy,
    pub confidence: f64,
    pub identifiability_tol: f64,
}

impl Default for NlsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tol: 1e-10,
            step_tol: 1e-8,
            objective_tol: 1e-8,
            initial_damping: 1e-3,
            steps: StepPolicy::default(),
            confidence: 0.95,
            identifiability_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Gradient,
    StepSize,
    ObjectiveChange,
    /// No damped step reduces the objective.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub parameters: ParameterVector,
    pub objective: f64,
    /// Objective after every accepted step, starting at `κ₀`.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Unweighted `r(κ*) = s(κ*) − d`.
    pub residual: Vec<f64>,
    pub weights: Vec<f64>,
    /// Unweighted `J(κ*)`.
    pub jacobian: DMatrix<f64>,
    /// `Jᵀ Wᵀ W J`.
    pub hessian: DMatrix<f64>,
    pub gradient_norm: f64,
    pub identifiability: Identifiability,
    pub uncertainty: Option<UncertaintyReport>,
    pub stop: StopReason,
    pub converged: bool,
    pub warnings: Vec<String>,
}

struct Iterate {
    kappa: Vec<f64>,
    outputs: Vec<f64>,
    residual: Residual,
}

/// Weighted nonlinear least squares by Levenberg–Marquardt with
/// Marquardt scaling and box projection.
pub fn solve_nls(
    model: &dyn ForwardModel,
    data: &ObservationSet,
    initial: &[f64],
    opts: &NlsOptions,
) -> Result<CalibrationResult, IdentifyError> {
    let meta = model.parameters().to_vec();
    check_len("initial parameters", meta.len(), initial.len())?;
    check_len("observations", model.n_outputs(), data.len())?;
    let n = meta.len();
    let weights = data.weights();
    let weighted_data = DVector::from_iterator(
        data.len(),
        data.values().iter().zip(weights).map(|(d, w)| d * w),
    );

    let mut evaluations = 0;
    let eval = |kappa: Vec<f64>, evaluations: &mut usize| -> Result<Iterate, IdentifyError> {
        *evaluations += 1;
        let outputs = model.evaluate(&kappa)?;
        let residual = Residual::from_outputs(&outputs, data);
        Ok(Iterate {
            kappa,
            outputs,
            residual,
        })
    };

    let mut start = initial.to_vec();
    project(&meta, &mut start);
    let mut current = eval(start, &mut evaluations)?;
    let mut history = vec![current.residual.objective()];
    let mut damping = opts.initial_damping;
    let mut iterations = 0;
    let mut warnings = Vec::new();
    let mut current_jacobian = None;
    let stop;

    loop {
        let jac = jacobian_at(model, &current.kappa, &current.outputs, &opts.steps)?;
        evaluations += n;
        let jw = weighted_rows(&jac, weights);
        let rw = DVector::from_column_slice(&current.residual.weighted);
        let gradient = jw.tr_mul(&rw);
        let hessian = jw.tr_mul(&jw);
        let scale = 1.0 + jw.tr_mul(&weighted_data).norm();
        if gradient.norm() / scale <= opts.gradient_tol {
            current_jacobian = Some(jac);
            stop = StopReason::Gradient;
            break;
        }
        if iterations >= opts.max_iterations {
            current_jacobian = Some(jac);
            stop = StopReason::MaxIterations;
            break;
        }
        iterations += 1;
        let f = current.residual.objective();
        let diag: Vec<f64> = (0..n)
            .map(|i| hessian[(i, i)].max(f64::MIN_POSITIVE))
            .collect();
        let mut accepted = None;
        while damping < 1e16 {
            let mut system = hessian.clone();
            for (i, d) in diag.iter().enumerate() {
                system[(i, i)] += damping * d;
            }
            let Some(chol) = system.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let delta = chol.solve(&gradient);
            let mut trial: Vec<f64> = current
                .kappa
                .iter()
                .zip(delta.iter())
                .map(|(k, d)| k - d)
                .collect();
            project(&meta, &mut trial);
            if trial.iter().any(|v| !v.is_finite()) {
                return Err(IdentifyError::Divergence {
                    iteration: iterations,
                });
            }
            match eval(trial, &mut evaluations) {
                Ok(next) if next.residual.objective() < f => {
                    damping = (damping / 10.0).max(1e-12);
                    accepted = Some(next);
                    break;
                }
                _ => damping *= 10.0,
            }
        }
        let Some(next) = accepted else {
            current_jacobian = Some(jac);
            stop = StopReason::Stalled;
            break;
        };
        let step_small = next
            .kappa
            .iter()
            .zip(&current.kappa)
            .all(|(a, b)| (a - b).abs() <= opts.step_tol * (b.abs() + opts.step_tol));
        let f_next = next.residual.objective();
        let objective_small = f - f_next <= opts.objective_tol * f;
        current = next;
        history.push(f_next);
        if step_small {
            stop = StopReason::StepSize;
            break;
        }
        if objective_small {
            stop = StopReason::ObjectiveChange;
            break;
        }
    }

    let jacobian = match current_jacobian {
        Some(j) => j,
        None => {
            evaluations += n;
            jacobian_at(model, &current.kappa, &current.outputs, &opts.steps)?
        }
    };
    let hessian = hessian_approx(&jacobian, weights);
    let jw = weighted_rows(&jacobian, weights);
    let gradient_norm = jw
        .tr_mul(&DVector::from_column_slice(&current.residual.weighted))
        .norm()
        / (1.0 + jw.tr_mul(&weighted_data).norm());
    let converged = match stop {
        StopReason::MaxIterations => false,
        StopReason::Stalled => gradient_norm <= 1e-6,
        _ => true,
    };
    if stop == StopReason::Stalled && !converged {
        warnings.push(format!(
            "no descent step found; relative gradient {gradient_norm:.3e}"
        ));
    }
    let identifiability = identifiability_check(&hessian, opts.identifiability_tol);
    if !identifiability.is_identifiable() {
        warnings.push(format!(
            "approximate Hessian is rank-deficient (eigenvalue ratio {:.3e})",
            identifiability.eigen_ratio
        ));
    }
    let mut result = CalibrationResult {
        parameters: ParameterVector::new(meta, current.kappa)?,
        objective: current.residual.objective(),
        history,
        iterations,
        evaluations,
        residual: current.residual.raw,
        weights: weights.to_vec(),
        jacobian,
        hessian,
        gradient_norm,
        identifiability,
        uncertainty: None,
        stop,
        converged,
        warnings,
    };
    match covariance_and_ci(&result, opts.confidence) {
        Ok(report) => result.uncertainty = Some(report),
        Err(e) => result.warnings.push(format!("no covariance: {e}")),
    }
    Ok(result)
}
