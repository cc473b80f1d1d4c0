use nalgebra::DVector;

use super::{jacobian_at, weighted_rows, ForwardModel, Residual, StepPolicy};
use crate::identify::{check_len, project, IdentifyError};
use crate::linalg::power_iteration;
use crate::synthetic::ObservationSet;

/// Step size `μ_k` of a Landweber iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Fixed `μ`; must satisfy `μ ‖W J‖² < 2` at every iterate.
    Constant(f64),
    /// `μ_k = fraction · 2 / ‖W J(κ_k)‖²` with the norm from power iteration.
    Spectral { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandweberOptions {
    pub step: StepRule,
    pub max_iterations: usize,
    /// Stop when every component of the update is below `tol · (|κ_i| + tol)`.
    pub tol: f64,
    /// Parameter scales `D`; the iteration runs on `θ = D⁻¹ κ`. Defaults to
    /// `|κ₀|`, with 1 for zero entries.
    pub scaling: Option<Vec<f64>>,
    pub steps: StepPolicy,
    pub max_halvings: usize,
}

impl Default for LandweberOptions {
    fn default() -> Self {
        Self {
            step: StepRule::Spectral { fraction: 0.9 },
            max_iterations: 10_000,
            tol: 1e-10,
            scaling: None,
            steps: StepPolicy::default(),
            max_halvings: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandweberHistory {
    pub iterates: Vec<Vec<f64>>,
    pub objectives: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub converged: bool,
}

impl LandweberHistory {
    pub fn last(&self) -> &[f64] {
        self.iterates
            .last()
            .expect("history starts with the initial iterate")
    }

    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }
}

/// `κ_{k+1} = κ_k − μ_k D² Jᵀ Wᵀ W (s(κ_k) − d)` with step halving until the
/// objective decreases.
pub fn landweber_reduced(
    model: &dyn ForwardModel,
    data: &ObservationSet,
    initial: &[f64],
    opts: &LandweberOptions,
) -> Result<LandweberHistory, IdentifyError> {
    let meta = model.parameters().to_vec();
    let n = meta.len();
    check_len("initial parameters", n, initial.len())?;
    check_len("observations", model.n_outputs(), data.len())?;
    let scale = match &opts.scaling {
        Some(s) => {
            check_len("parameter scaling", n, s.len())?;
            s.clone()
        }
        None => initial
            .iter()
            .map(|v| if *v == 0.0 { 1.0 } else { v.abs() })
            .collect(),
    };
    let mut kappa = initial.to_vec();
    project(&meta, &mut kappa);
    let mut outputs = model.evaluate(&kappa)?;
    let mut res = Residual::from_outputs(&outputs, data);
    let mut history = LandweberHistory {
        iterates: vec![kappa.clone()],
        objectives: vec![res.objective()],
        step_sizes: Vec::new(),
        converged: false,
    };
    for iteration in 1..=opts.max_iterations {
        let jac = jacobian_at(model, &kappa, &outputs, &opts.steps)?;
        let mut jw = weighted_rows(&jac, data.weights());
        for (c, s) in scale.iter().enumerate() {
            jw.column_mut(c).scale_mut(*s);
        }
        let gradient = jw.tr_mul(&DVector::from_column_slice(&res.weighted));
        let gram = jw.tr_mul(&jw);
        let norm2 = power_iteration(
            n,
            |v: &[f64]| (&gram * DVector::from_column_slice(v)).as_slice().to_vec(),
            500,
            1e-10,
        );
        let mut mu = match opts.step {
            StepRule::Constant(mu) => {
                if mu * norm2 >= 2.0 {
                    return Err(IdentifyError::Options(format!(
                        "step {mu:e} violates the Landweber bound 2/|J|^2 = {:e}",
                        2.0 / norm2
                    )));
                }
                mu
            }
            StepRule::Spectral { fraction } => fraction * 2.0 / norm2,
        };
        let update: Vec<f64> = (0..n).map(|i| scale[i] * gradient[i]).collect();
        if (0..n).all(|i| (mu * update[i]).abs() <= opts.tol * (kappa[i].abs() + opts.tol)) {
            history.converged = true;
            break;
        }
        let f = res.objective();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial: Vec<f64> = (0..n).map(|i| kappa[i] - mu * update[i]).collect();
            project(&meta, &mut trial);
            if trial.iter().any(|v| !v.is_finite()) {
                return Err(IdentifyError::Divergence { iteration });
            }
            if let Ok(s) = model.evaluate(&trial) {
                let r = Residual::from_outputs(&s, data);
                if r.objective() < f {
                    accepted = Some((trial, s, r));
                    break;
                }
            }
            mu *= 0.5;
        }
        let Some((trial, s, r)) = accepted else {
            history.converged = true;
            break;
        };
        kappa = trial;
        outputs = s;
        res = r;
        history.iterates.push(kappa.clone());
        history.objectives.push(res.objective());
        history.step_sizes.push(mu);
    }
    Ok(history)
}
