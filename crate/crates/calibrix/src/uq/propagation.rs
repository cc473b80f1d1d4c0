use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{check_len, UqError};
use crate::identify::reduced::StepPolicy;
use crate::materials::convert_e_nu_to_k_g;
use crate::rng;

/// First-order propagation `δF = sqrt(Σ_k (∂F/∂κ_k Δκ_k)²)` with
/// forward-difference partial derivatives; correlations are ignored.
pub fn gaussian_error_propagation(
    f: impl Fn(&[f64]) -> f64,
    estimate: &[f64],
    std: &[f64],
    steps: &StepPolicy,
) -> Result<f64, UqError> {
    check_len("parameter uncertainties", estimate.len(), std.len())?;
    let base = f(estimate);
    let mut sum = 0.0;
    for k in 0..estimate.len() {
        let h = steps.step(estimate[k]);
        let mut shifted = estimate.to_vec();
        shifted[k] += h;
        let derivative = (f(&shifted) - base) / h;
        sum += (derivative * std[k]).powi(2);
    }
    Ok(sum.sqrt())
}

/// Monte-Carlo conversion of independent normal `(E, ν)` samples to `(K, G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionSummary {
    pub samples: Vec<[f64; 2]>,
    /// Draws with `ν` outside `(−1, 0.5)` or `E ≤ 0`.
    pub rejected: usize,
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

pub fn monte_carlo_convert(
    young: (f64, f64),
    poisson: (f64, f64),
    n: usize,
    seed: u64,
) -> Result<ConversionSummary, UqError> {
    if n < 2 {
        return Err(UqError::Sampler(format!(
            "need at least two samples, got {n}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut samples = Vec::with_capacity(n);
    let mut rejected = 0;
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        match convert_e_nu_to_k_g(young.0 + young.1 * z1, poisson.0 + poisson.1 * z2) {
            Ok((k, g)) => samples.push([k, g]),
            Err(_) => rejected += 1,
        }
    }
    if samples.len() < 2 {
        return Err(UqError::Sampler("all samples were rejected".into()));
    }
    let m = samples.len() as f64;
    let mean = [0, 1].map(|c| samples.iter().map(|s| s[c]).sum::<f64>() / m);
    let std = [0, 1].map(|c| {
        (samples
            .iter()
            .map(|s| (s[c] - mean[c]).powi(2))
            .sum::<f64>()
            / (m - 1.0))
            .sqrt()
    });
    Ok(ConversionSummary {
        samples,
        rejected,
        mean,
        std,
    })
}
