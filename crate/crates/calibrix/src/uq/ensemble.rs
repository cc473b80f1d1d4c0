//! Affine-invariant ensemble sampler with the stretch move.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;

use super::UqError;
use crate::rng;

/// Unnormalized log posterior density.
pub trait LogDensity: Sync {
    fn log_density(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> LogDensity for F {
    fn log_density(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    pub walkers: usize,
    pub steps: usize,
    /// Stretch scale `a > 1`.
    pub stretch: f64,
    /// Fraction of the steps of every walker discarded as burn-in.
    pub burn_in: f64,
    pub seed: u64,
    /// Initial walkers drawn from `center ± spread` (uniform, clipped to the
    /// prior box); `None` draws from the whole box.
    pub start: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            walkers: 16,
            steps: 1000,
            stretch: 2.0,
            burn_in: 0.5,
            seed: 0,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleChain {
    pub walkers: usize,
    pub steps: usize,
    pub dim: usize,
    /// Positions indexed `[step][walker][dim]`, flattened.
    pub samples: Vec<f64>,
    pub log_post: Vec<f64>,
    pub accepted: Vec<bool>,
    pub acceptance_rate: f64,
    pub burn_in: f64,
    pub stretch: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl EnsembleChain {
    pub fn position(&self, step: usize, walker: usize) -> &[f64] {
        let i = (step * self.walkers + walker) * self.dim;
        &self.samples[i..i + self.dim]
    }

    pub fn first_kept_step(&self) -> usize {
        ((self.steps as f64) * self.burn_in).floor() as usize
    }

    /// Post-burn-in positions of all walkers merged.
    pub fn posterior(&self) -> Vec<Vec<f64>> {
        (self.first_kept_step()..self.steps)
            .flat_map(|s| (0..self.walkers).map(move |w| (s, w)))
            .map(|(s, w)| self.position(s, w).to_vec())
            .collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let post = self.posterior();
        let n = post.len() as f64;
        (0..self.dim)
            .map(|d| post.iter().map(|x| x[d]).sum::<f64>() / n)
            .collect()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let post = self.posterior();
        let mean = DVector::from_vec(self.mean());
        let n = post.len() as f64;
        let mut c = DMatrix::zeros(self.dim, self.dim);
        for x in &post {
            let d = DVector::from_column_slice(x) - &mean;
            c += &d * d.transpose();
        }
        c / (n - 1.0)
    }

    /// CSV with header `walker,step,<names>,log_post,accepted`.
    pub fn write_csv<W: Write>(&self, out: W, names: &[&str]) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["walker".to_string(), "step".to_string()];
        header.extend(names.iter().map(|s| s.to_string()));
        header.extend(["log_post".to_string(), "accepted".to_string()]);
        w.write_record(&header)?;
        for s in 0..self.steps {
            for k in 0..self.walkers {
                let i = s * self.walkers + k;
                let mut rec = vec![k.to_string(), s.to_string()];
                rec.extend(self.position(s, k).iter().map(|v| v.to_string()));
                rec.push(self.log_post[i].to_string());
                rec.push(u8::from(self.accepted[i]).to_string());
                w.write_record(&rec)?;
            }
        }
        w.flush()
    }
}

fn inside(x: &[f64], bounds: &[(f64, f64)]) -> bool {
    x.iter().zip(bounds).all(|(v, (lo, hi))| v >= lo && v <= hi)
}

/// Stretch-move ensemble sampling over a uniform prior box. The two halves of
/// the ensemble are updated alternately; proposals within a half are drawn in
/// parallel from per-walker random streams, so the chain depends only on the
/// seed.
pub fn ensemble_sample(
    target: &dyn LogDensity,
    bounds: &[(f64, f64)],
    opts: &EnsembleOptions,
) -> Result<EnsembleChain, UqError> {
    let dim = bounds.len();
    let nw = opts.walkers;
    if nw < 2 * dim || nw < 4 || nw % 2 != 0 {
        return Err(UqError::Sampler(format!(
            "need an even number of at least max(4, 2·{dim}) walkers, got {nw}"
        )));
    }
    if !(opts.stretch > 1.0) {
        return Err(UqError::Sampler(format!(
            "stretch scale must exceed 1, got {}",
            opts.stretch
        )));
    }
    if !(0.0..1.0).contains(&opts.burn_in) || opts.steps == 0 {
        return Err(UqError::Sampler(
            "burn-in must lie in [0, 1) and steps must be positive".into(),
        ));
    }
    if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(UqError::Sampler("empty prior box".into()));
    }
    let density = |x: &[f64]| {
        if inside(x, bounds) {
            target.log_density(x)
        } else {
            f64::NEG_INFINITY
        }
    };

    let mut init_rng = rng::stream(opts.seed, 0);
    let mut pos: Vec<Vec<f64>> = (0..nw)
        .map(|_| {
            bounds
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| {
                    let u: f64 = init_rng.random();
                    match &opts.start {
                        Some((c, s)) => (c[d] + s[d] * (2.0 * u - 1.0)).clamp(lo, hi),
                        None => lo + (hi - lo) * u,
                    }
                })
                .collect()
        })
        .collect();
    let mut lp: Vec<f64> = pos.par_iter().map(|x| density(x)).collect();
    if lp.iter().all(|v| !v.is_finite()) {
        return Err(UqError::Sampler(
            "no initial walker has finite posterior density".into(),
        ));
    }

    let mut samples = Vec::with_capacity(opts.steps * nw * dim);
    let mut log_post = Vec::with_capacity(opts.steps * nw);
    let mut accepted = Vec::with_capacity(opts.steps * nw);
    let mut warnings = Vec::new();
    let a = opts.stretch;
    let half = nw / 2;
    for step in 0..opts.steps {
        let mut moved = vec![false; nw];
        for part in 0..2 {
            let active: Vec<usize> = (part * half..(part + 1) * half).collect();
            let others: Vec<usize> = ((1 - part) * half..(2 - part) * half).collect();
            let snapshot = &pos;
            let updates: Vec<(usize, Vec<f64>, f64, bool)> = active
                .par_iter()
                .map(|&k| {
                    let mut r = rng::stream(opts.seed, 1 + (step * nw + k) as u64);
                    let j = others[r.random_range(0..others.len())];
                    let u: f64 = r.random();
                    let z = ((a - 1.0) * u + 1.0).powi(2) / a;
                    let y: Vec<f64> = snapshot[j]
                        .iter()
                        .zip(&snapshot[k])
                        .map(|(xj, xk)| xj + z * (xk - xj))
                        .collect();
                    let lp_y = density(&y);
                    let log_ratio = (dim as f64 - 1.0) * z.ln() + lp_y - lp[k];
                    let u2: f64 = r.random();
                    if lp_y.is_finite() && u2.ln() < log_ratio {
                        (k, y, lp_y, true)
                    } else {
                        (k, snapshot[k].clone(), lp[k], false)
                    }
                })
                .collect();
            for (k, y, l, acc) in updates {
                pos[k] = y;
                lp[k] = l;
                moved[k] = acc;
            }
        }
        if moved.iter().all(|m| !m) {
            warnings.push(format!(
                "step {step}: every proposal rejected; consider a smaller stretch scale"
            ));
        }
        for k in 0..nw {
            samples.extend_from_slice(&pos[k]);
            log_post.push(lp[k]);
            accepted.push(moved[k]);
        }
    }
    let acceptance_rate = accepted.iter().filter(|&&a| a).count() as f64 / accepted.len() as f64;
    Ok(EnsembleChain {
        walkers: nw,
        steps: opts.steps,
        dim,
        samples,
        log_post,
        accepted,
        acceptance_rate,
        burn_in: opts.burn_in,
        stretch: a,
        seed: opts.seed,
        warnings,
    })
}
