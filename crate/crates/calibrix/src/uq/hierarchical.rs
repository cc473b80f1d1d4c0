//! Two-step hierarchical Bayes: plastic posteriors conditioned on draws from
//! the elastic posterior.

use rand::Rng as _;
use rayon::prelude::*;

use super::{ensemble_sample, EnsembleOptions, LogDensity, UqError};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalOptions {
    /// Number of elastic draws.
    pub n_outer: usize,
    pub inner: EnsembleOptions,
    pub seed: u64,
}

/// Plastic posterior summary for one elastic draw.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSummary {
    pub draw: usize,
    pub elastic: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub acceptance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalResult {
    pub summaries: Vec<InnerSummary>,
    /// Draws whose inner chain failed, with the reason.
    pub skipped: Vec<(usize, String)>,
}

impl HierarchicalResult {
    fn column(&self, f: impl Fn(&InnerSummary) -> &[f64], d: usize) -> Vec<f64> {
        self.summaries.iter().map(|s| f(s)[d]).collect()
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = if xs.len() > 1 {
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (m, v.sqrt())
    }

    fn dim(&self) -> usize {
        self.summaries.first().map_or(0, |s| s.mean.len())
    }

    /// Average of the inner posterior means.
    pub fn mean_of_means(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|d| Self::moments(&self.column(|s| &s.mean, d)).0)
            .collect()
    }

    /// Spread of the inner posterior means across elastic draws.
    pub fn spread_of_means(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|d| Self::moments(&self.column(|s| &s.mean, d)).1)
            .collect()
    }

    /// Average inner posterior standard deviation.
    pub fn mean_of_stds(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|d| Self::moments(&self.column(|s| &s.std, d)).0)
            .collect()
    }

    /// One row per elastic draw: the draw, inner means and standard deviations.
    pub fn to_csv_string(&self, elastic: &[&str], plastic: &[&str]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["draw".to_string()];
        header.extend(elastic.iter().map(|n| n.to_string()));
        header.extend(plastic.iter().map(|n| format!("mean_{n}")));
        header.extend(plastic.iter().map(|n| format!("std_{n}")));
        header.push("acceptance".into());
        w.write_record(&header).expect("in-memory csv");
        for s in &self.summaries {
            let mut rec = vec![s.draw.to_string()];
            rec.extend(
                s.elastic
                    .iter()
                    .chain(&s.mean)
                    .chain(&s.std)
                    .map(|v| v.to_string()),
            );
            rec.push(s.acceptance.to_string());
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("ascii csv")
    }
}

/// For each of `n_outer` draws from the elastic sample, runs an inner ensemble
/// over the plastic parameters with `posterior(κ_e)` as target. Draws and
/// inner seeds come from per-draw streams of `opts.seed`.
pub fn hierarchical_two_step_bayes<D, F>(
    elastic_sample: &[Vec<f64>],
    posterior: F,
    bounds: &[(f64, f64)],
    opts: &HierarchicalOptions,
) -> Result<HierarchicalResult, UqError>
where
    D: LogDensity,
    F: Fn(&[f64]) -> D + Sync,
{
    if elastic_sample.is_empty() {
        return Err(UqError::Sampler("empty elastic posterior sample".into()));
    }
    let outcomes: Vec<Result<InnerSummary, (usize, String)>> = (0..opts.n_outer)
        .into_par_iter()
        .map(|draw| {
            let mut r = rng::stream(opts.seed, draw as u64);
            let elastic = elastic_sample[r.random_range(0..elastic_sample.len())].clone();
            let inner = EnsembleOptions {
                seed: r.random(),
                ..opts.inner.clone()
            };
            let target = posterior(&elastic);
            let chain =
                ensemble_sample(&target, bounds, &inner).map_err(|e| (draw, e.to_string()))?;
            let mean = chain.mean();
            if chain.acceptance_rate == 0.0 || mean.iter().any(|m| !m.is_finite()) {
                return Err((draw, "inner chain never moved".to_string()));
            }
            let cov = chain.covariance();
            Ok(InnerSummary {
                draw,
                elastic,
                std: (0..mean.len())
                    .map(|d| cov[(d, d)].max(0.0).sqrt())
                    .collect(),
                mean,
                acceptance: chain.acceptance_rate,
            })
        })
        .collect();
    let mut result = HierarchicalResult {
        summaries: Vec::new(),
        skipped: Vec::new(),
    };
    for o in outcomes {
        match o {
            Ok(s) => result.summaries.push(s),
            Err(e) => result.skipped.push(e),
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(center: f64) -> impl Fn(&[f64]) -> f64 + Sync {
        move |x: &[f64]| -0.5 * ((x[0] - center) / 0.02).powi(2)
    }

    #[test]
    fn point_mass_elastic_posterior_collapses_to_single_level() {
        let opts = HierarchicalOptions {
            n_outer: 3,
            inner: EnsembleOptions {
                walkers: 6,
                steps: 300,
                seed: 0,
                ..Default::default()
            },
            seed: 4,
        };
        let sample = vec![vec![1.0]; 10];
        let h =
            hierarchical_two_step_bayes(&sample, |e: &[f64]| target(e[0]), &[(0.0, 2.0)], &opts)
                .unwrap();
        assert_eq!(h.summaries.len(), 3);
        let inner = EnsembleOptions {
            seed: h.summaries.len() as u64,
            ..opts.inner.clone()
        };
        let single = ensemble_sample(&target(1.0), &[(0.0, 2.0)], &inner).unwrap();
        for s in &h.summaries {
            assert_eq!(s.elastic, vec![1.0]);
            assert!((s.mean[0] - single.mean()[0]).abs() < 0.03);
        }
    }

    #[test]
    fn spread_grows_with_elastic_spread() {
        let opts = HierarchicalOptions {
            n_outer: 20,
            inner: EnsembleOptions {
                walkers: 6,
                steps: 200,
                seed: 0,
                ..Default::default()
            },
            seed: 8,
        };
        let narrow: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![1.0 + 0.01 * (i as f64 - 25.0) / 25.0])
            .collect();
        let wide: Vec<Vec<f64>> = narrow
            .iter()
            .map(|v| vec![1.0 + 4.0 * (v[0] - 1.0)])
            .collect();
        let a =
            hierarchical_two_step_bayes(&narrow, |e: &[f64]| target(e[0]), &[(0.0, 2.0)], &opts)
                .unwrap();
        let b = hierarchical_two_step_bayes(&wide, |e: &[f64]| target(e[0]), &[(0.0, 2.0)], &opts)
            .unwrap();
        assert!(b.spread_of_means()[0] > a.spread_of_means()[0]);
        assert!(a
            .to_csv_string(&["e"], &["p"])
            .starts_with("draw,e,mean_p,std_p,acceptance\n"));
    }
}
