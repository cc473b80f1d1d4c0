//! `uq`: asymptotic, Bayesian and two-step uncertainty of calibrated
//! parameters.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::config::{PlateUqSection, SamplerSection, UniaxialUqSection, UqConfig, UqStage};
use super::report::{DerivedEstimate, HierarchicalSummary, Provenance, SamplerSummary, UqReport};
use super::{
    config_hash, env_seed, load_config, read_data, read_mesh, resolve_seed, to_toml, write_text,
};
use super::{Loaded, Overrides, PipelineError, StageOutput};
use crate::identify::reduced::UniaxialPlasticModel;
use crate::identify::reduced::{
    solve_nls, CalibrationResult, ClosureModel, ElasticCoordinates, ForwardModel, NlsOptions,
    PlateModel, StepPolicy,
};
use crate::identify::{IdentifyError, Parameter};
use crate::materials::{convert_e_nu_to_k_g, uniaxial_elastic_response, ElasticParams};
use crate::mesh::Mesh;
use crate::synthetic::{Component, ObservationSet, UniaxialProtocol};
use crate::uq::{
    ensemble_sample, gaussian_error_propagation, hierarchical_two_step_bayes, log_likelihood,
    monte_carlo_convert, two_step_covariance, two_step_sensitivities, EnsembleChain,
    EnsembleOptions, HierarchicalOptions, ParameterUncertainty, UncertaintyReport, UqError,
    UqMethod,
};

/// Runs the configured uq method and writes its report and, for the
/// sampling methods, the chain CSV.
pub fn uq(
    config_path: &Path,
    overrides: &Overrides<UqStage>,
) -> Result<StageOutput, PipelineError> {
    let loaded: Loaded<UqConfig> = load_config(config_path)?;
    let mut cfg = loaded.config.clone();
    let stage = overrides.method.or(cfg.method).ok_or_else(|| {
        PipelineError::config(config_path, "no method: set `method` or pass --method")
    })?;
    let seed = resolve_seed(overrides.seed, cfg.seed, env_seed().as_deref())?;
    cfg.method = Some(stage);
    cfg.seed = Some(seed);
    let provenance = Provenance::new(config_hash(&cfg), seed);
    let (report, chain) = run_uq(&loaded, &cfg, stage, provenance)?;
    let out = loaded.resolve(&cfg.output);
    write_text(&out, &to_toml(&report))?;
    let mut written = vec![out];
    if let (Some(text), Some(path)) = (chain, &cfg.chain) {
        let path = loaded.resolve(path);
        write_text(&path, &text)?;
        written.push(path);
    }
    let summary = report
        .parameters
        .iter()
        .map(|p| {
            format!(
                "{} = {} ± {}",
                p.name,
                p.estimate,
                p.two_step_std.unwrap_or(p.std)
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok(StageOutput {
        written,
        converged: true,
        summary: format!("{stage}: {summary}"),
    })
}

/// Report and optional chain CSV text.
pub fn run_uq(
    loaded: &Loaded<UqConfig>,
    cfg: &UqConfig,
    stage: UqStage,
    provenance: Provenance,
) -> Result<(UqReport, Option<String>), PipelineError> {
    let mut report = UqReport {
        provenance,
        stage: "uq",
        method: stage.to_string(),
        confidence: cfg.confidence,
        warnings: Vec::new(),
        parameters: Vec::new(),
        elastic: Vec::new(),
        derived: Vec::new(),
        sampler: None,
        hierarchical: None,
        covariance: Vec::new(),
    };
    let seed = report.provenance.seed;
    let section = |name: &str| PipelineError::Config {
        path: loaded.path.display().to_string(),
        message: format!("missing [{name}] section"),
    };
    let mut chain_csv = None;
    match stage {
        UqStage::Asymptotic | UqStage::Bayes => {
            let plate = cfg.plate.as_ref().ok_or_else(|| section("plate"))?;
            let inputs = PlateInputs::load(loaded, plate)?;
            let fit = asymptotic_plate(&inputs, cfg.confidence)?;
            report.warnings.extend(fit.result.warnings.iter().cloned());
            report.derived = derived_moduli(&fit.report, cfg.conversion_samples, seed)?;
            if stage == UqStage::Asymptotic {
                report.covariance = fit.report.covariance.clone();
                report.parameters = fit.report.parameters;
            } else {
                let (rows, summary, chain) =
                    bayes_plate(&inputs, &fit, &cfg.sampler, cfg.confidence, seed)?;
                report.parameters = rows;
                report.sampler = Some(summary);
                chain_csv = Some(chain_text(&chain, &["E", "nu"]));
            }
        }
        UqStage::TwoStep | UqStage::Hierarchical => {
            let u = cfg.uniaxial.as_ref().ok_or_else(|| section("uniaxial"))?;
            let elastic = read_data(&loaded.resolve(&u.elastic_data))?;
            let plastic = read_data(&loaded.resolve(&u.plastic_data))?;
            let settings = TwoStepSettings::from_section(u, cfg.confidence);
            let outcome = two_step_uniaxial(&elastic, &plastic, &settings)?;
            report.elastic = outcome.elastic_report.parameters.clone();
            if stage == UqStage::TwoStep {
                report.covariance = outcome.report.covariance.clone();
                report.parameters = outcome.report.parameters;
            } else {
                let (rows, summary, csv) = hierarchical(
                    &outcome,
                    &elastic,
                    &plastic,
                    &settings,
                    u.n_outer,
                    &cfg.sampler,
                    seed,
                )?;
                report.parameters = rows;
                report.hierarchical = Some(summary);
                chain_csv = Some(csv);
            }
        }
    }
    Ok((report, chain_csv))
}

struct PlateInputs {
    mesh: Mesh<f64>,
    displacements: ObservationSet,
    start: [f64; 2],
    sigma: Option<f64>,
}

impl PlateInputs {
    fn load(loaded: &Loaded<UqConfig>, plate: &PlateUqSection) -> Result<Self, PipelineError> {
        let calibration = loaded.resolve(&plate.calibration);
        if !calibration.exists() {
            return Err(PipelineError::Missing {
                what: "calibration report",
                path: calibration.display().to_string(),
            });
        }
        let text = fs::read_to_string(&calibration).map_err(|e| PipelineError::Io {
            path: calibration.display().to_string(),
            message: e.to_string(),
        })?;
        let start =
            calibration_estimate(&text).map_err(|m| PipelineError::config(&calibration, m))?;
        let mesh = read_mesh(&loaded.resolve(&plate.mesh))?;
        let data = read_data(&loaded.resolve(&plate.data))?;
        if plate.sigma.is_some_and(|s| !(s > 0.0)) {
            return Err(PipelineError::config(
                &loaded.path,
                "plate.sigma must be positive",
            ));
        }
        let displacements = data.filter(|k| k.comp.is_displacement());
        let weight = 1.0 / plate.sigma.unwrap_or(1.0);
        let displacements = displacements.with_weights(vec![weight; displacements.len()])?;
        Ok(Self {
            mesh,
            displacements,
            start,
            sigma: plate.sigma,
        })
    }
}

/// `(E, ν)` from the `elastic` rows of a calibration report.
pub fn calibration_estimate(report: &str) -> Result<[f64; 2], String> {
    let doc: toml::Table = toml::from_str(report).map_err(|e| e.to_string())?;
    let rows = doc
        .get("elastic")
        .and_then(|v| v.as_array())
        .ok_or("calibration report has no `elastic` rows")?;
    let value = |name: &str| {
        rows.iter()
            .find(|r| r.get("name").and_then(|n| n.as_str()) == Some(name))
            .and_then(|r| r.get("value"))
            .and_then(|v| v.as_float())
            .ok_or(format!("calibration report lacks `{name}`"))
    };
    Ok([value("E")?, value("nu")?])
}

struct PlateFit {
    model: PlateModel,
    result: CalibrationResult,
    report: UncertaintyReport,
    sigma: f64,
}

/// Reduced fit in `(E, ν)` from the calibrated start and its asymptotic
/// covariance, with `σ²(JᵀJ)⁻¹` when the noise is prescribed.
fn asymptotic_plate(inputs: &PlateInputs, level: f64) -> Result<PlateFit, PipelineError> {
    let model = PlateModel::new(
        inputs.mesh.clone(),
        &inputs.displacements,
        ElasticCoordinates::YoungPoisson,
    )?;
    let opts = NlsOptions {
        confidence: level,
        ..NlsOptions::default()
    };
    let result = solve_nls(&model, &inputs.displacements, &inputs.start, &opts)?;
    let mut report = result
        .uncertainty
        .clone()
        .ok_or_else(|| UqError::Identifiability(result.warnings.join("; ")))?;
    let s2 = report.s2.expect("asymptotic reports carry s²");
    let sigma = inputs.sigma.unwrap_or(s2.sqrt());
    if let Some(prescribed) = inputs.sigma {
        let gram = result.jacobian.tr_mul(&result.jacobian);
        let cov = inverse_spd(&gram)? * (prescribed * prescribed);
        let mut r = UncertaintyReport::from_covariance(
            UqMethod::Asymptotic,
            &result.parameters.meta,
            &result.parameters.values,
            &cov,
            level,
        )?;
        r.s2 = Some(s2);
        r.det_hessian = report.det_hessian;
        r.eigen_ratio = report.eigen_ratio;
        report = r;
    }
    Ok(PlateFit {
        model,
        result,
        report,
        sigma,
    })
}

fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, UqError> {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky().map(|c| c.inverse()).ok_or_else(|| {
        UqError::Identifiability("information matrix is not positive definite".into())
    })
}

/// `K(E, ν)` and `G(E, ν)` by first-order propagation and Monte Carlo.
fn derived_moduli(
    report: &UncertaintyReport,
    samples: usize,
    seed: u64,
) -> Result<Vec<DerivedEstimate>, PipelineError> {
    let (Some(e), Some(nu)) = (report.parameters.first(), report.parameters.get(1)) else {
        return Ok(Vec::new());
    };
    let estimate = [e.estimate, nu.estimate];
    let std = [e.std, nu.std];
    let mc = monte_carlo_convert((e.estimate, e.std), (nu.estimate, nu.std), samples, seed)?;
    let (k, g) = convert_e_nu_to_k_g(e.estimate, nu.estimate)?;
    let mut rows = Vec::new();
    for (i, (name, value)) in [("K", k), ("G", g)].into_iter().enumerate() {
        let f = |x: &[f64]| {
            convert_e_nu_to_k_g(x[0], x[1]).map_or(f64::NAN, |kg| if i == 0 { kg.0 } else { kg.1 })
        };
        rows.push(DerivedEstimate {
            name: name.into(),
            unit: "N/mm^2".into(),
            estimate: value,
            propagated_std: gaussian_error_propagation(f, &estimate, &std, &StepPolicy::default())?,
            monte_carlo_mean: mc.mean[i],
            monte_carlo_std: mc.std[i],
        });
    }
    Ok(rows)
}

fn ensemble_options(
    s: &SamplerSection,
    seed: u64,
    start: Option<(Vec<f64>, Vec<f64>)>,
) -> EnsembleOptions {
    EnsembleOptions {
        walkers: s.walkers,
        steps: s.steps,
        stretch: s.stretch,
        burn_in: s.burn_in,
        seed,
        start,
    }
}

fn prior_box(center: &[f64], fraction: f64) -> Vec<(f64, f64)> {
    center
        .iter()
        .map(|c| {
            let h = fraction * c.abs();
            (c - h, c + h)
        })
        .collect()
}

/// Posterior mean, standard deviation and equal-tailed credible interval.
fn posterior_rows(
    chain: &EnsembleChain,
    meta: &[Parameter],
    level: f64,
) -> Vec<ParameterUncertainty> {
    let post = chain.posterior();
    let mean = chain.mean();
    let cov = chain.covariance();
    meta.iter()
        .enumerate()
        .map(|(d, p)| {
            let mut xs: Vec<f64> = post.iter().map(|x| x[d]).collect();
            xs.sort_by(f64::total_cmp);
            let q = |t: f64| xs[((t * (xs.len() - 1) as f64).round() as usize).min(xs.len() - 1)];
            ParameterUncertainty {
                name: p.name.clone(),
                unit: p.unit.clone(),
                estimate: mean[d],
                std: cov[(d, d)].max(0.0).sqrt(),
                two_step_std: None,
                lower: q(0.5 - 0.5 * level),
                upper: q(0.5 + 0.5 * level),
            }
        })
        .collect()
}

fn chain_text(chain: &EnsembleChain, names: &[&str]) -> String {
    let mut buf = Vec::new();
    chain.write_csv(&mut buf, names).expect("in-memory csv");
    String::from_utf8(buf).expect("utf-8 csv")
}

fn bayes_plate(
    inputs: &PlateInputs,
    fit: &PlateFit,
    sampler: &SamplerSection,
    level: f64,
    seed: u64,
) -> Result<(Vec<ParameterUncertainty>, SamplerSummary, EnsembleChain), PipelineError> {
    let estimate = fit.result.parameters.values.clone();
    let sigma = vec![fit.sigma; inputs.displacements.len()];
    let target = |k: &[f64]| {
        log_likelihood(&fit.model, &inputs.displacements, k, &sigma).unwrap_or(f64::NEG_INFINITY)
    };
    let bounds = prior_box(&estimate, sampler.elastic_prior);
    let spread: Vec<f64> = fit.report.parameters.iter().map(|p| 3.0 * p.std).collect();
    let chain = ensemble_sample(
        &target,
        &bounds,
        &ensemble_options(sampler, seed, Some((estimate, spread))),
    )?;
    let rows = posterior_rows(&chain, &fit.result.parameters.meta, level);
    let summary = SamplerSummary {
        walkers: chain.walkers,
        steps: chain.steps,
        stretch: chain.stretch,
        burn_in: chain.burn_in,
        acceptance_rate: chain.acceptance_rate,
        samples: chain.posterior().len(),
        std_ratio: rows
            .iter()
            .zip(&fit.report.parameters)
            .map(|(b, a)| b.std / a.std)
            .collect(),
    };
    Ok((rows, summary, chain))
}

/// Inputs of the two-step uniaxial identification.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepSettings {
    pub stress_noise: f64,
    pub lateral_noise: f64,
    pub dt: f64,
    pub elastic_initial: [f64; 2],
    pub plastic_initial: [f64; 3],
    pub viscosity: f64,
    pub exponent: f64,
    pub confidence: f64,
    pub steps: StepPolicy,
}

impl TwoStepSettings {
    fn from_section(u: &UniaxialUqSection, confidence: f64) -> Self {
        Self {
            stress_noise: u.stress_noise,
            lateral_noise: u.lateral_noise,
            dt: u.dt,
            elastic_initial: u.elastic_initial,
            plastic_initial: u.plastic_initial,
            viscosity: u.viscosity,
            exponent: u.exponent,
            confidence,
            steps: StepPolicy::default(),
        }
    }

    fn noise(&self, comp: Component) -> f64 {
        if comp == Component::Lateral {
            self.lateral_noise
        } else {
            self.stress_noise
        }
    }
}

/// Elastic and plastic fits with the propagated plastic covariance.
#[derive(Debug, Clone)]
pub struct TwoStepOutcome {
    /// `(K, G)` fit on noise-normalized rows.
    pub elastic: CalibrationResult,
    pub elastic_covariance: DMatrix<f64>,
    pub elastic_report: UncertaintyReport,
    /// `(k, b, c)` fit with the elastic constants fixed at the estimate.
    pub plastic: CalibrationResult,
    /// `std` is the one-step `Δ`, `two_step_std` the propagated `δ`.
    pub report: UncertaintyReport,
    pub model: UniaxialPlasticModel,
}

fn elastic_parameters() -> Vec<Parameter> {
    vec![
        Parameter::new("K", "N/mm^2").bounded(1.0, 1e8),
        Parameter::new("G", "N/mm^2").bounded(1.0, 1e8),
    ]
}

/// Uniaxial elastic response at the `x` strain of every `sig`/`epsq` row.
pub fn elastic_uniaxial_model(
    data: &ObservationSet,
) -> Result<ClosureModel<impl Fn(&[f64]) -> Result<Vec<f64>, IdentifyError> + Sync>, PipelineError>
{
    let rows: Vec<(Component, f64)> = data.keys().iter().map(|k| (k.comp, k.x)).collect();
    if let Some((c, _)) = rows
        .iter()
        .find(|(c, _)| !matches!(c, Component::Stress | Component::Lateral))
    {
        return Err(PipelineError::Config {
            path: "elastic_data".into(),
            message: format!("unexpected component `{c}`"),
        });
    }
    let n = rows.len();
    Ok(ClosureModel::new(
        elastic_parameters(),
        n,
        move |kg: &[f64]| {
            Ok(rows
                .iter()
                .map(|&(c, strain)| {
                    let (sigma, lateral) = uniaxial_elastic_response(kg[0], kg[1], strain);
                    if c == Component::Stress {
                        sigma
                    } else {
                        lateral
                    }
                })
                .collect())
        },
    ))
}

/// Plastic model whose protocol follows the `sig` rows of `data`.
pub fn plastic_uniaxial_model(
    data: &ObservationSet,
    elastic: [f64; 2],
    settings: &TwoStepSettings,
) -> Result<UniaxialPlasticModel, PipelineError> {
    let keys = data.keys();
    if keys.is_empty() || keys.iter().any(|k| k.comp != Component::Stress) {
        return Err(PipelineError::Config {
            path: "plastic_data".into(),
            message: "needs `sig` rows only".into(),
        });
    }
    let protocol = UniaxialProtocol {
        exp: keys[0].exp,
        strains: keys.iter().map(|k| k.x).collect(),
        dt: settings.dt,
        stress_noise: settings.stress_noise,
        lateral_noise: None,
    };
    Ok(UniaxialPlasticModel::new(
        protocol,
        ElasticParams::BulkShear {
            bulk: elastic[0],
            shear: elastic[1],
        },
    )
    .with_viscosity(settings.viscosity, settings.exponent))
}

/// Elastic step on `(K, G)`, plastic step on `(k, b, c)` at the elastic
/// estimate, then the plastic covariance including the elastic uncertainty.
pub fn two_step_uniaxial(
    elastic_data: &ObservationSet,
    plastic_data: &ObservationSet,
    settings: &TwoStepSettings,
) -> Result<TwoStepOutcome, PipelineError> {
    let level = settings.confidence;
    if !(settings.stress_noise > 0.0 && settings.lateral_noise > 0.0) {
        return Err(PipelineError::Config {
            path: "uniaxial".into(),
            message: "stress_noise and lateral_noise must be positive".into(),
        });
    }
    let weights: Vec<f64> = elastic_data
        .keys()
        .iter()
        .map(|k| 1.0 / settings.noise(k.comp))
        .collect();
    let elastic_data = elastic_data.with_weights(weights.clone())?;
    let elastic_model = elastic_uniaxial_model(&elastic_data)?;
    let opts = NlsOptions {
        confidence: level,
        steps: settings.steps,
        ..NlsOptions::default()
    };
    let elastic = solve_nls(
        &elastic_model,
        &elastic_data,
        &settings.elastic_initial,
        &opts,
    )?;
    let jw = DMatrix::from_fn(elastic.jacobian.nrows(), 2, |r, c| {
        weights[r] * elastic.jacobian[(r, c)]
    });
    let elastic_covariance = inverse_spd(&jw.tr_mul(&jw))?;
    let ke = [elastic.parameters.values[0], elastic.parameters.values[1]];
    let elastic_report = UncertaintyReport::from_covariance(
        UqMethod::Asymptotic,
        &elastic.parameters.meta,
        &ke,
        &elastic_covariance,
        level,
    )?;

    let model = plastic_uniaxial_model(plastic_data, ke, settings)?;
    let plastic_data =
        plastic_data.with_weights(vec![1.0 / settings.stress_noise; plastic_data.len()])?;
    let plastic = solve_nls(&model, &plastic_data, &settings.plastic_initial, &opts)?;
    let kp = plastic.parameters.values.clone();
    let forward = |e: &[f64], p: &[f64]| {
        model
            .with_elastic(ElasticParams::BulkShear {
                bulk: e[0],
                shear: e[1],
            })
            .evaluate(p)
    };
    let sens = two_step_sensitivities(forward, model.n_outputs(), &ke, &kp, &settings.steps)?;
    let sigma2 = settings.stress_noise * settings.stress_noise;
    let report = two_step_covariance(
        &plastic.parameters.meta,
        &kp,
        &sens,
        &elastic_covariance,
        sigma2,
        level,
    )?;
    Ok(TwoStepOutcome {
        elastic,
        elastic_covariance,
        elastic_report,
        plastic,
        report,
        model,
    })
}

fn stress_sigmas(data: &ObservationSet, settings: &TwoStepSettings) -> Vec<f64> {
    data.keys().iter().map(|k| settings.noise(k.comp)).collect()
}

/// Elastic posterior by ensemble sampling, then one plastic posterior per
/// elastic draw. The `δ` column combines the mean inner variance with the
/// spread of the inner means.
fn hierarchical(
    outcome: &TwoStepOutcome,
    elastic_data: &ObservationSet,
    plastic_data: &ObservationSet,
    settings: &TwoStepSettings,
    n_outer: usize,
    sampler: &SamplerSection,
    seed: u64,
) -> Result<(Vec<ParameterUncertainty>, HierarchicalSummary, String), PipelineError> {
    let elastic_model = elastic_uniaxial_model(elastic_data)?;
    let elastic_sigma = stress_sigmas(elastic_data, settings);
    let ke = outcome.elastic.parameters.values.clone();
    let elastic_target = |k: &[f64]| {
        log_likelihood(&elastic_model, elastic_data, k, &elastic_sigma).unwrap_or(f64::NEG_INFINITY)
    };
    let ke_spread: Vec<f64> = outcome
        .elastic_report
        .parameters
        .iter()
        .map(|p| 3.0 * p.std)
        .collect();
    let elastic_chain = ensemble_sample(
        &elastic_target,
        &prior_box(&ke, sampler.elastic_prior),
        &ensemble_options(sampler, seed, Some((ke.clone(), ke_spread))),
    )?;

    let kp = outcome.plastic.parameters.values.clone();
    let plastic_sigma = stress_sigmas(plastic_data, settings);
    let model = &outcome.model;
    let posterior = |e: &[f64]| {
        let m = model.with_elastic(ElasticParams::BulkShear {
            bulk: e[0],
            shear: e[1],
        });
        let sigma = plastic_sigma.clone();
        move |p: &[f64]| log_likelihood(&m, plastic_data, p, &sigma).unwrap_or(f64::NEG_INFINITY)
    };
    let kp_spread: Vec<f64> = outcome
        .report
        .parameters
        .iter()
        .map(|p| 3.0 * p.two_step_std.unwrap_or(p.std))
        .collect();
    let opts = HierarchicalOptions {
        n_outer,
        inner: ensemble_options(sampler, seed, Some((kp.clone(), kp_spread))),
        seed,
    };
    let result = hierarchical_two_step_bayes(
        &elastic_chain.posterior(),
        posterior,
        &prior_box(&kp, sampler.plastic_prior),
        &opts,
    )?;
    if result.summaries.is_empty() {
        return Err(UqError::Sampler(format!("all {n_outer} inner chains failed")).into());
    }
    let means = result.mean_of_means();
    let stds = result.mean_of_stds();
    let spread = result.spread_of_means();
    let z = crate::uq::z_value(settings.confidence)?;
    let rows = outcome
        .plastic
        .parameters
        .meta
        .iter()
        .enumerate()
        .map(|(d, p)| {
            let total = (stds[d] * stds[d] + spread[d] * spread[d]).sqrt();
            ParameterUncertainty {
                name: p.name.clone(),
                unit: p.unit.clone(),
                estimate: means[d],
                std: stds[d],
                two_step_std: Some(total),
                lower: means[d] - z * total,
                upper: means[d] + z * total,
            }
        })
        .collect();
    let summary = HierarchicalSummary {
        draws: result.summaries.len(),
        skipped: result.skipped.len(),
        mean_of_means: means,
        spread_of_means: spread,
        mean_of_stds: stds,
    };
    Ok((
        rows,
        summary,
        result.to_csv_string(&["K", "G"], &["k", "b", "c"]),
    ))
}
