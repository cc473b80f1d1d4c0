//! `calibrate`: one identification method on plate data.

use std::path::Path;

use rand::Rng as _;

use super::config::{CalibrateConfig, Method};
use super::report::{CalibrationReport, Diagnostics, Estimate, Provenance, StartSummary};
use super::{
    config_hash, env_seed, load_config, read_data, read_mesh, resolve_seed, to_toml, write_text,
};
use super::{Loaded, Overrides, PipelineError, StageOutput};
use crate::identify::aao::{
    aao_solve, AaoFormulation, AaoOptions, AaoProblem, AaoResult, AaoWeights, BlockSolver,
};
use crate::identify::reduced::{
    landweber_reduced, solve_nls, ElasticCoordinates, LandweberOptions, NlsOptions, PlateModel,
    StepPolicy, StepRule,
};
use crate::identify::vfm::{equilibrium_gap, solve_vfm};
use crate::materials::young_poisson_from_coefficients;
use crate::mesh::{DofPartition, Mesh};
use crate::rng;
use crate::synthetic::ObservationSet;

const REDUCED_LANDWEBER_ITERATIONS: usize = 2000;
const AAO_LANDWEBER_ITERATIONS: usize = 100_000;

/// Runs the configured method and writes its report. A report is written
/// also when the method does not converge.
pub fn calibrate(
    config_path: &Path,
    overrides: &Overrides<Method>,
) -> Result<StageOutput, PipelineError> {
    let loaded: Loaded<CalibrateConfig> = load_config(config_path)?;
    let mut cfg = loaded.config.clone();
    let method = overrides.method.or(cfg.method).ok_or_else(|| {
        PipelineError::config(config_path, "no method: set `method` or pass --method")
    })?;
    let seed = resolve_seed(overrides.seed, cfg.seed, env_seed().as_deref())?;
    cfg.method = Some(method);
    cfg.seed = Some(seed);
    let mesh = read_mesh(&loaded.resolve(&cfg.mesh))?;
    let data = read_data(&loaded.resolve(&cfg.data))?;
    let report = run_calibration(
        &cfg,
        method,
        &mesh,
        &data,
        Provenance::new(config_hash(&cfg), seed),
    )?;
    let out = loaded.resolve(&cfg.output);
    write_text(&out, &to_toml(&report))?;
    let summary = report
        .elastic
        .iter()
        .take(2)
        .map(|e| format!("{} = {}", e.name, e.value))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(StageOutput {
        written: vec![out],
        converged: report.converged,
        summary: format!("{method}: {summary}"),
    })
}

fn elastic_rows(coefficients: [f64; 2]) -> Vec<Estimate> {
    let (e, nu) = young_poisson_from_coefficients(coefficients[0], coefficients[1]);
    vec![
        Estimate::new("E", "N/mm^2", e),
        Estimate::new("nu", "-", nu),
        Estimate::new("C11", "N/mm^2", coefficients[0]),
        Estimate::new("C12", "N/mm^2", coefficients[1]),
    ]
}

fn coefficients_of(coords: ElasticCoordinates, kappa: &[f64]) -> [f64; 2] {
    let (c11, c12) = coords.coefficients(kappa);
    [c11, c12]
}

fn base_report(provenance: Provenance, method: Method) -> CalibrationReport {
    CalibrationReport {
        provenance,
        stage: "calibrate",
        method: method.to_string(),
        converged: true,
        stop: None,
        warnings: Vec::new(),
        parameters: Vec::new(),
        elastic: Vec::new(),
        diagnostics: Diagnostics::default(),
        weights: None,
        objectives: None,
        starts: Vec::new(),
        uncertainty: None,
    }
}

/// In-memory calibration behind `calibrate`.
pub fn run_calibration(
    cfg: &CalibrateConfig,
    method: Method,
    mesh: &Mesh<f64>,
    data: &ObservationSet,
    provenance: Provenance,
) -> Result<CalibrationReport, PipelineError> {
    let mut report = base_report(provenance, method);
    match method {
        Method::Reduced | Method::LandweberReduced => {
            reduced(cfg, method, mesh, data, &mut report)?
        }
        Method::Vfm => {
            let part = DofPartition::new(mesh);
            let r = solve_vfm(mesh, &part, data, cfg.vfm.sigma_r)?;
            report.parameters = estimates(&r.parameters.meta, &r.parameters.values);
            report.elastic = elastic_rows(r.coefficients);
            report.diagnostics = Diagnostics {
                objective: 0.5 * r.residual_norm * r.residual_norm,
                residual_norm: Some(r.residual_norm),
                equilibrium_gap: Some(equilibrium_gap(
                    mesh,
                    &part,
                    data,
                    r.coefficients,
                    cfg.vfm.sigma_r,
                )?),
                ..Diagnostics::default()
            };
        }
        Method::AaoFem | Method::AaoVfm | Method::LandweberAao => {
            aao(cfg, method, mesh, data, &mut report)?
        }
    }
    Ok(report)
}

fn estimates(meta: &[crate::identify::Parameter], values: &[f64]) -> Vec<Estimate> {
    meta.iter()
        .zip(values)
        .map(|(p, &v)| Estimate::new(&p.name, &p.unit, v))
        .collect()
}

fn reduced(
    cfg: &CalibrateConfig,
    method: Method,
    mesh: &Mesh<f64>,
    data: &ObservationSet,
    report: &mut CalibrationReport,
) -> Result<(), PipelineError> {
    let rc = &cfg.reduced;
    let displacements = data.filter(|k| k.comp.is_displacement());
    let model = PlateModel::new(mesh.clone(), &displacements, rc.coordinates)?;
    let steps = StepPolicy {
        relative: rc.nd_relative,
        absolute: rc.nd_absolute,
    };
    let meta = rc.coordinates.parameters();
    if method == Method::Reduced {
        let opts = NlsOptions {
            max_iterations: rc.max_iterations,
            gradient_tol: rc.gradient_tol,
            step_tol: rc.step_tol,
            objective_tol: rc.objective_tol,
            steps,
            confidence: rc.confidence,
            ..NlsOptions::default()
        };
        let r = solve_nls(&model, &displacements, &rc.initial, &opts)?;
        report.parameters = estimates(&meta, &r.parameters.values);
        report.elastic = elastic_rows(coefficients_of(rc.coordinates, &r.parameters.values));
        report.converged = r.converged;
        report.stop = Some(r.stop);
        report.warnings = r.warnings.clone();
        report.diagnostics = Diagnostics {
            objective: r.objective,
            iterations: Some(r.iterations),
            evaluations: Some(r.evaluations),
            gradient_norm: Some(r.gradient_norm),
            residual_norm: Some(r.residual.iter().map(|v| v * v).sum::<f64>().sqrt()),
            determinant: Some(r.identifiability.determinant),
            eigen_ratio: Some(r.identifiability.eigen_ratio),
            ..Diagnostics::default()
        };
        report.objectives = Some(r.history.clone());
        report.uncertainty = r.uncertainty;
    } else {
        let opts = LandweberOptions {
            step: StepRule::Spectral {
                fraction: cfg.landweber.fraction,
            },
            max_iterations: cfg
                .landweber
                .max_iterations
                .unwrap_or(REDUCED_LANDWEBER_ITERATIONS),
            tol: cfg.landweber.tol,
            steps,
            ..LandweberOptions::default()
        };
        let h = landweber_reduced(&model, &displacements, &rc.initial, &opts)?;
        let last = h.last().to_vec();
        report.parameters = estimates(&meta, &last);
        report.elastic = elastic_rows(coefficients_of(rc.coordinates, &last));
        report.converged = h.converged;
        if !h.converged {
            report.warnings.push(format!(
                "no convergence after {} iterations",
                h.iterations()
            ));
        }
        report.diagnostics = Diagnostics {
            objective: *h
                .objectives
                .last()
                .expect("history starts with the initial objective"),
            iterations: Some(h.iterations()),
            ..Diagnostics::default()
        };
        report.objectives = Some(h.objectives);
    }
    Ok(())
}

/// Weights of a formulation with the configured overrides.
pub fn aao_weights(cfg: &CalibrateConfig, formulation: AaoFormulation) -> AaoWeights {
    let d = formulation.default_weights();
    AaoWeights {
        sigma_s: cfg.aao.sigma_s.unwrap_or(d.sigma_s),
        sigma_d: cfg.aao.sigma_d.unwrap_or(d.sigma_d),
        gamma_s: cfg.aao.gamma_s,
        gamma_p: cfg.aao.gamma_p,
    }
}

fn aao(
    cfg: &CalibrateConfig,
    method: Method,
    mesh: &Mesh<f64>,
    data: &ObservationSet,
    report: &mut CalibrationReport,
) -> Result<(), PipelineError> {
    let ac = &cfg.aao;
    let formulation = if method == Method::AaoVfm {
        AaoFormulation::Vfm
    } else {
        AaoFormulation::Fem
    };
    let weights = aao_weights(cfg, formulation);
    let solver = if method == Method::LandweberAao {
        BlockSolver::Landweber
    } else {
        ac.block_solver
    };
    let opts = AaoOptions {
        weights,
        solver,
        max_iterations: ac.max_iterations,
        landweber: LandweberOptions {
            step: StepRule::Spectral {
                fraction: cfg.landweber.fraction,
            },
            max_iterations: cfg
                .landweber
                .max_iterations
                .unwrap_or(AAO_LANDWEBER_ITERATIONS),
            tol: cfg.landweber.tol,
            ..LandweberOptions::default()
        },
        ..AaoOptions::default()
    };
    if ac.starts == 0 {
        return Err(PipelineError::Config {
            path: "aao.starts".into(),
            message: "need at least one start".into(),
        });
    }
    let part = DofPartition::new(mesh);
    let problem = AaoProblem::new(mesh, &part, data, ac.sigma_r)?;
    let seed = report.provenance.seed;
    let initials: Vec<[f64; 2]> = (0..ac.starts)
        .map(|i| {
            if i == 0 {
                return ac.initial;
            }
            let mut r = rng::stream(seed, i as u64);
            ac.initial
                .map(|c| c * (1.0 + ac.start_spread * r.random_range(-1.0..1.0)))
        })
        .collect();
    let mut best: Option<AaoResult> = None;
    for initial in &initials {
        let r = aao_solve(
            &problem,
            formulation,
            &problem.initial_guess(*initial),
            &opts,
        )?;
        if ac.starts > 1 {
            let p = &r.parameters.values;
            report.starts.push(StartSummary {
                initial: *initial,
                young: p[0],
                poisson: p[1],
                objective: r.objective,
                converged: r.converged,
            });
        }
        if best.as_ref().is_none_or(|b| r.objective < b.objective) {
            best = Some(r);
        }
    }
    let r = best.expect("at least one start");
    let coefficients = r.coefficients();
    report.parameters = estimates(
        &ElasticCoordinates::Coefficients.parameters(),
        &coefficients,
    );
    report.elastic = elastic_rows(coefficients);
    report.converged = r.converged;
    report.stop = Some(r.stop);
    report.warnings = r.warnings.clone();
    report.weights = Some(r.weights);
    report.diagnostics = Diagnostics {
        objective: r.objective,
        iterations: Some(r.iterations),
        gradient_norm: Some(r.gradient_norm),
        equilibrium_gap: Some(r.equilibrium_gap),
        state_misfit: Some(r.state_misfit),
        ..Diagnostics::default()
    };
    report.objectives = Some(r.objectives);
    if report.starts.len() > 1 {
        let young: Vec<f64> = report.starts.iter().map(|s| s.young).collect();
        let spread = young.iter().cloned().fold(f64::MIN, f64::max)
            - young.iter().cloned().fold(f64::MAX, f64::min);
        report
            .warnings
            .push(format!("E spread over {} starts: {spread}", young.len()));
    }
    Ok(())
}
