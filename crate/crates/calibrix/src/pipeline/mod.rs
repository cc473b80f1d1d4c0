//! File-based stages: data generation, calibration, uncertainty
//! quantification and report tables.

pub mod calibrate;
pub mod config;
pub mod report;
pub mod uncertainty;

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::identify::IdentifyError;
use crate::materials::{MaterialError, MaterialParams};
use crate::mesh::{plate_with_hole, Mesh, MeshError, PlateGeometry, PlateResolution};
use crate::synthetic::{
    generate_plate_data, generate_uniaxial_data, DataError, ObservationSet, UniaxialProtocol,
};
use crate::uq::UqError;

pub use calibrate::{calibrate, run_calibration};
pub use config::{CalibrateConfig, Experiment, GenerateConfig, Method, UqConfig, UqStage};
pub use uncertainty::{run_uq, two_step_uniaxial, uq, TwoStepOutcome, TwoStepSettings};

use report::{Manifest, PlateManifest};

/// Environment variable consulted when neither flag nor config sets a seed.
pub const SEED_ENV: &str = "CALIBRIX_SEED";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("missing {what}: {path}")]
    Missing { what: &'static str, path: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Identify(#[from] IdentifyError),
    #[error(transparent)]
    Uq(#[from] UqError),
}

impl PipelineError {
    /// 2 for usage and configuration problems, 3 for numerical failures,
    /// 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. } => 1,
            PipelineError::Data(DataError::Fem(_))
            | PipelineError::Identify(_)
            | PipelineError::Uq(_) => 3,
            PipelineError::Config { .. }
            | PipelineError::Missing { .. }
            | PipelineError::Material(_)
            | PipelineError::Mesh(_)
            | PipelineError::Data(_) => 2,
        }
    }

    fn config(path: &Path, message: impl Into<String>) -> Self {
        PipelineError::Config {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}

/// Files written by a stage and whether its numerics converged.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub written: Vec<PathBuf>,
    pub converged: bool,
    pub summary: String,
}

/// A parsed config file and the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub config: T,
    pub base: PathBuf,
    pub path: PathBuf,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => PipelineError::Missing {
            what: "config file",
            path: path.display().to_string(),
        },
        _ => PipelineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        },
    })?;
    let config = toml::from_str(&text).map_err(|e| PipelineError::config(path, e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded {
        config,
        base,
        path: path.to_path_buf(),
    })
}

/// SHA-256 of the effective config in canonical TOML form.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let text = toml::to_string(config).expect("configs serialize to TOML");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn file_hash(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Flag, then config, then [`SEED_ENV`], then 0.
pub fn resolve_seed(
    flag: Option<u64>,
    config: Option<u64>,
    env: Option<&str>,
) -> Result<u64, PipelineError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| PipelineError::Config {
            path: SEED_ENV.into(),
            message: format!("`{v}` is not an unsigned integer seed"),
        }),
        None => Ok(0),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

/// Writes `text`, creating missing parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PipelineError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
    }
    fs::write(path, text).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub(crate) fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("reports serialize to TOML")
}

pub(crate) fn read_mesh(path: &Path) -> Result<Mesh<f64>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::Missing {
            what: "mesh file",
            path: path.display().to_string(),
        });
    }
    Mesh::read(path).map_err(|e| PipelineError::config(path, e.to_string()))
}

pub(crate) fn read_data(path: &Path) -> Result<ObservationSet, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::Missing {
            what: "data file",
            path: path.display().to_string(),
        });
    }
    ObservationSet::load(path).map_err(|e| PipelineError::config(path, e.to_string()))
}

fn material(path: &Path, table: &toml::Table) -> Result<MaterialParams, PipelineError> {
    MaterialParams::parse(&toml::to_string(table).expect("tables serialize"))
        .map_err(|e| PipelineError::config(path, format!("truth: {e}")))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides<M> {
    pub method: Option<M>,
    pub seed: Option<u64>,
}

/// Writes the data CSV and its manifest.
pub fn generate(
    config_path: &Path,
    overrides: &Overrides<()>,
) -> Result<StageOutput, PipelineError> {
    let loaded: Loaded<GenerateConfig> = load_config(config_path)?;
    let cfg = &loaded.config;
    let seed = resolve_seed(overrides.seed, cfg.seed, env_seed().as_deref())?;
    let truth = material(config_path, &cfg.truth)?;
    let data_path = loaded.resolve(&cfg.output);
    let manifest_path = match &cfg.manifest {
        Some(m) => loaded.resolve(m),
        None => data_path.with_extension("manifest.toml"),
    };
    let mut manifest = Manifest {
        tool: report::TOOL,
        version: report::VERSION,
        experiment: format!("{:?}", cfg.experiment).to_lowercase(),
        seed,
        data: cfg.output.display().to_string(),
        truth: cfg.truth.clone(),
        plate: None,
        uniaxial: None,
    };
    let data = match cfg.experiment {
        Experiment::Plate => {
            let plate = cfg
                .plate
                .as_ref()
                .ok_or_else(|| PipelineError::config(config_path, "missing [plate] section"))?;
            if !(plate.sigma >= 0.0) {
                return Err(PipelineError::config(
                    config_path,
                    "plate.sigma must be non-negative",
                ));
            }
            let coarse_path = loaded.resolve(&plate.mesh);
            let fine_path = loaded.resolve(&plate.fine_mesh);
            let coarse = read_mesh(&coarse_path)?;
            let fine = read_mesh(&fine_path)?;
            manifest.plate = Some(PlateManifest {
                sigma: plate.sigma,
                load: plate.load,
                mesh: plate.mesh.display().to_string(),
                mesh_sha256: file_hash(&coarse_path)?,
                mesh_elements: coarse.elements().len(),
                fine_mesh: plate.fine_mesh.display().to_string(),
                fine_mesh_sha256: file_hash(&fine_path)?,
                fine_mesh_elements: fine.elements().len(),
            });
            generate_plate_data(
                &fine,
                &coarse,
                &truth.elastic,
                plate.load,
                plate.sigma,
                seed,
            )?
            .observations
        }
        Experiment::Uniaxial => {
            let u = cfg
                .uniaxial
                .as_ref()
                .ok_or_else(|| PipelineError::config(config_path, "missing [uniaxial] section"))?;
            if u.steps == 0 || !(u.dt > 0.0) {
                return Err(PipelineError::config(
                    config_path,
                    "uniaxial.steps and uniaxial.dt must be positive",
                ));
            }
            let protocol = UniaxialProtocol::ramp(u.exp, u.max_strain, u.steps, u.dt)
                .with_noise(u.stress_noise, u.lateral_noise);
            manifest.uniaxial = Some(toml::Table::try_from(u).expect("section serializes"));
            generate_uniaxial_data(&protocol, &truth.elastic, truth.plastic.as_ref(), seed)?
        }
    };
    write_text(&data_path, &data.to_csv_string())?;
    write_text(&manifest_path, &to_toml(&manifest))?;
    Ok(StageOutput {
        summary: format!("{} observations, seed {seed}", data.len()),
        written: vec![data_path, manifest_path],
        converged: true,
    })
}

/// Writes the plate mesh at `resolution` and, when `refine > 1`, the refined
/// reference mesh.
pub fn write_plate_meshes(
    geometry: &PlateGeometry,
    resolution: PlateResolution,
    out: &Path,
    refined: Option<(usize, &Path)>,
) -> Result<StageOutput, PipelineError> {
    let mut written = Vec::new();
    let mut summary = Vec::new();
    let mut targets = vec![(resolution, out)];
    if let Some((factor, path)) = refined {
        targets.push((resolution.refined(factor), path));
    }
    for (res, path) in targets {
        let mesh: Mesh<f64> = plate_with_hole(geometry, res)?;
        write_text(path, &mesh.to_text())?;
        summary.push(format!(
            "{}: {} elements",
            path.display(),
            mesh.elements().len()
        ));
        written.push(path.to_path_buf());
    }
    Ok(StageOutput {
        written,
        converged: true,
        summary: summary.join(", "),
    })
}

/// Plot-ready CSV of the parameter rows of calibration and uq reports:
/// `report,stage,method,table,name,unit,estimate,std,two_step_std,lower,upper`.
pub fn report_table(paths: &[PathBuf]) -> Result<String, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "report",
        "stage",
        "method",
        "table",
        "name",
        "unit",
        "estimate",
        "std",
        "two_step_std",
        "lower",
        "upper",
    ];
    w.write_record(header).expect("in-memory csv");
    for path in paths {
        if !path.exists() {
            return Err(PipelineError::Missing {
                what: "report",
                path: path.display().to_string(),
            });
        }
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let doc: toml::Table =
            toml::from_str(&text).map_err(|e| PipelineError::config(path, e.to_string()))?;
        let field = |key: &str| {
            doc.get(key)
                .and_then(|v| v.as_str())
                .unwrap_or("")
                .to_string()
        };
        let (stage, method) = (field("stage"), field("method"));
        if stage.is_empty() {
            return Err(PipelineError::config(
                path,
                "not a calibrix report (no `stage` key)",
            ));
        }
        let mut tables: Vec<(&str, &toml::Value)> = Vec::new();
        for key in ["parameters", "elastic"] {
            if let Some(v) = doc.get(key) {
                tables.push((key, v));
            }
        }
        if let Some(u) = doc.get("uncertainty").and_then(|u| u.get("parameters")) {
            tables.push(("uncertainty", u));
        }
        for (table, rows) in tables {
            for row in rows.as_array().into_iter().flatten() {
                let s = |k: &str| {
                    row.get(k)
                        .and_then(|v| v.as_str())
                        .unwrap_or("")
                        .to_string()
                };
                let n = |k: &str| {
                    row.get(k)
                        .and_then(|v| v.as_float())
                        .map(|v| v.to_string())
                        .unwrap_or_default()
                };
                let estimate = if row.get("value").is_some() {
                    n("value")
                } else {
                    n("estimate")
                };
                w.write_record([
                    path.display().to_string(),
                    stage.clone(),
                    method.clone(),
                    table.to_string(),
                    s("name"),
                    s("unit"),
                    estimate,
                    n("std"),
                    n("two_step_std"),
                    n("lower"),
                    n("upper"),
                ])
                .expect("in-memory csv");
            }
        }
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv"))
}
