use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use calibrix::mesh::{PlateGeometry, PlateResolution};
use calibrix::pipeline::{self, Method, Overrides, PipelineError, StageOutput, UqStage};

/// Exit code for a finished stage whose numerics did not converge.
const NOT_CONVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "calibrix",
    version,
    about = "Material parameter calibration from full-field data"
)]
struct Cli {
    /// Seed overriding the config and CALIBRIX_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sampling and finite differences.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic measurements and a manifest.
    Generate { config: PathBuf },
    /// Identify parameters with one method.
    Calibrate {
        config: PathBuf,
        #[arg(long)]
        method: Option<Method>,
    },
    /// Quantify the uncertainty of calibrated parameters.
    Uq {
        config: PathBuf,
        #[arg(long)]
        method: Option<UqStage>,
    },
    /// Collect the parameter rows of reports into one CSV.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Output file; standard output when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write the quarter plate mesh and optionally a refined reference mesh.
    Mesh {
        #[arg(long, default_value_t = PlateResolution::COARSE.arc)]
        arc: usize,
        #[arg(long, default_value_t = PlateResolution::COARSE.radial)]
        radial: usize,
        #[arg(long)]
        out: PathBuf,
        /// Refinement factor of the reference mesh.
        #[arg(long, default_value_t = 4, requires = "fine_out")]
        refine: usize,
        #[arg(long)]
        fine_out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<StageOutput, PipelineError> {
    match cli.command {
        Command::Generate { config } => pipeline::generate(
            &config,
            &Overrides {
                method: None,
                seed: cli.seed,
            },
        ),
        Command::Calibrate { config, method } => pipeline::calibrate(
            &config,
            &Overrides {
                method,
                seed: cli.seed,
            },
        ),
        Command::Uq { config, method } => pipeline::uq(
            &config,
            &Overrides {
                method,
                seed: cli.seed,
            },
        ),
        Command::Report { reports, output } => {
            let table = pipeline::report_table(&reports)?;
            match output {
                Some(path) => {
                    pipeline::write_text(&path, &table)?;
                    Ok(StageOutput {
                        summary: format!("{} reports", reports.len()),
                        written: vec![path],
                        converged: true,
                    })
                }
                None => {
                    print!("{table}");
                    Ok(StageOutput {
                        written: Vec::new(),
                        converged: true,
                        summary: String::new(),
                    })
                }
            }
        }
        Command::Mesh {
            arc,
            radial,
            out,
            refine,
            fine_out,
        } => pipeline::write_plate_meshes(
            &PlateGeometry::default(),
            PlateResolution { arc, radial },
            &out,
            fine_out.as_deref().map(|p| (refine, p)),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("calibrix: --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(out) => {
            if !out.summary.is_empty() {
                eprintln!("{}", out.summary);
            }
            for path in &out.written {
                eprintln!("wrote {}", path.display());
            }
            if out.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("calibrix: no convergence; best iterate written");
                ExitCode::from(NOT_CONVERGED)
            }
        }
        Err(e) => {
            eprintln!("calibrix: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
