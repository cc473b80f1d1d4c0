use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_calibrix");

struct Workdir(PathBuf);

impl Workdir {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("calibrix-cli-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        Workdir(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .args(args)
            .current_dir(&self.0)
            .env_remove("CALIBRIX_SEED")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }
}

impl Drop for Workdir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn plate_config(sigma: f64, seed: u64) -> String {
    format!(
        "experiment = \"plate\"\nseed = {seed}\noutput = \"data.csv\"\n\n[truth]\nE = 210000.0\nnu = 0.3\n\n\
         [plate]\nmesh = \"mesh.txt\"\nfine_mesh = \"fine.txt\"\nsigma = {sigma:e}\n"
    )
}

const CALIBRATE: &str = "data = \"data.csv\"\nmesh = \"mesh.txt\"\noutput = \"calibration.toml\"\n";

/// Small plate meshes and clean data.
fn plate_workdir(name: &str, sigma: f64, seed: u64) -> Workdir {
    let w = Workdir::new(name);
    w.ok(&[
        "mesh",
        "--arc",
        "8",
        "--radial",
        "7",
        "--out",
        "mesh.txt",
        "--refine",
        "2",
        "--fine-out",
        "fine.txt",
    ]);
    w.write("generate.toml", &plate_config(sigma, seed));
    w.ok(&["generate", "generate.toml"]);
    w.write("calibrate.toml", CALIBRATE);
    w
}

fn report(w: &Workdir, name: &str) -> toml::Table {
    toml::from_str(&w.read(name)).unwrap()
}

fn elastic_value(doc: &toml::Table, name: &str) -> f64 {
    doc["elastic"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"].as_str() == Some(name))
        .and_then(|r| r["value"].as_float())
        .unwrap()
}

#[test]
fn clean_generation_is_byte_identical() {
    let w = plate_workdir("identical", 0.0, 1);
    let (csv, manifest) = (w.read("data.csv"), w.read("data.manifest.toml"));
    w.ok(&["generate", "generate.toml"]);
    assert_eq!(csv, w.read("data.csv"));
    assert_eq!(manifest, w.read("data.manifest.toml"));
}

#[test]
fn seeds_change_the_data_and_only_the_manifest_seed() {
    let w = plate_workdir("seeds", 4e-4, 42);
    let (csv42, manifest42) = (w.read("data.csv"), w.read("data.manifest.toml"));
    w.ok(&["generate", "generate.toml", "--seed", "43"]);
    let (csv43, manifest43) = (w.read("data.csv"), w.read("data.manifest.toml"));
    assert_ne!(csv42, csv43);
    let differing: Vec<(&str, &str)> = manifest42
        .lines()
        .zip(manifest43.lines())
        .filter(|(a, b)| a != b)
        .collect();
    assert_eq!(differing, vec![("seed = 42", "seed = 43")]);
}

#[test]
fn environment_seed_applies_only_without_flag_and_config() {
    let w = Workdir::new("env-seed");
    w.ok(&[
        "mesh",
        "--arc",
        "4",
        "--radial",
        "3",
        "--out",
        "mesh.txt",
        "--refine",
        "2",
        "--fine-out",
        "fine.txt",
    ]);
    w.write(
        "generate.toml",
        &plate_config(4e-4, 5).replace("seed = 5\n", ""),
    );
    let with_env = |seed: &str| {
        let out = Command::new(BIN)
            .args(["generate", "generate.toml"])
            .current_dir(&w.0)
            .env("CALIBRIX_SEED", seed)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        w.read("data.manifest.toml")
    };
    assert!(with_env("17").contains("seed = 17"));
    w.ok(&["generate", "generate.toml", "--seed", "3"]);
    assert!(w.read("data.manifest.toml").contains("seed = 3"));
}

#[test]
fn missing_mesh_exits_2_naming_the_file() {
    let w = Workdir::new("missing-mesh");
    w.write("generate.toml", &plate_config(0.0, 1));
    let out = w.run(&["generate", "generate.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mesh.txt"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_exits_2_naming_the_key() {
    let w = Workdir::new("bad-key");
    w.write(
        "generate.toml",
        &plate_config(0.0, 1).replace("sigma =", "sigmaa ="),
    );
    let out = w.run(&["generate", "generate.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sigmaa"), "{}", stderr(&out));
}

#[test]
fn unknown_method_exits_2() {
    let w = Workdir::new("bad-method");
    w.write("calibrate.toml", CALIBRATE);
    let out = w.run(&["calibrate", "calibrate.toml", "--method", "newton"]);
    assert_eq!(out.status.code(), Some(2));
    let out = w.run(&["calibrate", "calibrate.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("method"), "{}", stderr(&out));
}

#[test]
fn reduced_report_carries_estimate_and_uncertainty() {
    let w = plate_workdir("reduced", 0.0, 1);
    w.ok(&["calibrate", "calibrate.toml", "--method", "reduced"]);
    let doc = report(&w, "calibration.toml");
    assert_eq!(doc["tool"].as_str(), Some("calibrix"));
    assert_eq!(doc["version"].as_str(), Some(env!("CARGO_PKG_VERSION")));
    assert_eq!(doc["config_hash"].as_str().map(str::len), Some(64));
    let (e, nu) = (elastic_value(&doc, "E"), elastic_value(&doc, "nu"));
    assert!((e / 210_000.0 - 1.0).abs() < 0.03, "E = {e}");
    assert!((nu - 0.3).abs() < 0.01, "nu = {nu}");
    assert!(doc["uncertainty"]["parameters"]
        .as_array()
        .is_some_and(|p| p.len() == 2));
    assert!(doc.contains_key("objectives"));
}

#[test]
fn vfm_report_has_no_iteration_log() {
    let w = plate_workdir("vfm", 0.0, 1);
    w.ok(&["calibrate", "calibrate.toml", "--method", "vfm"]);
    let doc = report(&w, "calibration.toml");
    assert!(!doc.contains_key("objectives"));
    assert!(!doc["diagnostics"]
        .as_table()
        .unwrap()
        .contains_key("iterations"));
    assert!(doc["diagnostics"]["equilibrium_gap"].as_float().is_some());
}

#[test]
fn aao_fem_echoes_the_default_weights() {
    let w = plate_workdir("aao", 0.0, 1);
    w.ok(&["calibrate", "calibrate.toml", "--method", "aao-fem"]);
    let doc = report(&w, "calibration.toml");
    assert_eq!(doc["weights"]["sigma_s"].as_float(), Some(1.0));
    assert_eq!(doc["weights"]["sigma_d"].as_float(), Some(1e-5));
}

#[test]
fn uq_without_calibration_exits_2_naming_the_artifact() {
    let w = plate_workdir("uq-missing", 0.0, 1);
    w.write(
        "uq.toml",
        "output = \"uq.toml.out\"\n[plate]\ndata = \"data.csv\"\nmesh = \"mesh.txt\"\ncalibration = \"calibration.toml\"\n",
    );
    let out = w.run(&["uq", "uq.toml", "--method", "asymptotic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("calibration report"),
        "{}",
        stderr(&out)
    );
    assert!(
        stderr(&out).contains("calibration.toml"),
        "{}",
        stderr(&out)
    );
}

fn uniaxial_workdir(name: &str) -> Workdir {
    let w = Workdir::new(name);
    w.write(
        "elastic.toml",
        "experiment = \"uniaxial\"\nseed = 7\noutput = \"elastic.csv\"\n[truth]\nK = 150991.0\nG = 79321.0\n\
         [uniaxial]\nmax_strain = 0.001\nsteps = 20\nstress_noise = 2.0\nlateral_noise = 2e-6\n",
    );
    w.write(
        "plastic.toml",
        "experiment = \"uniaxial\"\nseed = 8\noutput = \"plastic.csv\"\n[truth]\nK = 150991.0\nG = 79321.0\n\
         k = 282.6\nb = 41.04\nc = 3499.8\n[uniaxial]\nexp = 2\nmax_strain = 0.05\nsteps = 50\nstress_noise = 2.0\n",
    );
    w.write(
        "uq.toml",
        "output = \"uq-report.toml\"\nchain = \"draws.csv\"\n[uniaxial]\nelastic_data = \"elastic.csv\"\n\
         plastic_data = \"plastic.csv\"\nstress_noise = 2.0\nlateral_noise = 2e-6\n\
         elastic_initial = [140000.0, 70000.0]\nplastic_initial = [250.0, 30.0, 3000.0]\nn_outer = 10\n\
         [sampler]\nwalkers = 8\nsteps = 100\n",
    );
    w.ok(&["generate", "elastic.toml"]);
    w.ok(&["generate", "plastic.toml"]);
    w
}

fn rows<'a>(doc: &'a toml::Table, table: &str) -> &'a Vec<toml::Value> {
    doc[table].as_array().unwrap()
}

#[test]
fn two_step_reports_both_plastic_deviations() {
    let w = uniaxial_workdir("two-step");
    w.ok(&["uq", "uq.toml", "--method", "two-step"]);
    let doc = report(&w, "uq-report.toml");
    let names: Vec<&str> = rows(&doc, "parameters")
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["k", "b", "c"]);
    for r in rows(&doc, "parameters") {
        let (std, two) = (
            r["std"].as_float().unwrap(),
            r["two_step_std"].as_float().unwrap(),
        );
        assert!(std > 0.0 && two >= std, "{r}");
    }
    assert_eq!(rows(&doc, "elastic").len(), 2);
}

#[test]
fn hierarchical_smoke_run_summarizes_every_draw() {
    let w = uniaxial_workdir("hierarchical");
    w.ok(&["uq", "uq.toml", "--method", "hierarchical"]);
    let doc = report(&w, "uq-report.toml");
    assert_eq!(doc["hierarchical"]["draws"].as_integer(), Some(10));
    assert_eq!(w.read("draws.csv").lines().count(), 11);
}

fn outputs(w: &Workdir, names: &[&str]) -> Vec<String> {
    names.iter().map(|n| w.read(n)).collect()
}

fn pipeline(w: &Workdir) {
    w.write(
        "uq.toml",
        "output = \"bayes.toml\"\nchain = \"chain.csv\"\n[plate]\ndata = \"data.csv\"\nmesh = \"mesh.txt\"\n\
         calibration = \"calibration.toml\"\n[sampler]\nwalkers = 8\nsteps = 60\n",
    );
    w.ok(&["calibrate", "calibrate.toml", "--method", "reduced"]);
    w.ok(&["uq", "uq.toml", "--method", "bayes", "--seed", "11"]);
    let out = w.ok(&["report", "calibration.toml", "bayes.toml"]);
    fs::write(w.path("table.csv"), out.stdout).unwrap();
}

#[test]
fn fixed_seed_pipeline_is_byte_identical() {
    let names = [
        "data.csv",
        "data.manifest.toml",
        "calibration.toml",
        "bayes.toml",
        "chain.csv",
        "table.csv",
    ];
    let a = plate_workdir("pipeline-a", 2e-4, 9);
    pipeline(&a);
    let b = plate_workdir("pipeline-b", 2e-4, 9);
    pipeline(&b);
    assert_eq!(outputs(&a, &names), outputs(&b, &names));
    let table = a.read("table.csv");
    assert!(table
        .starts_with("report,stage,method,table,name,unit,estimate,std,two_step_std,lower,upper"));
    assert!(
        table.lines().any(|l| l.contains(",uq,bayes,parameters,E,")),
        "{table}"
    );
}

#[test]
fn report_of_a_missing_file_exits_2() {
    let w = Workdir::new("report-missing");
    let out = w.run(&["report", "nowhere.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nowhere.toml"));
}

#[test]
fn jobs_flag_leaves_results_unchanged() {
    let w = plate_workdir("jobs", 0.0, 1);
    w.ok(&["calibrate", "calibrate.toml", "--method", "reduced"]);
    let serial = w.read("calibration.toml");
    w.ok(&[
        "--jobs",
        "2",
        "calibrate",
        "calibrate.toml",
        "--method",
        "reduced",
    ]);
    assert_eq!(serial, w.read("calibration.toml"));
}
