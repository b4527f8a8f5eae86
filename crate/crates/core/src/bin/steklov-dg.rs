use std::path::PathBuf;
use std::process::ExitCode;
use std::time::SystemTime;

use clap::{Parser, ValueEnum};
use serde_json::{json, Map, Value};

use steklov_dg::study::{self, Mode, StudyConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    EigenConvergence,
    Robustness,
    SourceConvergence,
    ConformingCompare,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::EigenConvergence => Mode::EigenConvergence,
            ModeArg::Robustness => Mode::Robustness,
            ModeArg::SourceConvergence => Mode::SourceConvergence,
            ModeArg::ConformingCompare => Mode::ConformingCompare,
        }
    }
}

/// Steklov–Lamé eigenvalue and source-problem studies with SIPG.
///
/// Flags override values read from `--config`. Exit status: 0 when every row
/// succeeded, 2 when some rows are flagged failed, 1 on configuration or I/O
/// errors.
#[derive(Debug, Parser)]
#[command(name = "steklov-dg", version)]
struct Cli {
    mode: ModeArg,
    /// square | disk | lshape | cube
    #[arg(long)]
    domain: Option<String>,
    /// Polynomial degrees, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    degree: Option<Vec<usize>>,
    /// Lamé λ values, e.g. `1,1e4,1e6`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    lambda: Option<Vec<f64>>,
    /// Penalty values γ (γ_μ = γ_λ).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    gamma: Option<Vec<f64>>,
    /// Refinement levels `min:max`.
    #[arg(long)]
    levels: Option<String>,
    /// Steklov eigenvalues per solve.
    #[arg(long)]
    nev: Option<usize>,
    /// CSV output path; the manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with StudyConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Levels of the P3 reference solves, `min:max` (three or more).
    #[arg(long)]
    reference_levels: Option<String>,
    /// Manufactured cases for source studies, e.g. `LINEAR_DILATION,HARMONIC_PAIR_3`.
    #[arg(long, value_delimiter = ',')]
    cases: Option<Vec<String>>,
    /// Record wall times (the CSV is then no longer reproducible byte for byte).
    #[arg(long)]
    timings: bool,
}

impl Cli {
    fn config(&self) -> steklov_dg::Result<StudyConfig> {
        let mut map = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(steklov_dg::Error::Config("config file is not a JSON object".into())),
                    Err(e) => return Err(steklov_dg::Error::Config(e.to_string())),
                }
            }
            None => Map::new(),
        };
        let mut set = |k: &str, v: Value| {
            map.insert(k.to_string(), v);
        };
        set("mode", serde_json::to_value(Mode::from(self.mode))?);
        if let Some(d) = &self.domain {
            set("domain", json!(d.to_ascii_lowercase()));
        }
        if let Some(v) = &self.degree {
            set("degrees", json!(v));
        }
        if let Some(v) = &self.lambda {
            set("lambdas", json!(v));
        }
        if let Some(v) = &self.gamma {
            set("gammas", json!(v));
        }
        if let Some(v) = &self.levels {
            set("levels", json!(v));
        }
        if let Some(v) = self.nev {
            set("nev", json!(v));
        }
        if let Some(v) = &self.out {
            set("output", json!(v));
        }
        if let Some(v) = self.mu {
            set("mu", json!(v));
        }
        if let Some(v) = self.seed {
            set("seed", json!(v));
        }
        if let Some(v) = &self.reference_levels {
            set("reference_levels", json!(v));
        }
        if let Some(v) = &self.cases {
            set("cases", json!(v));
        }
        if self.timings {
            set("timings", json!(true));
        }
        StudyConfig::from_json_value(Value::Object(map))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; help and version are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let config = match cli.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let started = SystemTime::now();
    let records = match study::run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let manifest = match study::write_outputs(&config, &records, started, SystemTime::now()) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    println!(
        "{} rows -> {} ({} failed)",
        manifest.rows,
        config.output.display(),
        manifest.failed_rows
    );
    for s in &manifest.rates {
        match s.rate {
            Some(r) => println!(
                "k={} lambda={:e} gamma={:e} {:<24} slope_h={:+.3} slope_dofs={:+.3} r2={:.4} levels={:?}",
                s.degree, s.lambda, s.gamma, s.quantity, r.slope_vs_h, r.slope_vs_dofs, r.r_squared, s.levels
            ),
            None => println!(
                "k={} lambda={:e} gamma={:e} {:<24} no rate (levels {:?})",
                s.degree, s.lambda, s.gamma, s.quantity, s.levels
            ),
        }
    }
    for f in &manifest.failures {
        eprintln!(
            "failed: k={} level={} lambda={:e} gamma={:e} {}: {}",
            f.degree, f.level, f.lambda, f.gamma, f.quantity, f.message
        );
    }
    if manifest.failed_rows > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
