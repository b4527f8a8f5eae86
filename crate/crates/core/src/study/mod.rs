//! Convergence and robustness studies: configuration, sweeps, reference
//! values, rate fits and CSV/manifest serialization.

mod reference;
mod rates;
mod runs;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::mesh::Domain;
use crate::source_solve::ManufacturedCase;
use crate::{Error, Result};

pub use reference::{aitken, mark_crossings, reference_eigenvalues, ReferenceValue, REFERENCE_DEGREE};
pub use rates::{estimate_rate, fit_rates, RateEstimate, SeriesRate};
pub use runs::{
    cg_eigenpairs, cg_spectrum, dg_eigenpairs, dg_spectrum, run, run_conforming_compare, run_eigen_convergence, run_robustness,
    run_source_convergence, Spectrum,
};

/// Finest level allowed in 2D; direct factorization memory bounds it.
pub const MAX_LEVEL_2D: usize = 6;
/// Finest level allowed in 3D.
pub const MAX_LEVEL_3D: usize = 3;

/// `ω` below this is a defect, not roundoff.
pub const NEGATIVE_OMEGA_TOL: f64 = -1e-8;

pub const CSV_HEADER: &str = "domain,degree,level,ndofs,lambda,gamma,quantity,value,reference,error,flag,wall_time_s";

/// Inclusive range of refinement levels, written `min:max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LevelRange {
    pub min: usize,
    pub max: usize,
}

impl LevelRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min > max {
            return Err(Error::Config(format!("empty level range {min}:{max}")));
        }
        Ok(Self { min, max })
    }

    pub fn single(level: usize) -> Self {
        Self { min: level, max: level }
    }

    pub fn len(&self) -> usize {
        self.max - self.min + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.min..=self.max
    }
}

impl fmt::Display for LevelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.min, self.max)
    }
}

impl FromStr for LevelRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid level range '{s}'")))
        };
        match s.split_once(':') {
            Some((a, b)) => Self::new(parse(a)?, parse(b)?),
            None => Ok(Self::single(parse(s)?)),
        }
    }
}

impl Serialize for LevelRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LevelRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Level(usize),
            Text(String),
            Bounds { min: usize, max: usize },
        }
        match Repr::deserialize(d)? {
            Repr::Level(l) => Ok(Self::single(l)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
            Repr::Bounds { min, max } => Self::new(min, max).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(alias = "eigen-convergence")]
    EigenConvergence,
    #[serde(alias = "robustness")]
    Robustness,
    #[serde(alias = "source-convergence")]
    SourceConvergence,
    #[serde(alias = "conforming-compare")]
    ConformingCompare,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::EigenConvergence,
        Mode::Robustness,
        Mode::SourceConvergence,
        Mode::ConformingCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::EigenConvergence => "eigen-convergence",
            Mode::Robustness => "robustness",
            Mode::SourceConvergence => "source-convergence",
            Mode::ConformingCompare => "conforming-compare",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Mode::ALL
            .into_iter()
            .find(|m| m.name().replace('-', "") == key)
            .ok_or_else(|| Error::Config(format!("unknown mode '{s}'")))
    }
}

fn default_degrees() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6]
}

fn default_mu() -> f64 {
    1.0
}

fn default_gammas() -> Vec<f64> {
    vec![10.0, 40.0, 90.0]
}

fn default_nev() -> usize {
    7
}

fn default_output() -> PathBuf {
    PathBuf::from("results.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub domain: Domain,
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    pub levels: LevelRange,
    #[serde(default = "default_nev")]
    pub nev: usize,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Levels whose three finest `P3` solves give the reference eigenvalues;
    /// defaults to the three levels ending at `levels.max` (at least `0:2`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_levels: Option<LevelRange>,
    /// Manufactured solutions for source studies; defaults to
    /// `LINEAR_DILATION` plus `HARMONIC_PAIR_3` (2D) or `CURL_HARMONIC` (3D).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<Vec<ManufacturedCase>>,
    /// Record per-row wall times. Off by default so that CSV output is
    /// byte-for-byte reproducible; `wall_time_s` is then `0`.
    #[serde(default)]
    pub timings: bool,
}

impl StudyConfig {
    /// A configuration with every optional field at its default.
    pub fn new(domain: Domain, mode: Mode, levels: LevelRange) -> Self {
        Self {
            domain,
            degrees: default_degrees(),
            lambdas: default_lambdas(),
            mu: default_mu(),
            gammas: default_gammas(),
            levels,
            nev: default_nev(),
            mode,
            seed: 0,
            output: default_output(),
            reference_levels: None,
            cases: None,
            timings: false,
        }
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let config: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_json_value(value)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn max_level(&self) -> usize {
        if self.domain.dim() == 2 {
            MAX_LEVEL_2D
        } else {
            MAX_LEVEL_3D
        }
    }

    pub fn reference_levels(&self) -> LevelRange {
        self.reference_levels.unwrap_or_else(|| {
            let max = self.levels.max.max(2);
            LevelRange { min: max - 2, max }
        })
    }

    pub fn cases(&self) -> Vec<ManufacturedCase> {
        self.cases.clone().unwrap_or_else(|| {
            if self.domain.dim() == 2 {
                vec![ManufacturedCase::LinearDilation, ManufacturedCase::HarmonicPair(3)]
            } else {
                vec![ManufacturedCase::LinearDilation, ManufacturedCase::CurlHarmonic]
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.degrees.is_empty() {
            return bad("degrees is empty".into());
        }
        let max_degree = if self.mode == Mode::ConformingCompare { 2 } else { 3 };
        if let Some(k) = self.degrees.iter().find(|k| !(1..=max_degree).contains(*k)) {
            return bad(format!("degree {k} outside 1..={max_degree} for {}", self.mode));
        }
        if self.lambdas.is_empty() {
            return bad("lambdas is empty".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return bad(format!("lambda {l} is not positive"));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad(format!("mu {} is not positive", self.mu));
        }
        if self.gammas.is_empty() {
            return bad("gammas is empty".into());
        }
        if let Some(g) = self.gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return bad(format!("gamma {g} is not positive"));
        }
        if self.nev == 0 {
            return bad("nev must be at least 1".into());
        }
        let cap = self.max_level();
        if self.levels.min > self.levels.max {
            return bad(format!("empty level range {}", self.levels));
        }
        if self.levels.max > cap {
            return bad(format!("level {} exceeds the {}D cap {cap}", self.levels.max, self.domain.dim()));
        }
        let needs_reference = matches!(
            self.mode,
            Mode::EigenConvergence | Mode::Robustness | Mode::ConformingCompare
        );
        if needs_reference {
            let r = self.reference_levels();
            if r.len() < 3 {
                return bad(format!("reference levels {r} span fewer than three levels"));
            }
            if r.max > cap {
                return bad(format!("reference level {} exceeds the {}D cap {cap}", r.max, self.domain.dim()));
            }
        }
        if self.mode == Mode::SourceConvergence {
            let dim = self.domain.dim();
            if let Some(c) = self.cases().iter().find(|c| !c.supports(dim)) {
                return Err(Error::UnknownCase { case: c.name(), dim });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// Solve, factorization or reference computation failed.
    Failed,
    /// A Steklov eigenvalue below [`NEGATIVE_OMEGA_TOL`].
    NegativeOmega,
    /// Error below three reference uncertainties.
    ReferenceLimited,
    /// The reference sequence could not be extrapolated, or the reference was
    /// borrowed from a larger `γ` because the `P3` form at this one is not
    /// coercive.
    ReferenceFallback,
    /// Reference eigenvalue within ten uncertainties of a neighbour.
    Crossing,
}

impl Flag {
    pub fn name(self) -> &'static str {
        match self {
            Flag::Failed => "failed",
            Flag::NegativeOmega => "negative-omega",
            Flag::ReferenceLimited => "reference-limited",
            Flag::ReferenceFallback => "reference-fallback",
            Flag::Crossing => "crossing",
        }
    }
}

/// One row of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub domain: Domain,
    pub degree: usize,
    pub level: usize,
    pub ndofs: usize,
    pub lambda: f64,
    /// `0` for conforming rows.
    pub gamma: f64,
    /// `omega_j`, `rigid_modes`, `<CASE>:e_dG`, ...; conforming comparisons
    /// prefix `cg_` / `dg_`.
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    /// `|value − reference|`
    pub error: f64,
    pub flags: Vec<Flag>,
    pub wall_time_s: f64,
    /// Mesh size; not serialized to CSV.
    pub h: f64,
    /// Failure description; not serialized to CSV.
    pub message: Option<String>,
}

impl ConvergenceRecord {
    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    /// A defect row: failed solve or negative Steklov eigenvalue.
    pub fn is_failed(&self) -> bool {
        self.has(Flag::Failed) || self.has(Flag::NegativeOmega)
    }

    pub fn usable_for_fit(&self) -> bool {
        !self.is_failed() && !self.has(Flag::ReferenceLimited) && self.error > 0.0 && self.error.is_finite()
    }

    fn is_rate_quantity(&self) -> bool {
        !self.quantity.ends_with("rigid_modes")
    }

    pub fn flag_field(&self) -> String {
        self.flags.iter().map(|f| f.name()).collect::<Vec<_>>().join(";")
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.domain,
            self.degree,
            self.level,
            self.ndofs,
            num(self.lambda),
            num(self.gamma),
            self.quantity,
            num(self.value),
            num(self.reference),
            num(self.error),
            self.flag_field(),
            self.wall_time_s
        )
    }
}

/// Shortest round-trip scientific notation.
fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:e}")
    }
}

pub fn write_csv<W: Write>(records: &[ConvergenceRecord], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

pub fn csv_string(records: &[ConvergenceRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("ascii csv")
}

/// `results.csv` → `results.manifest.json` in the same directory.
pub fn manifest_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    csv.with_file_name(format!("{stem}.manifest.json"))
}

/// `v<crate version>`
pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureNote {
    pub degree: usize,
    pub level: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub quantity: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub config: StudyConfig,
    pub csv: PathBuf,
    pub rows: usize,
    pub failed_rows: usize,
    pub failures: Vec<FailureNote>,
    pub rates: Vec<SeriesRate>,
}

impl Manifest {
    pub fn new(config: &StudyConfig, records: &[ConvergenceRecord], started: SystemTime, finished: SystemTime) -> Self {
        let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let failures: Vec<FailureNote> = records
            .iter()
            .filter(|r| r.is_failed())
            .map(|r| FailureNote {
                degree: r.degree,
                level: r.level,
                lambda: r.lambda,
                gamma: r.gamma,
                quantity: r.quantity.clone(),
                message: r.message.clone().unwrap_or_else(|| r.flag_field()),
            })
            .collect();
        Self {
            version: version_string(),
            started_unix_s: secs(started),
            finished_unix_s: secs(finished),
            config: config.clone(),
            csv: config.output.clone(),
            rows: records.len(),
            failed_rows: failures.len(),
            failures,
            rates: fit_rates(records),
        }
    }
}

/// Writes the CSV to `config.output` and the manifest next to it; returns
/// the manifest.
pub fn write_outputs(
    config: &StudyConfig,
    records: &[ConvergenceRecord],
    started: SystemTime,
    finished: SystemTime,
) -> Result<Manifest> {
    if let Some(dir) = config.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&config.output, csv_string(records))?;
    let manifest = Manifest::new(config, records, started, finished);
    fs::write(manifest_path(&config.output), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests;
