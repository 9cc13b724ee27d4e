use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::{CombinationRule, NodeSpec};
use crate::error::{Error, Result};
use crate::scene::{PaperLayout, TargetMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cpm,
    Dpmd,
    #[default]
    Both,
}

impl Algorithm {
    pub fn runs_cpm(self) -> bool {
        matches!(self, Algorithm::Cpm | Algorithm::Both)
    }

    pub fn runs_dpmd(self) -> bool {
        matches!(self, Algorithm::Dpmd | Algorithm::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemSpec {
    System1,
    System2,
    Custom { nodes: Vec<NodeSpec> },
}

impl SystemSpec {
    pub fn label(&self) -> &'static str {
        match self {
            SystemSpec::System1 => "system1",
            SystemSpec::System2 => "system2",
            SystemSpec::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemField {
    One(SystemSpec),
    Many(Vec<SystemSpec>),
}

impl Default for SystemField {
    fn default() -> Self {
        SystemField::Many(vec![SystemSpec::System1, SystemSpec::System2])
    }
}

impl SystemField {
    pub fn systems(&self) -> Vec<SystemSpec> {
        match self {
            SystemField::One(s) => vec![s.clone()],
            SystemField::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtfBackend {
    #[default]
    Freefield,
    ImageSource,
    File,
}

/// A fixed step size or `"auto"`: half the mean-convergence bound of the
/// first perturbed ATF draw of each run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    Auto,
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::Fixed(2.5)
    }
}

impl Serialize for StepSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StepSize::Fixed(v) => s.serialize_f64(*v),
            StepSize::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(StepSize::Fixed(v)),
            Raw::Int(v) => Ok(StepSize::Fixed(v as f64)),
            Raw::Text(t) if t == "auto" => Ok(StepSize::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"auto\", got \"{t}\""
            ))),
        }
    }
}

/// Accepts a float, an integer, or the strings `"inf"` / `"infinity"`.
fn de_snr<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Int(v) => Ok(v as f64),
        Raw::Text(t) if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") => {
            Ok(f64::INFINITY)
        }
        Raw::Text(t) => Err(serde::de::Error::custom(format!(
            "expected a number or \"inf\", got \"{t}\""
        ))),
    }
}

fn default_frequencies() -> Vec<f64> {
    (1..=40).map(|k| 100.0 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub system: SystemField,
    pub atf_backend: AtfBackend,
    pub target_mode: TargetMode,
    /// Bins of the `sweep` subcommand.
    pub frequencies: Vec<f64>,
    /// Frequency of the `run` and `compare` subcommands.
    pub run_frequency_hz: f64,
    pub iterations: usize,
    pub monte_carlo_runs: usize,
    pub step_size: StepSize,
    pub perturbation_variance: f64,
    #[serde(deserialize_with = "de_snr")]
    pub snr_db: f64,
    pub combination_rule: CombinationRule,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Exclude and count diverged runs instead of failing.
    pub allow_divergence: bool,
    pub fs: f64,
    pub window_len: usize,
    pub geometry: PaperLayout,
    pub t60: f64,
    pub max_order: u32,
    pub atf_file: Option<PathBuf>,
    pub planewave_direction: [f64; 3],
    pub planewave_amplitude: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::Both,
            system: SystemField::default(),
            atf_backend: AtfBackend::Freefield,
            target_mode: TargetMode::Oracle,
            frequencies: default_frequencies(),
            run_frequency_hz: 1000.0,
            iterations: 5000,
            monte_carlo_runs: 100,
            step_size: StepSize::default(),
            perturbation_variance: 0.0707,
            snr_db: 20.0,
            combination_rule: CombinationRule::Uniform,
            seed: 0,
            output_dir: PathBuf::from("results"),
            allow_divergence: false,
            fs: 8000.0,
            window_len: 3200,
            geometry: PaperLayout::default(),
            t60: 0.2,
            max_order: 3,
            atf_file: None,
            planewave_direction: [0.0, 1.0, 0.0],
            planewave_amplitude: 1.0,
        }
    }
}

fn invalid(field: &str, constraint: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{field}`: {constraint}"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be >= 1"));
        }
        if self.monte_carlo_runs == 0 {
            return Err(invalid("monte_carlo_runs", "must be >= 1"));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(invalid("fs", "must be positive"));
        }
        if self.window_len == 0 {
            return Err(invalid("window_len", "must be >= 1"));
        }
        if self.frequencies.is_empty() {
            return Err(invalid("frequencies", "must not be empty"));
        }
        for &f in &self.frequencies {
            if !(f.is_finite() && f > 0.0) {
                return Err(invalid("frequencies", format!("{f} is not a positive frequency")));
            }
        }
        if !(self.run_frequency_hz.is_finite() && self.run_frequency_hz > 0.0) {
            return Err(invalid("run_frequency_hz", "must be positive"));
        }
        if let StepSize::Fixed(mu) = self.step_size {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(invalid("step_size", "must be positive or \"auto\""));
            }
        }
        if !(self.perturbation_variance.is_finite() && self.perturbation_variance >= 0.0) {
            return Err(invalid("perturbation_variance", "must be >= 0"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(invalid("snr_db", "must be a number or inf"));
        }
        if self.system.systems().is_empty() && self.algorithm.runs_dpmd() {
            return Err(invalid("system", "at least one system is needed for dpmd"));
        }
        if self.atf_backend == AtfBackend::File && self.atf_file.is_none() {
            return Err(invalid("atf_file", "required when atf_backend = \"file\""));
        }
        if !(self.t60.is_finite() && self.t60 > 0.0) {
            return Err(invalid("t60", "must be positive"));
        }
        if !(self.planewave_amplitude.is_finite() && self.planewave_amplitude > 0.0) {
            return Err(invalid("planewave_amplitude", "must be positive"));
        }
        let n = self.planewave_direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !((n - 1.0).abs() <= 1e-9) {
            return Err(invalid("planewave_direction", "must be a unit vector"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization, hex encoded. The output
    /// directory is left out: it does not change any result.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let text = toml::to_string(&canonical).unwrap_or_else(|_| format!("{canonical:?}"));
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Position of the run frequency in `frequencies`, used for seeding; a
    /// frequency outside the list gets the index one past its end.
    pub fn run_frequency_index(&self) -> usize {
        self.frequencies
            .iter()
            .position(|&f| f == self.run_frequency_hz)
            .unwrap_or(self.frequencies.len())
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
