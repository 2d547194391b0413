//! Experiment runner behind the `threestage` command.
//!
//! [`parse_arguments`] turns command-line flags into a validated [`ExperimentConfig`],
//! [`run_experiment`] executes it, and [`ExperimentReport`] serializes to JSON or CSV.
//! Reports carry `schema_version: 1`; the JSON form nests per-trial records and the
//! CSV form has one row per trial.

use std::ffi::OsString;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use threestage::adversary::{exact_analysis, mean_and_std_err, EveStrategy, NoiseModel};
use threestage::opsets::{catalog, family_by_name, operator_by_label, verify_family, OperatorFamily, CATALOG};
use threestage::protocol::{run_key_session, SessionConfig, StageLabel};
use threestage::qcore::{StateVector, DERIVED_TOL};
use threestage::rng::{derive_seed, stream_rng};
use threestage::sift::parity_check;

pub const SCHEMA_VERSION: u32 = 1;

/// Stream used for the parity-check draws of a trial, kept clear of block streams.
const PARITY_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    MonteCarlo,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: String,
    pub blocks: usize,
    /// Independent repetitions of the whole key session.
    pub trials: usize,
    pub eve_stages: Vec<u8>,
    pub eve_pre_rotation: Option<String>,
    pub noise_p: f64,
    pub parity_rounds: usize,
    pub seed: u64,
    pub mode: Mode,
    pub output_format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: "pauli".into(),
            blocks: 100,
            trials: 1,
            eve_stages: Vec::new(),
            eve_pre_rotation: None,
            noise_p: 0.0,
            parity_rounds: 20,
            seed: 0,
            mode: Mode::MonteCarlo,
            output_format: OutputFormat::Json,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub bit_error_rate: f64,
    pub eve_guess_success_rate: Option<f64>,
    pub parity_detected: bool,
    pub parity_disclosed_bits: usize,
    pub key_length: usize,
}

/// Exact values, averaged over uniformly drawn basis secrets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub bit_error_rate: f64,
    pub detection_relevant_disturbance: f64,
    pub eve_guess_success_rate: Option<f64>,
}

/// Empirical minus exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub bit_error_rate: f64,
    pub eve_guess_success_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub trials: Vec<TrialRecord>,
    pub mean_bit_error_rate: f64,
    pub std_err_bit_error_rate: f64,
    /// The exact value in exact mode, otherwise the mean Monte Carlo estimate.
    pub eve_guess_success_rate: Option<f64>,
    pub exact: Option<ExactSummary>,
    pub exact_vs_empirical_deltas: Option<Deltas>,
    /// Not covered by the determinism guarantee.
    pub wall_time_seconds: Option<f64>,
}

#[derive(Debug, Error)]
pub enum UsageError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("invalid value for {flag}: {message}")]
    Invalid { flag: &'static str, message: String },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Simulation(#[from] threestage::Error),
    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// What the command line asked for.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Run(ExperimentConfig),
    ListFamilies,
    VerifyFamilies,
}

#[derive(Parser, Debug)]
#[command(name = "threestage", version, about = "Three-stage quantum key distribution experiments")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run an experiment (the default).
    Run(RunArgs),
    /// Print the catalog of operator families.
    ListFamilies,
    /// Check commutation and closure of every catalog family.
    VerifyFamilies,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Operator family: pauli, hadamard, controlled-pair, dft or quaternion.
    #[arg(long, default_value = "pauli")]
    family: String,
    /// Key blocks per session.
    #[arg(long, default_value_t = 100)]
    blocks: usize,
    /// Repetitions of the whole session. Defaults to 1; exact mode requires 1.
    #[arg(long)]
    trials: Option<usize>,
    /// Stages Eve intercepts, e.g. `1,3`.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=3))]
    eve_stages: Vec<u8>,
    /// Operator label Eve rotates by before measuring.
    #[arg(long)]
    eve_basis: Option<String>,
    /// Per-qubit bit-flip probability on every transmission.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Parity-check rounds per session.
    #[arg(long, default_value_t = 20)]
    parity_rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::MonteCarlo)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
}

fn invalid(flag: &'static str, message: impl Into<String>) -> UsageError {
    UsageError::Invalid { flag, message: message.into() }
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig, UsageError> {
        let family = family_by_name(&self.family).map_err(|e| invalid("--family", e.to_string()))?;
        if self.blocks == 0 {
            return Err(invalid("--blocks", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(invalid("--noise", format!("{} is outside [0, 1]", self.noise)));
        }
        if self.parity_rounds == 0 {
            return Err(invalid("--parity-rounds", "must be at least 1"));
        }
        if self.trials == Some(0) {
            return Err(invalid("--trials", "must be at least 1"));
        }
        let mut eve_stages = self.eve_stages;
        eve_stages.sort_unstable();
        eve_stages.dedup();
        if let Some(label) = &self.eve_basis {
            if eve_stages.is_empty() {
                return Err(invalid("--eve-basis", "needs --eve-stages"));
            }
            if operator_by_label(family.dim(), label).is_none() {
                return Err(invalid(
                    "--eve-basis",
                    format!("no operator labelled '{label}' of dimension {}", family.dim()),
                ));
            }
        }
        let trials = match (self.mode, self.trials) {
            (Mode::Exact, Some(t)) if t != 1 => return Err(invalid("--trials", "exact mode runs exactly one trial")),
            (_, t) => t.unwrap_or(1),
        };
        if self.mode == Mode::Exact && self.noise != 0.0 {
            return Err(invalid("--noise", "exact mode is noise-free"));
        }
        Ok(ExperimentConfig {
            family: self.family,
            blocks: self.blocks,
            trials,
            eve_stages,
            eve_pre_rotation: self.eve_basis,
            noise_p: self.noise,
            parity_rounds: self.parity_rounds,
            seed: self.seed,
            mode: self.mode,
            output_format: self.output,
        })
    }
}

/// Parses a full argument list, program name first.
pub fn parse_arguments<I, T>(args: I) -> Result<Command, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        None => Ok(Command::Run(cli.run.into_config()?)),
        Some(Sub::Run(args)) => Ok(Command::Run(args.into_config()?)),
        Some(Sub::ListFamilies) => Ok(Command::ListFamilies),
        Some(Sub::VerifyFamilies) => Ok(Command::VerifyFamilies),
    }
}

fn eve_strategy(config: &ExperimentConfig, family: &OperatorFamily) -> threestage::Result<Option<EveStrategy>> {
    if config.eve_stages.is_empty() {
        return Ok(None);
    }
    let stages = config
        .eve_stages
        .iter()
        .map(|&n| {
            StageLabel::from_number(n)
                .ok_or_else(|| threestage::Error::Config(format!("stage {n} does not exist")))
        })
        .collect::<threestage::Result<Vec<_>>>()?;
    let rotation = match &config.eve_pre_rotation {
        Some(label) => Some(operator_by_label(family.dim(), label).ok_or_else(|| {
            threestage::Error::Config(format!("no operator labelled '{label}' of dimension {}", family.dim()))
        })?),
        None => None,
    };
    EveStrategy::new(stages, rotation).map(Some)
}

/// Exact figures averaged over the basis secrets. Without Eve the noise-free exchange
/// always recovers the secret.
fn exact_summary(family: &OperatorFamily, eve: Option<&EveStrategy>) -> threestage::Result<ExactSummary> {
    let Some(eve) = eve else {
        return Ok(ExactSummary { bit_error_rate: 0.0, detection_relevant_disturbance: 0.0, eve_guess_success_rate: None });
    };
    let n = family.dim() as f64;
    let mut summary = ExactSummary { bit_error_rate: 0.0, detection_relevant_disturbance: 0.0, eve_guess_success_rate: Some(0.0) };
    for s in 0..family.dim() {
        let a = exact_analysis(family, eve, &StateVector::basis(s, family.num_qubits())?)?;
        summary.bit_error_rate += a.bit_error_rate / n;
        summary.detection_relevant_disturbance += a.detection_relevant_disturbance / n;
        summary.eve_guess_success_rate = summary.eve_guess_success_rate.map(|e| e + a.eve_guess_success_rate / n);
    }
    Ok(summary)
}

/// Runs the sessions (and the exact analysis when noise is off) described by `config`.
///
/// Trial `t` runs a key session seeded with `derive_seed(config.seed, t)` and then a
/// parity check of its two keys, so identical configurations give identical reports
/// apart from `wall_time_seconds`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let started = Instant::now();
    let family = family_by_name(&config.family)?;
    let eve = eve_strategy(config, &family)?;
    let noise = if config.noise_p > 0.0 { Some(NoiseModel::new(config.noise_p)?) } else { None };
    if config.mode == Mode::Exact && (noise.is_some() || config.trials != 1) {
        return Err(threestage::Error::Config("exact mode needs noise 0 and a single trial".into()).into());
    }

    let exact = if noise.is_none() { Some(exact_summary(&family, eve.as_ref())?) } else { None };

    let mut trials = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        let seed = derive_seed(config.seed, t as u64);
        let session = run_key_session(&SessionConfig {
            family_name: config.family.clone(),
            blocks: config.blocks,
            eve_strategy: eve.clone(),
            noise,
            seed,
        })?;
        let mut parity_rng = stream_rng(seed, PARITY_STREAM);
        let sift = parity_check(&session.alice_bits, &session.bob_bits, config.parity_rounds, &mut parity_rng)?;
        trials.push(TrialRecord {
            trial: t,
            seed,
            bit_error_rate: session.bit_error_rate,
            eve_guess_success_rate: session.eve_guess_success_rate,
            parity_detected: sift.detected,
            parity_disclosed_bits: sift.disclosed_indices.len(),
            key_length: session.alice_bits.len(),
        });
    }

    let rates: Vec<f64> = trials.iter().map(|t| t.bit_error_rate).collect();
    let (mean_bit_error_rate, std_err_bit_error_rate) = if rates.len() > 1 {
        let (m, se) = mean_and_std_err(&rates);
        // Sample (n - 1) rather than population variance across trials.
        let n = rates.len() as f64;
        (m, se * (n / (n - 1.0)).sqrt())
    } else {
        (rates[0], 0.0)
    };
    let empirical_eve = if eve.is_some() {
        let values: Vec<f64> = trials.iter().filter_map(|t| t.eve_guess_success_rate).collect();
        Some(values.iter().sum::<f64>() / values.len() as f64)
    } else {
        None
    };
    let eve_guess_success_rate = match (config.mode, &exact) {
        (Mode::Exact, Some(e)) => e.eve_guess_success_rate,
        _ => empirical_eve,
    };
    let exact_vs_empirical_deltas = exact.as_ref().map(|e| Deltas {
        bit_error_rate: mean_bit_error_rate - e.bit_error_rate,
        eve_guess_success_rate: empirical_eve.zip(e.eve_guess_success_rate).map(|(m, x)| m - x),
    });

    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        trials,
        mean_bit_error_rate,
        std_err_bit_error_rate,
        eve_guess_success_rate,
        exact,
        exact_vs_empirical_deltas,
        wall_time_seconds: Some(started.elapsed().as_secs_f64()),
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    schema_version: u32,
    family: &'a str,
    mode: Mode,
    seed: u64,
    blocks: usize,
    eve_stages: String,
    noise_p: f64,
    trial: usize,
    trial_seed: u64,
    bit_error_rate: f64,
    eve_guess_success_rate: Option<f64>,
    parity_detected: bool,
    parity_disclosed_bits: usize,
    key_length: usize,
    mean_bit_error_rate: f64,
    std_err_bit_error_rate: f64,
    exact_bit_error_rate: Option<f64>,
    exact_eve_guess_success_rate: Option<f64>,
    wall_time_seconds: Option<f64>,
}

impl ExperimentReport {
    /// The report with the wall-time field cleared, for reproducibility checks.
    pub fn without_wall_time(&self) -> Self {
        Self { wall_time_seconds: None, ..self.clone() }
    }

    pub fn to_json(&self) -> Result<String, RunError> {
        serde_json::to_string_pretty(self).map_err(|e| RunError::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Serialize(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String, RunError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let stages: Vec<String> = self.config.eve_stages.iter().map(u8::to_string).collect();
        for t in &self.trials {
            writer
                .serialize(CsvRow {
                    schema_version: self.schema_version,
                    family: &self.config.family,
                    mode: self.config.mode,
                    seed: self.config.seed,
                    blocks: self.config.blocks,
                    eve_stages: stages.join(" "),
                    noise_p: self.config.noise_p,
                    trial: t.trial,
                    trial_seed: t.seed,
                    bit_error_rate: t.bit_error_rate,
                    eve_guess_success_rate: t.eve_guess_success_rate,
                    parity_detected: t.parity_detected,
                    parity_disclosed_bits: t.parity_disclosed_bits,
                    key_length: t.key_length,
                    mean_bit_error_rate: self.mean_bit_error_rate,
                    std_err_bit_error_rate: self.std_err_bit_error_rate,
                    exact_bit_error_rate: self.exact.as_ref().map(|e| e.bit_error_rate),
                    exact_eve_guess_success_rate: self.exact.as_ref().and_then(|e| e.eve_guess_success_rate),
                    wall_time_seconds: self.wall_time_seconds,
                })
                .map_err(|e| RunError::Serialize(e.to_string()))?;
        }
        let bytes = writer.into_inner().map_err(|e| RunError::Serialize(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| RunError::Serialize(e.to_string()))
    }

    pub fn render(&self) -> Result<String, RunError> {
        match self.config.output_format {
            OutputFormat::Json => self.to_json().map(|s| s + "\n"),
            OutputFormat::Csv => self.to_csv(),
        }
    }
}

/// One line per catalog family: name, dimension and member labels.
pub fn list_families() -> String {
    catalog()
        .iter()
        .map(|f| format!("{}\t{}\t{}\n", f.name(), f.dim(), f.labels().join(",")))
        .collect()
}

/// Commutation and closure reports for every catalog family, and whether all passed.
pub fn verify_families() -> (String, bool) {
    let mut text = String::new();
    let mut all_passed = true;
    for name in CATALOG {
        let report = verify_family(&family_by_name(name).expect("catalog name"), DERIVED_TOL);
        all_passed &= report.passed;
        text.push_str(&report.to_string());
    }
    (text, all_passed)
}
