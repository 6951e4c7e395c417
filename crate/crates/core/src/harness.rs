//! Experiment configuration, suites, persistence and the command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    build_ansatz, build_controlled_ansatz, build_label_test, build_oracle_with, build_overlap_test, build_search_circuit,
    formula_depth, AnsatzFamily, AnsatzSpec, Circuit, CircuitOptions, DepthKind, OracleRealization, OracleSpec,
};
use crate::grover::{depth_table, grover_iteration_circuit, table_csv, Arithmetic};
use crate::statevec::{StateVector, MAX_QUBITS};
use crate::verify;
use crate::vqs::{
    analytic_minimum, run_vqs_with, AdamConfig, ExpectationMethod, TerminationConfig, TerminationReason, VqsError, VqsProblem,
    VqsRun,
};

/// Largest `n` accepted for suites without `--allow-large`.
pub const SUITE_MAX_N: usize = 14;
/// Largest `n` accepted for single runs without `--allow-large`.
pub const RUN_MAX_N: usize = 20;
/// Tolerance on the ratio sum.
pub const RATIO_SUM_TOLERANCE: f64 = 1e-9;
/// Environment variable capping the suite worker count.
pub const THREADS_ENV: &str = "VQS_THREADS";

pub const SUMMARY_HEADER: &str = "metric,p0,p25,p50,p75,p100,n_outliers";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("n = {0} is out of range (need 2 <= n <= {max})", max = MAX_QUBITS - 2)]
    InputSize(usize),
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("layers must be at least 1")]
    NoLayers,
    #[error("good element count must be at least 1")]
    NoGoods,
    #[error("ratio has {ratio} entries for {goods} good elements")]
    RatioLength { ratio: usize, goods: usize },
    #[error("ratio entries must be positive and finite")]
    RatioSign,
    #[error("ratio sums to {0}, expected 1")]
    RatioSum(f64),
    #[error("specify either explicit good indices or a good count, not both")]
    GoodConflict,
    #[error("n = {n} exceeds the default ceiling of {max} for this command; pass --allow-large")]
    TooLarge { n: usize, max: usize },
    #[error(transparent)]
    Vqs(#[from] VqsError),
    #[error("{0}")]
    Invalid(String),
}

/// Which elements are good.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodSpec {
    Indices(Vec<usize>),
    LastK(usize),
}

impl Default for GoodSpec {
    fn default() -> Self {
        GoodSpec::LastK(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub family: AnsatzFamily,
    pub layers: usize,
    pub good: GoodSpec,
    /// Relative probabilities of the good elements, in ascending index order.
    pub ratio: Option<Vec<f64>>,
    pub runs: usize,
    pub seed_base: u64,
    pub adam: AdamConfig,
    pub termination: TerminationConfig,
    pub method: ExpectationMethod,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 2,
            family: AnsatzFamily::TypeI,
            layers: 3,
            good: GoodSpec::default(),
            ratio: None,
            runs: 100,
            seed_base: 0,
            adam: AdamConfig::default(),
            termination: TerminationConfig::default(),
            method: ExpectationMethod::Direct,
        }
    }
}

impl ExperimentConfig {
    pub fn oracle(&self) -> Result<OracleSpec, ConfigError> {
        let spec = match &self.good {
            GoodSpec::Indices(idx) => OracleSpec::new(self.n, idx.iter().copied()),
            GoodSpec::LastK(k) => OracleSpec::last_k(self.n, *k),
        };
        spec.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn ansatz(&self) -> Result<AnsatzSpec, ConfigError> {
        AnsatzSpec::new(self.family, self.layers, self.n + 1).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 || self.n > MAX_QUBITS - 2 {
            return Err(ConfigError::InputSize(self.n));
        }
        if self.runs == 0 {
            return Err(ConfigError::NoRuns);
        }
        if self.layers == 0 {
            return Err(ConfigError::NoLayers);
        }
        if matches!(self.good, GoodSpec::LastK(0)) || matches!(&self.good, GoodSpec::Indices(v) if v.is_empty()) {
            return Err(ConfigError::NoGoods);
        }
        let oracle = self.oracle()?;
        if let Some(ratio) = &self.ratio {
            if ratio.len() != oracle.good().len() {
                return Err(ConfigError::RatioLength { ratio: ratio.len(), goods: oracle.good().len() });
            }
            if ratio.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return Err(ConfigError::RatioSign);
            }
            let sum: f64 = ratio.iter().sum();
            if (sum - 1.0).abs() > RATIO_SUM_TOLERANCE {
                return Err(ConfigError::RatioSum(sum));
            }
        }
        self.adam.validate()?;
        self.termination.validate()?;
        Ok(())
    }
}

/// Config file layout: flat keys, all optional.
///
/// ```toml
/// n = 8
/// ansatz = "type1"      # or "type2"
/// layers = 3
/// good = [253, 254]     # explicit indices, or
/// good_count = 3        # the last k indices
/// ratio = [0.1, 0.3, 0.6]
/// runs = 100
/// seed = 0
/// lr = 0.1
/// beta1 = 0.9
/// beta2 = 0.999
/// epsilon = 1e-8
/// max_iterations = 300
/// small_change_threshold = 1e-4
/// patience = 5
/// method = "direct"     # or "hadamard"
/// out = "results"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<usize>,
    pub ansatz: Option<String>,
    pub layers: Option<usize>,
    pub good: Option<Vec<usize>>,
    pub good_count: Option<usize>,
    pub ratio: Option<Vec<f64>>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iterations: Option<usize>,
    pub small_change_threshold: Option<f64>,
    pub patience: Option<usize>,
    pub method: Option<String>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Layers `other` on top of `self`; set fields of `other` win.
    fn overlay(self, other: ConfigFile) -> ConfigFile {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigFile { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            n, ansatz, layers, good, good_count, ratio, runs, seed, lr, beta1, beta2, epsilon, max_iterations,
            small_change_threshold, patience, method, out
        )
    }

    pub fn into_config(self) -> Result<ExperimentConfig, ConfigError> {
        let mut c = ExperimentConfig::default();
        let d = self;
        if let Some(n) = d.n {
            c.n = n;
        }
        if let Some(a) = d.ansatz {
            c.family = AnsatzFamily::from_str(&a).map_err(ConfigError::Invalid)?;
        }
        if let Some(l) = d.layers {
            c.layers = l;
        }
        c.good = match (d.good, d.good_count) {
            (Some(_), Some(_)) => return Err(ConfigError::GoodConflict),
            (Some(idx), None) => GoodSpec::Indices(idx),
            (None, Some(k)) => GoodSpec::LastK(k),
            (None, None) => GoodSpec::default(),
        };
        c.ratio = d.ratio;
        if let Some(r) = d.runs {
            c.runs = r;
        }
        if let Some(s) = d.seed {
            c.seed_base = s;
        }
        let a = &mut c.adam;
        a.learning_rate = d.lr.unwrap_or(a.learning_rate);
        a.beta1 = d.beta1.unwrap_or(a.beta1);
        a.beta2 = d.beta2.unwrap_or(a.beta2);
        a.epsilon = d.epsilon.unwrap_or(a.epsilon);
        let t = &mut c.termination;
        t.max_iterations = d.max_iterations.unwrap_or(t.max_iterations);
        t.small_change_threshold = d.small_change_threshold.unwrap_or(t.small_change_threshold);
        t.patience = d.patience.unwrap_or(t.patience);
        if let Some(m) = d.method {
            c.method = ExpectationMethod::from_str(&m)?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// `ψ0` over `n` qubits. Without a ratio this is the uniform state. With one,
/// bad elements keep `1/√N` and good element `i` gets `√(r_i·k/N)`, so the
/// total good probability stays `k/N`.
pub fn build_initial_state(config: &ExperimentConfig) -> Result<StateVector, ConfigError> {
    config.validate()?;
    let uniform = StateVector::uniform(config.n).map_err(VqsError::from)?;
    let Some(ratio) = &config.ratio else {
        return Ok(uniform);
    };
    let oracle = config.oracle()?;
    let size = uniform.dim() as f64;
    let k = oracle.good().len() as f64;
    let mut amps = uniform.into_amplitudes();
    for (&g, r) in oracle.good().iter().zip(ratio) {
        amps[g] = (r * k / size).sqrt();
    }
    Ok(StateVector::from_amplitudes(amps).map_err(VqsError::from)?)
}

/// Box-plot summary of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub p0: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p100: f64,
    /// Values outside `[p25 − 1.5·IQR, p75 + 1.5·IQR]`, in input order.
    pub outliers: Vec<f64>,
}

/// Linear-interpolation percentile on sorted data, inclusive endpoints.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn percentiles(values: &[f64]) -> Result<SummaryStats, ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::Invalid("percentiles of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let [p0, p25, p50, p75, p100] = [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| percentile_sorted(&sorted, q));
    let iqr = p75 - p25;
    let (lo, hi) = (p25 - 1.5 * iqr, p75 + 1.5 * iqr);
    let outliers = values.iter().copied().filter(|v| *v < lo || *v > hi).collect();
    Ok(SummaryStats { p0, p25, p50, p75, p100, outliers })
}

/// One line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub iterations: usize,
    pub termination_reason: TerminationReason,
    pub objective_trace: Vec<f64>,
    pub final_good_probability: f64,
    pub per_good_probabilities: Vec<f64>,
    pub final_theta: Vec<f64>,
}

impl From<&VqsRun> for RunRecord {
    fn from(r: &VqsRun) -> Self {
        Self {
            seed: r.seed,
            iterations: r.iterations_used,
            termination_reason: r.termination_reason,
            objective_trace: r.objective_trace.clone(),
            final_good_probability: r.final_good_probability,
            per_good_probabilities: r.good_probabilities.clone(),
            final_theta: r.final_theta.values().to_vec(),
        }
    }
}

impl RunRecord {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub records: Vec<RunRecord>,
    pub summary: Vec<(String, SummaryStats)>,
    pub analytic_minimum: f64,
}

/// Summary rows computed from persisted records. Per-good rows appear when
/// more than one element is good.
pub fn summarize(records: &[RunRecord], good: &[usize], f_min: f64) -> Result<Vec<(String, SummaryStats)>, ConfigError> {
    let mut rows = Vec::new();
    let column = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    rows.push(("final_good_probability".to_string(), percentiles(&column(&|r| r.final_good_probability))?));
    if good.len() > 1 {
        for (i, g) in good.iter().enumerate() {
            let values = column(&|r| r.per_good_probabilities.get(i).copied().unwrap_or(f64::NAN));
            rows.push((format!("good_probability_{g}"), percentiles(&values)?));
        }
    }
    rows.push(("iterations_used".to_string(), percentiles(&column(&|r| r.iterations as f64))?));
    rows.push(("objective_gap".to_string(), percentiles(&column(&|r| r.final_objective() - f_min))?));
    Ok(rows)
}

fn worker_count() -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .map_or(available, |t| t.min(available))
}

/// Runs `config.runs` independent trainings with seeds
/// `seed_base..seed_base + runs` and summarises them.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteResult, ConfigError> {
    let psi0 = build_initial_state(config)?;
    let oracle = config.oracle()?;
    let (f_min, _) = analytic_minimum(&psi0, &oracle)?;
    let problem = VqsProblem::new(psi0, oracle.clone(), config.ansatz()?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let seeds: Vec<u64> = (0..config.runs as u64).map(|i| config.seed_base.wrapping_add(i)).collect();
    let runs: Vec<VqsRun> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_vqs_with(&problem, &config.adam, &config.termination, seed, config.method))
            .collect::<Result<_, _>>()
    })?;
    let mut records: Vec<RunRecord> = runs.iter().map(RunRecord::from).collect();
    records.sort_by_key(|r| r.seed);
    let summary = summarize(&records, oracle.good(), f_min)?;
    Ok(SuiteResult { records, summary, analytic_minimum: f_min })
}

pub fn records_jsonl(records: &[RunRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_records(text: &str) -> Result<Vec<RunRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

pub fn summary_csv(rows: &[(String, SummaryStats)]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (name, s) in rows {
        let _ = writeln!(out, "{name},{},{},{},{},{},{}", s.p0, s.p25, s.p50, s.p75, s.p100, s.outliers.len());
    }
    out
}

/// Rough peak memory of one training run at `n` input qubits, in bytes: a
/// handful of `2^(n+1)` amplitude buffers plus the `2^(n+2)` Hadamard test.
pub fn memory_estimate(n: usize) -> u64 {
    8 * ((4u64 << (n + 1)) + (1u64 << (n + 2)))
}

#[derive(Debug, Parser)]
#[command(name = "vqs", version, about = "Variational quantum search simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train once and print the objective trace.
    Run(ExperimentArgs),
    /// Run a seeded batch and write records.jsonl and summary.csv.
    Suite(ExperimentArgs),
    /// Print the Grover depth comparison table as CSV.
    GroverTable {
        /// Arithmetic of the iteration-counting loop.
        #[arg(long, default_value = "double")]
        arithmetic: Arithmetic,
        /// Also write grover_table.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report structural and closed-form depth of a named circuit.
    Depth {
        /// ansatz, controlled-ansatz, oracle, overlap-test, label-test, search or grover-iteration.
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "type1")]
        ansatz: AnsatzFamily,
        #[arg(long, default_value_t = 3)]
        layers: usize,
        /// Oracle realization: mcx or decomposed.
        #[arg(long, default_value = "decomposed")]
        oracle: OracleRealization,
        /// Print the gate list as well.
        #[arg(long)]
        dump: bool,
    },
    /// Run the built-in cross-checks.
    Verify,
}

#[derive(Debug, Clone, Args)]
struct ExperimentArgs {
    /// Flat key/value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// type1 or type2.
    #[arg(long)]
    ansatz: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated good indices.
    #[arg(long, value_delimiter = ',')]
    good: Option<Vec<usize>>,
    /// Use the last K elements as the good ones.
    #[arg(long)]
    good_count: Option<usize>,
    /// Comma-separated probability ratio over the good elements.
    #[arg(long, value_delimiter = ',')]
    ratio: Option<Vec<f64>>,
    #[arg(long)]
    lr: Option<f64>,
    /// direct or hadamard.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lift the default ceiling on n.
    #[arg(long)]
    allow_large: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<(ExperimentConfig, Option<PathBuf>), ConfigError> {
        let base = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let mut flags = ConfigFile {
            n: self.n,
            layers: self.layers,
            ansatz: self.ansatz.clone(),
            runs: self.runs,
            seed: self.seed,
            good: self.good.clone(),
            good_count: self.good_count,
            ratio: self.ratio.clone(),
            lr: self.lr,
            method: self.method.clone(),
            out: self.out.clone(),
            ..ConfigFile::default()
        };
        let mut base = base;
        // A good set given on the command line replaces the file's.
        if flags.good.is_some() || flags.good_count.is_some() {
            base.good = None;
            base.good_count = None;
        }
        if flags.good.is_some() && flags.good_count.is_some() {
            return Err(ConfigError::GoodConflict);
        }
        let merged = base.overlay(std::mem::take(&mut flags));
        let out = merged.out.clone();
        Ok((merged.into_config()?, out))
    }
}

fn check_ceiling(n: usize, max: usize, allow_large: bool) -> Result<(), ConfigError> {
    if n > max {
        if !allow_large {
            return Err(ConfigError::TooLarge { n, max });
        }
        eprintln!("warning: n = {n} needs roughly {:.1} GiB per run", memory_estimate(n) as f64 / (1u64 << 30) as f64);
    }
    Ok(())
}

enum Failure {
    Config(anyhow::Error),
    Verify,
    Io(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.into())
    }
}

/// Entry point of the `vqs` binary. Returns the process exit code: 0 on
/// success, 1 for invalid configuration or usage, 2 when `verify` finds a
/// failing check.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            1
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            1
        }
        Err(Failure::Verify) => 2,
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => cmd_run(&args),
        Command::Suite(args) => cmd_suite(&args),
        Command::GroverTable { arithmetic, out } => {
            let rows = depth_table(arithmetic).map_err(|e| Failure::Config(e.into()))?;
            let csv = table_csv(&rows);
            print!("{csv}");
            if let Some(dir) = out {
                write_file(&dir, "grover_table.csv", &csv).map_err(Failure::Io)?;
            }
            Ok(())
        }
        Command::Depth { kind, n, ansatz, layers, oracle, dump } => {
            let report = depth_report(&kind, n, ansatz, layers, oracle, dump).map_err(Failure::Config)?;
            print!("{report}");
            Ok(())
        }
        Command::Verify => {
            let checks = verify::run_all();
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            println!("{} checks, {failed} failed", checks.len());
            if failed > 0 {
                Err(Failure::Verify)
            } else {
                Ok(())
            }
        }
    }
}

fn cmd_run(args: &ExperimentArgs) -> Result<(), Failure> {
    let (config, out) = args.resolve()?;
    check_ceiling(config.n, RUN_MAX_N, args.allow_large)?;
    let psi0 = build_initial_state(&config)?;
    let oracle = config.oracle()?;
    let (f_min, _) = analytic_minimum(&psi0, &oracle).map_err(ConfigError::from)?;
    let problem = VqsProblem::new(psi0, oracle, config.ansatz()?).map_err(ConfigError::from)?;
    let run = run_vqs_with(&problem, &config.adam, &config.termination, config.seed_base, config.method)
        .map_err(ConfigError::from)?;
    for (i, f) in run.objective_trace.iter().enumerate() {
        println!("{:>4} {f:.12}", i + 1);
    }
    println!(
        "seed={} iterations={} reason={} objective={:.12} minimum={:.12} good_probability={:.12}",
        run.seed,
        run.iterations_used,
        run.termination_reason,
        run.final_objective(),
        f_min,
        run.final_good_probability
    );
    if let Some(dir) = out {
        write_file(&dir, "records.jsonl", &records_jsonl(&[RunRecord::from(&run)])).map_err(Failure::Io)?;
    }
    Ok(())
}

fn cmd_suite(args: &ExperimentArgs) -> Result<(), Failure> {
    let (config, out) = args.resolve()?;
    check_ceiling(config.n, SUITE_MAX_N, args.allow_large)?;
    let result = run_suite(&config)?;
    let summary = summary_csv(&result.summary);
    print!("{summary}");
    let dir = out.unwrap_or_else(|| PathBuf::from("out"));
    write_file(&dir, "records.jsonl", &records_jsonl(&result.records)).map_err(Failure::Io)?;
    write_file(&dir, "summary.csv", &summary).map_err(Failure::Io)?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Text report for the `depth` subcommand.
pub fn depth_report(
    kind: &str,
    n: usize,
    family: AnsatzFamily,
    layers: usize,
    realization: OracleRealization,
    dump: bool,
) -> anyhow::Result<String> {
    let kind = DepthKind::from_str(kind)?;
    if !(2..=MAX_QUBITS - 2).contains(&n) {
        bail!("n = {n} is out of range");
    }
    let oracle = OracleSpec::last_k(n, 1)?;
    let spec = AnsatzSpec::new(family, layers, n + 1)?;
    let opts = CircuitOptions { oracle: realization, uniform_prep: false };
    let circuit: Circuit = match kind {
        DepthKind::Ansatz => build_ansatz(&spec)?,
        DepthKind::ControlledAnsatz => build_controlled_ansatz(&spec)?,
        DepthKind::Oracle => build_oracle_with(&oracle, realization)?,
        DepthKind::OverlapTest => build_overlap_test(&oracle, &spec, opts)?,
        DepthKind::LabelTest => build_label_test(&oracle, &spec, opts)?,
        DepthKind::Search => build_search_circuit(&oracle, &spec, opts)?,
        DepthKind::GroverIteration => grover_iteration_circuit(&OracleSpec::last_k(n, 1)?)?,
    };
    let formula = formula_depth(kind, n, family, layers).ok();
    if dump {
        return Ok(circuit.dump(formula));
    }
    Ok(format!(
        "structural={} formula={}\n",
        circuit.structural_depth(),
        formula.map_or_else(|| "n/a".to_string(), |d| d.to_string())
    ))
}
