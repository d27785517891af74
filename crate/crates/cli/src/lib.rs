//! The `npiv` command-line tool.
//!
//! Every subcommand is a plain function over parsed arguments so the binary
//! stays a thin shell around [`run`].

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use npiv_core::config::Config;
use npiv_core::estimator::{derivative_coeffs, empirical_operator_matrix};
use npiv_core::selection::lower_dimension_scan;
use npiv_core::study::{ReplicationRecord, DEFAULT_ORACLE_K_MAX};
use npiv_core::{
    diagonal_estimate, dimension_bound_known, galerkin_estimate, generate_sample, known_sequences, oracle_kstar,
    penalized_select, risk_weighted, run_rate_study, CoefficientVector, EstimatorMode, RateStudyReport, Sample,
    StudyPlan, WeightSequence, DEFAULT_PENALTY_CONST,
};

pub const DEFAULT_N_GRID: [usize; 6] = [500, 1000, 2000, 4000, 8000, 16000];
pub const DEFAULT_REPLICATIONS: usize = 50;

#[derive(Debug, Parser)]
#[command(
    name = "npiv",
    version,
    about = "Nonparametric instrumental regression: estimation, adaptive selection and rate studies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a sample from a configured model and write it as `y,z,w` CSV.
    Simulate(SimulateArgs),
    /// Fit the estimator at a fixed dimension.
    Estimate(EstimateArgs),
    /// Choose the dimension by penalized contrast and print the full trace.
    Select(SelectArgs),
    /// Tabulate k*, R*, N_n, N_n^l and δ_{k*} over a grid of sample sizes.
    Oracle(OracleArgs),
    /// Monte Carlo study of the adaptive risk across sample sizes.
    RateStudy(RateStudyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON model configuration.
    pub config: PathBuf,
    /// Output CSV path.
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    General,
    Diagonal,
}

impl From<ModeArg> for EstimatorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::General => EstimatorMode::General,
            ModeArg::Diagonal => EstimatorMode::Diagonal,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Sample CSV with header `y,z,w`.
    pub sample: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::General)]
    pub mode: ModeArg,
    /// Report the coefficients of the s-th derivative.
    #[arg(long, default_value_t = 0)]
    pub s: u32,
    /// Weights of the risk, e.g. `constant`, `derivative:1`, `sobolev:2`.
    #[arg(long, default_value = "constant")]
    pub omega: WeightSequence,
    /// Model configuration whose structural function is the truth for the risk.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    pub sample: PathBuf,
    #[arg(long, default_value = "constant")]
    pub omega: WeightSequence,
    #[arg(long, default_value_t = DEFAULT_PENALTY_CONST)]
    pub penalty_const: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value = "constant")]
    pub omega: WeightSequence,
    #[arg(long)]
    pub gamma: WeightSequence,
    #[arg(long)]
    pub lambda: WeightSequence,
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_grid: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_ORACLE_K_MAX as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub k_max: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RateStudyArgs {
    pub config: PathBuf,
    /// Comma-separated sample sizes; defaults to the config, then 500,1000,…,16000.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    pub n_grid: Option<Vec<u64>>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path. The per-replication CSV goes next to it with a `.csv` extension.
    /// Without it the report is printed to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "NPIV_JOBS")]
    pub jobs: Option<usize>,
    /// Also write a gnuplot script next to the report, with a `.gp` extension.
    #[arg(long, requires = "out")]
    pub emit_gnuplot: bool,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration: exit code 2.
    User(String),
    /// Reading or writing files: exit code 3.
    Io(String),
    /// A result violated an invariant it is supposed to satisfy: exit code 4.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 2,
            CliError::Io(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<npiv_core::Error> for CliError {
    fn from(e: npiv_core::Error) -> Self {
        match e {
            npiv_core::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Estimate(a) => cmd_estimate(&a, &mut out),
        Command::Select(a) => cmd_select(&a, &mut out),
        Command::Oracle(a) => cmd_oracle(&a, &mut out),
        Command::RateStudy(a) => cmd_rate_study(&a, &mut out),
    }
}

fn load_config(path: &Path) -> CliResult<Config> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Config::from_json(&text).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

fn load_sample(path: &Path) -> CliResult<Sample> {
    let file = File::open(path).map_err(io_err(path))?;
    Sample::read_csv(file).map_err(|e| match e {
        npiv_core::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::User(format!("{}: {other}", path.display())),
    })
}

fn write_json<T: Serialize>(value: &T, out: &mut impl Write) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out).map_err(|e| CliError::Io(e.to_string()))
}

fn echo_config(cfg: &Config) -> CliResult<npiv_core::config::Model> {
    let model = cfg.build()?;
    let echo = serde_json::to_string(cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    eprintln!("config: {echo}");
    eprintln!(
        "operator: J = {}, c = {}, density_floor = {}, d = {}, sigma = {}",
        model.operator.truncation, model.operator.c, model.operator.density_floor, model.operator.d, model.sigma
    );
    Ok(model)
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let model = echo_config(&cfg)?;
    let sample = generate_sample(&model.structural, &model.operator, model.sigma, a.n as usize, a.seed)?;
    let file = File::create(&a.out).map_err(io_err(&a.out))?;
    let mut w = BufWriter::new(file);
    sample.write_csv(&mut w)?;
    w.flush().map_err(io_err(&a.out))
}

/// Largest off-diagonal entry of `T̂` over the leading `k × k` block.
fn off_diagonal_mass(sample: &Sample, k: usize) -> CliResult<f64> {
    let m = empirical_operator_matrix(sample, k)?;
    let mut worst = 0.0f64;
    for l in 0..k {
        for j in 0..k {
            if l != j {
                worst = worst.max(m[(l, j)].abs());
            }
        }
    }
    Ok(worst)
}

fn warn_if_not_diagonal(sample: &Sample, k: usize) -> CliResult<()> {
    let k = k.clamp(1, 10);
    let tol = 4.0 / (sample.len() as f64).sqrt();
    let mass = off_diagonal_mass(sample, k)?;
    if mass > tol {
        eprintln!(
            "warning: off-diagonal entries of the empirical operator reach {mass:.4} (> 4/sqrt(n) = {tol:.4}); \
             the diagonal estimator assumes a diagonal operator"
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub n: usize,
    pub k: usize,
    pub mode: EstimatorMode,
    pub thresholded: bool,
    pub coefficients: CoefficientVector,
    pub s: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivative_coefficients: Option<CoefficientVector>,
    pub omega: WeightSequence,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub risk: Option<f64>,
}

pub fn cmd_estimate(a: &EstimateArgs, out: &mut impl Write) -> CliResult<()> {
    let sample = load_sample(&a.sample)?;
    let k = a.k as usize;
    let mode = EstimatorMode::from(a.mode);
    let est = match mode {
        EstimatorMode::General => galerkin_estimate(&sample, k)?,
        EstimatorMode::Diagonal => {
            warn_if_not_diagonal(&sample, k)?;
            diagonal_estimate(&sample, k)?
        }
    };
    let risk = match &a.truth {
        Some(path) => {
            let truth = load_config(path)?.structural.build()?;
            Some(risk_weighted(&est, &truth, &a.omega, truth.truncation.max(k))?)
        }
        None => None,
    };
    let report = EstimateReport {
        n: sample.len(),
        k,
        mode,
        thresholded: est.thresholded,
        derivative_coefficients: (a.s > 0).then(|| derivative_coeffs(&est, a.s)),
        coefficients: est.coeffs,
        s: a.s,
        omega: a.omega.clone(),
        risk,
    };
    write_json(&report, out)
}

pub fn cmd_select(a: &SelectArgs, out: &mut impl Write) -> CliResult<()> {
    let sample = load_sample(&a.sample)?;
    let trace = penalized_select(&sample, &a.omega, a.penalty_const)?;
    if trace.k_hat < 1 || trace.k_hat > trace.n_hat {
        return Err(CliError::Internal(format!("k̂ = {} outside 1..={}", trace.k_hat, trace.n_hat)));
    }
    warn_if_not_diagonal(&sample, trace.n_hat)?;
    write_json(&trace, out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub n: usize,
    pub k_star: usize,
    #[serde(rename = "R_star")]
    pub r_star: f64,
    #[serde(rename = "N_n")]
    pub n_n: usize,
    #[serde(rename = "N_l")]
    pub n_l: usize,
    pub delta_k_star: f64,
}

pub fn oracle_table(a: &OracleArgs) -> CliResult<Vec<OracleRow>> {
    let k_max = a.k_max as usize;
    a.n_grid
        .iter()
        .map(|&n| {
            let n = n as usize;
            let oracle = oracle_kstar(&a.omega, &a.gamma, &a.lambda, n, k_max)?;
            let n_n = dimension_bound_known(&a.omega, &a.lambda, a.d, n)?;
            let n_l = lower_dimension_scan(&a.omega, &a.lambda, a.d, n, n_n)?;
            let seqs = known_sequences(&a.omega, &a.lambda, oracle.k_star)?;
            Ok(OracleRow {
                n,
                k_star: oracle.k_star,
                r_star: oracle.r_star,
                n_n,
                n_l,
                delta_k_star: seqs.delta_at(oracle.k_star),
            })
        })
        .collect()
}

pub fn cmd_oracle(a: &OracleArgs, out: &mut impl Write) -> CliResult<()> {
    let rows = oracle_table(a)?;
    match a.format {
        Format::Json => write_json(&rows, out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in &rows {
                w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Resolves grid, replications and seed from the flags, then the config, then defaults.
pub fn study_plan(a: &RateStudyArgs, cfg: &Config) -> CliResult<StudyPlan> {
    let grid = match (&a.n_grid, &cfg.study.n_grid) {
        (Some(g), _) => g.iter().map(|&n| n as usize).collect(),
        (None, Some(g)) => g.clone(),
        (None, None) => DEFAULT_N_GRID.to_vec(),
    };
    let plan = StudyPlan {
        grid,
        replications: a.replications.or(cfg.study.replications).unwrap_or(DEFAULT_REPLICATIONS),
        seed: a.seed.or(cfg.study.seed).unwrap_or(0),
        jobs: a.jobs.unwrap_or_else(default_jobs),
    };
    plan.validate()?;
    Ok(plan)
}

pub fn write_records_csv(records: &[ReplicationRecord], out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn gnuplot_script(report: &RateStudyReport, records_csv: &str) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale xy\n");
    s.push_str("set xlabel 'n'\nset ylabel 'risk'\n");
    s.push_str(&format!("set title 'fitted slope {:.3}'\n", report.fitted_slope));
    s.push_str("$median << EOD\n");
    for g in &report.per_n {
        s.push_str(&format!("{},{},{}\n", g.n, g.median_risk, g.median_oracle_risk));
    }
    s.push_str("EOD\n");
    s.push_str(&format!(
        "plot '{records_csv}' using 1:6 every ::1 with points pt 7 ps 0.3 lc rgb '#bbbbbb' title 'replications', \\\n"
    ));
    s.push_str("     $median using 1:2 with linespoints lw 2 title 'median adaptive', \\\n");
    s.push_str("     $median using 1:3 with linespoints dt 2 title 'median at k*'\n");
    s
}

pub fn cmd_rate_study(a: &RateStudyArgs, out: &mut impl Write) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    echo_config(&cfg)?;
    let plan = study_plan(a, &cfg)?;
    let (report, records) = run_rate_study(&cfg, &plan)?;
    if let Some(bad) = report.per_n.iter().find(|g| g.median_risk.is_nan() || g.median_risk < 0.0) {
        return Err(CliError::Internal(format!("median risk {} at n = {}", bad.median_risk, bad.n)));
    }
    match &a.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
            write_json(&report, &mut w)?;
            w.flush().map_err(io_err(path))?;
            let csv_path = path.with_extension("csv");
            write_records_csv(&records, BufWriter::new(File::create(&csv_path).map_err(io_err(&csv_path))?))?;
            if a.emit_gnuplot {
                let gp_path = path.with_extension("gp");
                let name = csv_path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
                std::fs::write(&gp_path, gnuplot_script(&report, &name)).map_err(io_err(&gp_path))?;
            }
        }
        None => write_json(&report, out)?,
    }
    for g in &report.per_n {
        eprintln!(
            "n = {:>6}  median risk = {:.4e}  median k̂ = {}  k* = {}",
            g.n, g.median_risk, g.median_k_hat, g.oracle_kstar
        );
    }
    eprintln!("fitted slope = {:.4}", report.fitted_slope);
    Ok(())
}
