//! Monte Carlo rate study.
//!
//! For every `(n, replication)` pair a sample is simulated, the dimension is
//! chosen by [`penalized_select`], and the weighted risk against the truth is
//! recorded together with the risk of the diagonal estimator at the fixed
//! oracle dimension `k*`. Replications are keyed by `(grid index, replication)`
//! and run on a dedicated thread pool; the output does not depend on the
//! number of threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::WeightSequence;
use crate::config::{Config, Model};
use crate::error::{Error, Result};
use crate::estimator::{diagonal_estimate, risk_weighted};
use crate::selection::{oracle_kstar, penalized_select, OracleDimension};
use crate::simulate::generate_sample_replication;

pub const REPORT_SCHEMA: u32 = 1;

/// Search range used for the oracle dimension.
pub const DEFAULT_ORACLE_K_MAX: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyPlan {
    pub grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub jobs: usize,
}

impl StudyPlan {
    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 {
            return Err(Error::Config("rate study needs at least two sample sizes".into()));
        }
        if self.grid.contains(&0) {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if self.replications < 10 {
            return Err(Error::Config(format!("rate study needs at least 10 replications, got {}", self.replications)));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One simulated replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub replication: usize,
    pub k_hat: usize,
    pub n_hat: usize,
    pub thresholded: bool,
    pub risk: f64,
    pub oracle_k: usize,
    pub oracle_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub n: usize,
    pub median_risk: f64,
    pub mean_risk: f64,
    pub iqr: f64,
    pub median_k_hat: f64,
    pub mean_n_hat: f64,
    pub oracle_kstar: usize,
    #[serde(rename = "oracle_Rstar")]
    pub oracle_rstar: f64,
    /// Median risk of the diagonal estimator at the fixed dimension `k*`.
    pub median_oracle_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateStudyReport {
    pub schema: u32,
    pub config: Config,
    pub grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// `finitely_smoothing` or `infinitely_smoothing`.
    pub regime: String,
    pub sigma: f64,
    pub density_floor: f64,
    pub d: f64,
    pub per_n: Vec<GridSummary>,
    /// Least-squares slope of `log median_risk` against `log n`.
    pub fitted_slope: f64,
    /// `−2(p−s)/(2p+2a+1)` when finitely smoothing, `−(p−s)/a` otherwise.
    pub theoretical_slope: Option<f64>,
    /// Slope of `log median_risk` against `log log n`; the exponent of a logarithmic rate.
    pub log_log_slope: f64,
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Theoretical exponent for the configured model, when `ω` measures a derivative.
pub fn theoretical_slope(model: &Model) -> Option<f64> {
    let s = model.omega.derivative_order()?;
    let p = model.structural.p;
    let a = model.operator.decay.a();
    Some(if model.operator.decay.is_finitely_smoothing() {
        -2.0 * (p - s) / (2.0 * p + 2.0 * a + 1.0)
    } else {
        -(p - s) / a
    })
}

/// `k*` and `R*` for sample size `n` under the model's sequences.
pub fn model_oracle(model: &Model, n: usize) -> Result<OracleDimension> {
    let gamma = WeightSequence::sobolev(model.structural.p)?;
    let lambda = model.operator.decay.lambda()?;
    oracle_kstar(&model.omega, &gamma, &lambda, n, DEFAULT_ORACLE_K_MAX)
}

/// Risk of one replication for the adaptive and the fixed-`k*` estimators.
pub fn run_replication(model: &Model, n: usize, k_star: usize, seed: u64, key: u64) -> Result<ReplicationRecord> {
    let sample = generate_sample_replication(&model.structural, &model.operator, model.sigma, n, seed, key)?;
    let trace = penalized_select(&sample, &model.omega, model.penalty_const)?;
    let truth_len = model.structural.truncation;
    let risk = risk_weighted(&trace.estimate, &model.structural, &model.omega, truth_len.max(trace.k_hat))?;
    let fixed = diagonal_estimate(&sample, k_star)?;
    let oracle_risk = risk_weighted(&fixed, &model.structural, &model.omega, truth_len.max(k_star))?;
    Ok(ReplicationRecord {
        n,
        replication: 0,
        k_hat: trace.k_hat,
        n_hat: trace.n_hat,
        thresholded: trace.estimate.thresholded,
        risk,
        oracle_k: k_star,
        oracle_risk,
    })
}

/// Replication key of `(grid index, replication)`.
pub fn replication_key(grid_index: usize, replication: usize) -> u64 {
    ((grid_index as u64) << 32) | replication as u64
}

pub fn run_rate_study(config: &Config, plan: &StudyPlan) -> Result<(RateStudyReport, Vec<ReplicationRecord>)> {
    plan.validate()?;
    let model = config.build()?;
    let oracles = plan.grid.iter().map(|&n| model_oracle(&model, n)).collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, usize)> =
        (0..plan.grid.len()).flat_map(|g| (0..plan.replications).map(move |r| (g, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", plan.jobs)))?;
    let records: Vec<ReplicationRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(g, r)| {
                let n = plan.grid[g];
                let mut rec = run_replication(&model, n, oracles[g].k_star, plan.seed, replication_key(g, r))?;
                rec.replication = r;
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let per_n: Vec<GridSummary> = plan
        .grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let chunk = &records[g * plan.replications..(g + 1) * plan.replications];
            let mut risks: Vec<f64> = chunk.iter().map(|r| r.risk).collect();
            risks.sort_by(f64::total_cmp);
            let k_hats: Vec<f64> = chunk.iter().map(|r| r.k_hat as f64).collect();
            let oracle_risks: Vec<f64> = chunk.iter().map(|r| r.oracle_risk).collect();
            GridSummary {
                n,
                median_risk: quantile(&risks, 0.5),
                mean_risk: risks.iter().sum::<f64>() / risks.len() as f64,
                iqr: quantile(&risks, 0.75) - quantile(&risks, 0.25),
                median_k_hat: median(&k_hats),
                mean_n_hat: chunk.iter().map(|r| r.n_hat as f64).sum::<f64>() / chunk.len() as f64,
                oracle_kstar: oracles[g].k_star,
                oracle_rstar: oracles[g].r_star,
                median_oracle_risk: median(&oracle_risks),
            }
        })
        .collect();

    let log_n: Vec<f64> = plan.grid.iter().map(|&n| (n as f64).ln()).collect();
    let log_log_n: Vec<f64> = log_n.iter().map(|l| l.ln()).collect();
    let log_risk: Vec<f64> = per_n.iter().map(|s| s.median_risk.ln()).collect();
    let report = RateStudyReport {
        schema: REPORT_SCHEMA,
        config: config.clone(),
        grid: plan.grid.clone(),
        replications: plan.replications,
        seed: plan.seed,
        regime: if model.operator.decay.is_finitely_smoothing() {
            "finitely_smoothing".into()
        } else {
            "infinitely_smoothing".into()
        },
        sigma: model.sigma,
        density_floor: model.operator.density_floor,
        d: model.operator.d,
        per_n,
        fitted_slope: ls_slope(&log_n, &log_risk),
        theoretical_slope: theoretical_slope(&model),
        log_log_slope: ls_slope(&log_log_n, &log_risk),
    };
    Ok((report, records))
}
