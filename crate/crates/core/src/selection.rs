//! Penalty sequences, dimension bounds and the data-driven choice of `k`.
//!
//! Natural logarithms are used throughout. Ties in every argmin/argmax are
//! broken toward the smallest index.

use serde::Serialize;

use crate::basis::{weighted_sum_sq, WeightSequence};
use crate::error::{domain, Result};
use crate::estimator::{diagonal_entry, diagonal_from_moments, empirical_rhs, GalerkinEstimate};
use crate::sample::Sample;

/// `Δ_k`, `τ_k` and `δ_k` for `k = 1..k_max` (index `k − 1`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltySequences {
    pub k_max: usize,
    #[serde(rename = "Delta")]
    pub big_delta: Vec<f64>,
    pub tau: Vec<f64>,
    pub delta: Vec<f64>,
    pub empirical: bool,
}

impl PenaltySequences {
    /// `δ_k` for `k ≥ 1`.
    pub fn delta_at(&self, k: usize) -> f64 {
        self.delta[k - 1]
    }
}

/// `δ = k Δ log(τ ∨ (k+2)) / log(k+2)`.
#[inline]
pub fn penalty_delta(k: usize, big_delta: f64, tau: f64) -> f64 {
    let k2 = (k + 2) as f64;
    k as f64 * big_delta * (tau.max(k2).ln() / k2.ln())
}

fn build_sequences(ratios: impl Iterator<Item = (f64, f64)>, k_max: usize, empirical: bool) -> PenaltySequences {
    let mut big_delta = Vec::with_capacity(k_max);
    let mut tau = Vec::with_capacity(k_max);
    let mut delta = Vec::with_capacity(k_max);
    let (mut run_d, mut run_t) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (k, (d, t)) in (1..=k_max).zip(ratios) {
        run_d = run_d.max(d);
        run_t = run_t.max(t);
        big_delta.push(run_d);
        tau.push(run_t);
        delta.push(penalty_delta(k, run_d, run_t));
    }
    PenaltySequences { k_max, big_delta, tau, delta, empirical }
}

fn check_k(k_max: usize) -> Result<()> {
    if k_max == 0 {
        return domain("k_max must be at least 1");
    }
    Ok(())
}

/// `Δ_k = max_{j≤k} ω_j/λ_j`, `τ_k = max_{j≤k} (ω_j ∨ 1)/λ_j` and `δ_k`.
pub fn known_sequences(omega: &WeightSequence, lambda: &WeightSequence, k_max: usize) -> Result<PenaltySequences> {
    check_k(k_max)?;
    let om = omega.values(k_max)?;
    let lam = lambda.values(k_max)?;
    let ratios = om.iter().zip(&lam).map(|(o, l)| (o / l, o.max(1.0) / l));
    Ok(build_sequences(ratios, k_max, false))
}

/// Empirical sequences from diagonal entries `T̂_11, …, T̂_kk` of a sample of size `n`.
///
/// At each `k` the indicator `min_{j≤k} T̂_jj² ≥ 1/n` is evaluated on its own;
/// once it fails, `Δ̂_k = τ̂_k = δ̂_k = 0`.
pub fn sequences_from_diagonal(diag: &[f64], omega: &WeightSequence, n: usize) -> Result<PenaltySequences> {
    let k_max = diag.len();
    check_k(k_max)?;
    let om = omega.values(k_max)?;
    let inv_n = 1.0 / n as f64;
    let mut seqs = build_sequences(
        om.iter().zip(diag).map(|(o, t)| {
            let t2 = t * t;
            (o / t2, o.max(1.0) / t2)
        }),
        k_max,
        true,
    );
    let mut ok = true;
    for (k, t) in diag.iter().enumerate() {
        ok = ok && t * t >= inv_n;
        if !ok {
            seqs.big_delta[k] = 0.0;
            seqs.tau[k] = 0.0;
            seqs.delta[k] = 0.0;
        }
    }
    Ok(seqs)
}

/// [`sequences_from_diagonal`] with the diagonal of the sample's empirical operator.
pub fn empirical_sequences(sample: &Sample, omega: &WeightSequence, k_max: usize) -> Result<PenaltySequences> {
    check_k(k_max)?;
    let diag: Vec<f64> = (1..=k_max).map(|j| diagonal_entry(sample, j)).collect();
    sequences_from_diagonal(&diag, omega, sample.len())
}

/// `N_n`: the largest `N ≤ n` with `n⁷ exp(−nλ_N/(288d)) ≤ (2016d/λ_1)⁷` and
/// `δ_N/n ≤ 1`, or 1 when no `N` qualifies.
pub fn dimension_bound_known(omega: &WeightSequence, lambda: &WeightSequence, d: f64, n: usize) -> Result<usize> {
    if d.is_nan() || d < 1.0 {
        return domain(format!("link constant d must be at least 1, got {d}"));
    }
    if n == 0 {
        return domain("sample size must be at least 1");
    }
    let seqs = known_sequences(omega, lambda, n)?;
    let lam = lambda.values(n)?;
    let nf = n as f64;
    let rhs = (2016.0 * d / lam[0]).powi(7);
    let mut best = None;
    for big_n in 1..=n {
        let lhs = nf.powi(7) * (-(nf * lam[big_n - 1]) / (288.0 * d)).exp();
        if lhs <= rhs && seqs.delta[big_n - 1] / nf <= 1.0 {
            best = Some(big_n);
        }
    }
    Ok(best.unwrap_or(1))
}

/// `N̂ⁿ_u` and `N̂_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DimensionBound {
    /// Largest `N ≤ n` with `max_{j≤N} ω_j / n ≤ 1` (1 if none).
    pub upper: usize,
    /// One less than the first `j ≤ upper` with `T̂_jj² / (j (ω_j ∨ 1)) < log n / n`,
    /// clamped to at least 1; `upper` when no index violates.
    pub bound: usize,
}

/// `N̂ⁿ_u`, scanning `j` upward until `ω_j / n` first exceeds 1.
pub fn upper_dimension(omega: &WeightSequence, n: usize) -> Result<usize> {
    let nf = n as f64;
    let mut upper = 0;
    for j in 1..=n {
        if omega.value(j)? / nf <= 1.0 {
            upper = j;
        } else {
            break;
        }
    }
    Ok(upper.max(1))
}

/// Dimension bound from a diagonal supplied one entry at a time.
///
/// Returns the bound together with the diagonal entries evaluated on the way
/// (at least `bound` of them).
pub fn dimension_bound_with<F>(mut diag: F, omega: &WeightSequence, n: usize) -> Result<(DimensionBound, Vec<f64>)>
where
    F: FnMut(usize) -> f64,
{
    if n == 0 {
        return domain("sample size must be at least 1");
    }
    let upper = upper_dimension(omega, n)?;
    let nf = n as f64;
    let threshold = nf.ln() / nf;
    let mut seen = Vec::new();
    let mut bound = upper;
    for j in 1..=upper {
        let t = diag(j);
        seen.push(t);
        if t * t / (j as f64 * omega.value(j)?.max(1.0)) < threshold {
            bound = (j - 1).max(1);
            break;
        }
    }
    if seen.is_empty() {
        seen.push(diag(1));
    }
    Ok((DimensionBound { upper, bound }, seen))
}

pub fn empirical_dimension_bound(sample: &Sample, omega: &WeightSequence) -> Result<DimensionBound> {
    Ok(dimension_bound_with(|j| diagonal_entry(sample, j), omega, sample.len())?.0)
}

/// `Ê[Y²] = n⁻¹ Σ y_i²`.
pub fn estimate_ey2(sample: &Sample) -> f64 {
    sample.y().iter().map(|y| y * y).sum::<f64>() / sample.len() as f64
}

/// Default penalty constant of the selection criterion.
pub const DEFAULT_PENALTY_CONST: f64 = 540.0;

/// Everything computed while choosing `k̂`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub n: usize,
    #[serde(rename = "N_u")]
    pub n_upper: usize,
    #[serde(rename = "N_hat")]
    pub n_hat: usize,
    /// `−‖φ̂_k‖²_ω + pen(k)` for `k = 1..N̂`.
    pub criterion: Vec<f64>,
    pub contrast: Vec<f64>,
    pub penalty: Vec<f64>,
    pub delta_hat: Vec<f64>,
    pub penalty_const: f64,
    #[serde(rename = "EY2_hat")]
    pub ey2_hat: f64,
    pub k_hat: usize,
    pub estimate: GalerkinEstimate,
}

/// First index attaining the minimum (1-based).
pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best + 1
}

/// `k̂ = argmin_{1≤k≤N̂} { −‖φ̂_k‖²_ω + c Ê[Y²] δ̂_k / n }` with diagonal estimates φ̂_k.
///
/// The penalty is evaluated as `((c · Ê[Y²]) · δ̂_k) / n`.
pub fn penalized_select(sample: &Sample, omega: &WeightSequence, penalty_const: f64) -> Result<SelectionTrace> {
    if !(penalty_const > 0.0 && penalty_const.is_finite()) {
        return domain(format!("penalty constant must be positive, got {penalty_const}"));
    }
    let n = sample.len();
    let (bound, mut diag) = dimension_bound_with(|j| diagonal_entry(sample, j), omega, n)?;
    let n_hat = bound.bound;
    diag.truncate(n_hat);
    let rhs = empirical_rhs(sample, n_hat)?;
    let seqs = sequences_from_diagonal(&diag, omega, n)?;
    let om = omega.values(n_hat)?;
    let ey2 = estimate_ey2(sample);
    let nf = n as f64;

    let mut estimates = Vec::with_capacity(n_hat);
    let (mut criterion, mut contrast, mut penalty) =
        (Vec::with_capacity(n_hat), Vec::with_capacity(n_hat), Vec::with_capacity(n_hat));
    for k in 1..=n_hat {
        let est = diagonal_from_moments(&diag[..k], &rhs[..k], n);
        let c = -weighted_sum_sq(est.coeffs.as_slice(), &om[..k]);
        let p = penalty_const * ey2 * seqs.delta_at(k) / nf;
        contrast.push(c);
        penalty.push(p);
        criterion.push(c + p);
        estimates.push(est);
    }
    let k_hat = argmin_first(&criterion);
    let estimate = estimates.swap_remove(k_hat - 1);
    Ok(SelectionTrace {
        n,
        n_upper: bound.upper,
        n_hat,
        criterion,
        contrast,
        penalty,
        delta_hat: seqs.delta,
        penalty_const,
        ey2_hat: ey2,
        k_hat,
        estimate,
    })
}

/// Oracle dimension `k*` and rate `R*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleDimension {
    pub k_star: usize,
    pub r_star: f64,
}

/// Minimizes `max(ω_k/γ_k, (Σ_{j≤k} ω_j/λ_j)/n)` over `k = 1..k_max`.
pub fn oracle_kstar(
    omega: &WeightSequence,
    gamma: &WeightSequence,
    lambda: &WeightSequence,
    n: usize,
    k_max: usize,
) -> Result<OracleDimension> {
    check_k(k_max)?;
    if n == 0 {
        return domain("sample size must be at least 1");
    }
    let nf = n as f64;
    let mut sum = 0.0;
    let mut best = OracleDimension { k_star: 1, r_star: f64::INFINITY };
    for k in 1..=k_max {
        let (o, g, l) = (omega.value(k)?, gamma.value(k)?, lambda.value(k)?);
        sum += o / l;
        let objective = (o / g).max(sum / nf);
        if objective < best.r_star || k == 1 {
            best = OracleDimension { k_star: k, r_star: objective };
        }
    }
    Ok(best)
}

/// Largest `j ≤ cap` with `λ_j / (j (ω_j ∨ 1)) ≥ 4 d log n / n`, or 1.
pub fn lower_dimension_scan(
    omega: &WeightSequence,
    lambda: &WeightSequence,
    d: f64,
    n: usize,
    cap: usize,
) -> Result<usize> {
    let nf = n as f64;
    let threshold = 4.0 * d * nf.ln() / nf;
    let mut best = 1;
    for j in 1..=cap {
        if lambda.value(j)? / (j as f64 * omega.value(j)?.max(1.0)) >= threshold {
            best = j;
        }
    }
    Ok(best)
}

/// `N_n^l`, the diagnostic lower dimension, searched below `N_n`.
pub fn diagnostic_nl(omega: &WeightSequence, lambda: &WeightSequence, d: f64, n: usize) -> Result<usize> {
    let cap = dimension_bound_known(omega, lambda, d, n)?;
    lower_dimension_scan(omega, lambda, d, n, cap)
}
