//! Empirical Galerkin quantities and the thresholded projection estimators.
//!
//! With `f_l = e_l = ψ_l`, the empirical operator matrix is
//! `[T̂]_{lj} = n⁻¹ Σ_i ψ_l(W_i) ψ_j(Z_i)` and the right-hand side is
//! `[ĝ]_l = n⁻¹ Σ_i Y_i ψ_l(W_i)`. All sums run over observations in order and
//! are divided by `n` at the end, so the diagonal computed on its own matches
//! the diagonal of the full matrix bit-for-bit.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{self, fill_basis, weighted_sum_sq, CoefficientVector, WeightSequence};
use crate::error::{domain, Result};
use crate::sample::Sample;
use crate::simulate::StructuralSpec;

/// Which of the two estimators produced a [`GalerkinEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    General,
    Diagonal,
}

impl std::str::FromStr for EstimatorMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Self::General),
            "diagonal" => Ok(Self::Diagonal),
            other => domain(format!("unknown estimator mode `{other}`")),
        }
    }
}

/// Coefficients of `φ̂_k` in the trigonometric basis.
///
/// `thresholded` is set when the stability guard fired; the coefficients are
/// then identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinEstimate {
    pub coeffs: CoefficientVector,
    pub k: usize,
    pub thresholded: bool,
    pub mode: EstimatorMode,
}

impl GalerkinEstimate {
    fn zero(k: usize, mode: EstimatorMode) -> Self {
        Self { coeffs: CoefficientVector::zeros(k), k, thresholded: true, mode }
    }
}

fn check_dim(k: usize) -> Result<()> {
    if k == 0 {
        return domain("dimension k must be at least 1");
    }
    Ok(())
}

/// `k × k` matrix with entry `(l, j) = n⁻¹ Σ_i ψ_l(w_i) ψ_j(z_i)`.
pub fn empirical_operator_matrix(sample: &Sample, k: usize) -> Result<DMatrix<f64>> {
    check_dim(k)?;
    let mut acc = DMatrix::<f64>::zeros(k, k);
    let mut pw = vec![0.0; k];
    let mut pz = vec![0.0; k];
    for (&z, &w) in sample.z().iter().zip(sample.w()) {
        fill_basis(w, &mut pw);
        fill_basis(z, &mut pz);
        for j in 0..k {
            let zj = pz[j];
            for l in 0..k {
                acc[(l, j)] += pw[l] * zj;
            }
        }
    }
    let n = sample.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    Ok(acc)
}

/// Diagonal entries `T̂_11, …, T̂_kk`.
pub fn empirical_diagonal(sample: &Sample, k: usize) -> Result<Vec<f64>> {
    check_dim(k)?;
    let mut acc = vec![0.0; k];
    let mut pw = vec![0.0; k];
    let mut pz = vec![0.0; k];
    for (&z, &w) in sample.z().iter().zip(sample.w()) {
        fill_basis(w, &mut pw);
        fill_basis(z, &mut pz);
        for j in 0..k {
            acc[j] += pw[j] * pz[j];
        }
    }
    let n = sample.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    Ok(acc)
}

/// Single diagonal entry `T̂_jj`, used where entries are needed one at a time.
pub(crate) fn diagonal_entry(sample: &Sample, j: usize) -> f64 {
    let mut acc = 0.0;
    for (&z, &w) in sample.z().iter().zip(sample.w()) {
        acc += basis::psi(j, w) * basis::psi(j, z);
    }
    acc / sample.len() as f64
}

/// Vector with entry `l = n⁻¹ Σ_i y_i ψ_l(w_i)`.
pub fn empirical_rhs(sample: &Sample, k: usize) -> Result<Vec<f64>> {
    check_dim(k)?;
    let mut acc = vec![0.0; k];
    let mut pw = vec![0.0; k];
    for (&y, &w) in sample.y().iter().zip(sample.w()) {
        fill_basis(w, &mut pw);
        for l in 0..k {
            acc[l] += y * pw[l];
        }
    }
    let n = sample.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    Ok(acc)
}

/// Outcome of the stability guard on `[T̂]_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseNorm {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `false` when `σ_min ≤ ε·k·σ_max`.
    pub nonsingular: bool,
}

impl InverseNorm {
    /// Spectral norm of the inverse, `1/σ_min`, or infinity when singular.
    pub fn norm(&self) -> f64 {
        if self.nonsingular {
            1.0 / self.sigma_min
        } else {
            f64::INFINITY
        }
    }
}

pub fn inverse_norm(matrix: &DMatrix<f64>) -> InverseNorm {
    let k = matrix.nrows();
    let sv = matrix.clone().svd(false, false).singular_values;
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let nonsingular = sigma_max > 0.0 && sigma_min > f64::EPSILON * k as f64 * sigma_max;
    InverseNorm { sigma_min, sigma_max, nonsingular }
}

/// Least-squares Galerkin estimate of dimension `k` from precomputed moments.
pub fn galerkin_from_moments(matrix: &DMatrix<f64>, rhs: &[f64], n: usize) -> GalerkinEstimate {
    let k = matrix.nrows();
    let guard = inverse_norm(matrix);
    if !guard.nonsingular || guard.norm() > (n as f64).sqrt() {
        return GalerkinEstimate::zero(k, EstimatorMode::General);
    }
    match matrix.clone().lu().solve(&DVector::from_column_slice(rhs)) {
        Some(x) if x.iter().all(|v| v.is_finite()) => GalerkinEstimate {
            coeffs: CoefficientVector::new(x.as_slice().to_vec()).expect("k >= 1"),
            k,
            thresholded: false,
            mode: EstimatorMode::General,
        },
        _ => GalerkinEstimate::zero(k, EstimatorMode::General),
    }
}

/// `[T̂]_k⁻¹ [ĝ]_k` when `[T̂]_k` is nonsingular with `‖[T̂]_k⁻¹‖ ≤ √n`, zero otherwise.
pub fn galerkin_estimate(sample: &Sample, k: usize) -> Result<GalerkinEstimate> {
    let matrix = empirical_operator_matrix(sample, k)?;
    let rhs = empirical_rhs(sample, k)?;
    Ok(galerkin_from_moments(&matrix, &rhs, sample.len()))
}

/// `min_j T̂_jj² ≥ 1/n`, the indicator guarding the diagonal estimator.
pub(crate) fn diagonal_guard(diag: &[f64], n: usize) -> bool {
    let inv_n = 1.0 / n as f64;
    diag.iter().all(|t| t * t >= inv_n)
}

/// Diagonal estimate from the first `k = diag.len()` diagonal entries and moments.
pub fn diagonal_from_moments(diag: &[f64], rhs: &[f64], n: usize) -> GalerkinEstimate {
    let k = diag.len();
    assert!(k >= 1 && rhs.len() >= k, "need k >= 1 diagonal entries and moments");
    if !diagonal_guard(diag, n) {
        return GalerkinEstimate::zero(k, EstimatorMode::Diagonal);
    }
    let coeffs = rhs.iter().zip(diag).map(|(g, t)| g / t).collect();
    GalerkinEstimate {
        coeffs: CoefficientVector::new(coeffs).expect("k >= 1"),
        k,
        thresholded: false,
        mode: EstimatorMode::Diagonal,
    }
}

/// `Σ_{j≤k} (ĝ_j / T̂_jj) ψ_j` when `min_{j≤k} T̂_jj² ≥ 1/n`, zero otherwise.
pub fn diagonal_estimate(sample: &Sample, k: usize) -> Result<GalerkinEstimate> {
    let diag = empirical_diagonal(sample, k)?;
    let rhs = empirical_rhs(sample, k)?;
    Ok(diagonal_from_moments(&diag, &rhs, sample.len()))
}

/// Coefficients of the `s`-th derivative of `Σ_j c_j ψ_j`.
///
/// Each differentiation maps the (cos, sin) pair `(a, b)` at frequency `m` to
/// `(2πm·b, −2πm·a)` and kills the constant. When `k` is even the highest
/// cosine has no sine partner yet, so the result has dimension `k + 1`.
pub fn derivative_coeffs(est: &GalerkinEstimate, s: u32) -> CoefficientVector {
    derivative_of(&est.coeffs, s)
}

pub fn derivative_of(coeffs: &CoefficientVector, s: u32) -> CoefficientVector {
    if s == 0 {
        return coeffs.clone();
    }
    let k = coeffs.dim();
    let dim = if k % 2 == 0 { k + 1 } else { k };
    let mut out = vec![0.0; dim];
    let mut m = 1;
    while 2 * m <= dim {
        let mut a = coeffs.coeff(2 * m);
        let mut b = coeffs.coeff(2 * m + 1);
        let scale = 2.0 * PI * m as f64;
        for _ in 0..s {
            let (na, nb) = (scale * b, -scale * a);
            a = na;
            b = nb;
        }
        out[2 * m - 1] = a;
        out[2 * m] = b;
        m += 1;
    }
    CoefficientVector::new(out).expect("dimension >= 1")
}

/// `Σ_{j≤k} w_j (c_j − b_j)² + Σ_{k<j≤j_max} w_j b_j²`.
pub fn risk_weighted(est: &GalerkinEstimate, truth: &StructuralSpec, w: &WeightSequence, j_max: usize) -> Result<f64> {
    risk_against(&est.coeffs, truth.coefficients(), w, j_max)
}

/// Weighted squared distance between two coefficient vectors over `j ≤ j_max`.
pub fn risk_against(
    est: &CoefficientVector,
    truth: &CoefficientVector,
    w: &WeightSequence,
    j_max: usize,
) -> Result<f64> {
    if j_max < est.dim() || j_max < truth.dim() {
        return domain(format!(
            "j_max = {j_max} is below the estimate dimension {} or truth truncation {}",
            est.dim(),
            truth.dim()
        ));
    }
    let weights = w.values(j_max)?;
    let diff: Vec<f64> = (1..=j_max).map(|j| est.coeff(j) - truth.coeff(j)).collect();
    Ok(weighted_sum_sq(&diff, &weights))
}

/// `φ̂(s) = Σ_j c_j ψ_j(s)`.
pub fn evaluate_estimate(est: &GalerkinEstimate, s: f64) -> Result<f64> {
    est.coeffs.evaluate(s)
}
