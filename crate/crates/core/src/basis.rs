//! Trigonometric basis on `[0, 1]`, weight sequences and weighted norms.
//!
//! Basis functions are indexed from 1: `ψ_1 ≡ 1`, `ψ_{2m}(s) = √2 cos(2πms)` and
//! `ψ_{2m+1}(s) = √2 sin(2πms)`, so index `j` has frequency `⌊j/2⌋`. Every weight
//! sequence is applied per index, with the value at `j = 1` normalized to one.
//! Index-based weights differ from frequency-based ones only by a bounded factor,
//! which is all the rate statements need.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Frequency carried by basis index `j`.
#[inline]
pub fn frequency(j: usize) -> usize {
    j / 2
}

/// Unchecked basis evaluation; `j ≥ 1` is assumed.
#[inline]
pub(crate) fn psi(j: usize, s: f64) -> f64 {
    if j == 1 {
        return 1.0;
    }
    let arg = 2.0 * PI * (frequency(j) as f64) * s;
    if j % 2 == 0 {
        SQRT_2 * arg.cos()
    } else {
        SQRT_2 * arg.sin()
    }
}

/// Evaluates the trigonometric basis function `ψ_j` at `s ∈ [0, 1]`.
pub fn trig_eval(j: usize, s: f64) -> Result<f64> {
    if j == 0 {
        return domain("basis index must be at least 1");
    }
    check_unit(s)?;
    Ok(psi(j, s))
}

pub(crate) fn check_unit(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        domain(format!("point {s} lies outside [0, 1]"))
    }
}

/// Writes `ψ_1(s), …, ψ_k(s)` into `out` (length `k`), evaluating each function
/// directly. Values agree bit-for-bit with [`trig_eval`].
pub fn fill_basis(s: f64, out: &mut [f64]) {
    for (idx, v) in out.iter_mut().enumerate() {
        *v = psi(idx + 1, s);
    }
}

/// Same as [`fill_basis`] but using the angle-addition recurrence. Faster for
/// long expansions at the cost of round-off growing linearly in the frequency.
pub fn fill_basis_recurrence(s: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    let (s1, c1) = (2.0 * PI * s).sin_cos();
    let (mut sm, mut cm) = (s1, c1);
    let mut j = 2;
    while j <= out.len() {
        out[j - 1] = SQRT_2 * cm;
        if j < out.len() {
            out[j] = SQRT_2 * sm;
        }
        let next_c = cm * c1 - sm * s1;
        let next_s = sm * c1 + cm * s1;
        cm = next_c;
        sm = next_s;
        j += 2;
    }
}

/// A strictly positive weight sequence evaluated lazily at indices `j ≥ 1`.
///
/// Built-in kinds satisfy `value(1) = 1`; decaying kinds are non-increasing and
/// growing kinds are non-decreasing in `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawWeights")]
pub enum WeightSequence {
    /// `w_j = 1`.
    Constant,
    /// `w_j = j^{2r}`; the Sobolev smoothness weights.
    Sobolev { r: f64 },
    /// `w_j = j^{2s}`; measures the error of the `s`-th derivative.
    Derivative { s: u32 },
    /// `w_j = j^{-2a}`; finitely smoothing operators.
    PolynomialDecay { a: f64 },
    /// `w_1 = 1`, `w_j = exp(-j^{2a})`; infinitely smoothing operators.
    ExponentialDecay { a: f64 },
    /// Explicit table, `table[j - 1] = w_j`.
    Custom { table: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawWeights {
    Constant,
    Sobolev { r: f64 },
    Derivative { s: u32 },
    PolynomialDecay { a: f64 },
    ExponentialDecay { a: f64 },
    Custom { table: Vec<f64> },
}

impl TryFrom<RawWeights> for WeightSequence {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        match raw {
            RawWeights::Constant => Ok(Self::Constant),
            RawWeights::Sobolev { r } => Self::sobolev(r),
            RawWeights::Derivative { s } => Ok(Self::derivative(s)),
            RawWeights::PolynomialDecay { a } => Self::polynomial_decay(a),
            RawWeights::ExponentialDecay { a } => Self::exponential_decay(a),
            RawWeights::Custom { table } => Self::custom(table),
        }
    }
}

impl WeightSequence {
    pub fn sobolev(r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return domain(format!("sobolev order must be finite and non-negative, got {r}"));
        }
        Ok(Self::Sobolev { r })
    }

    pub fn derivative(s: u32) -> Self {
        Self::Derivative { s }
    }

    pub fn polynomial_decay(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return domain(format!("decay exponent must be positive, got {a}"));
        }
        Ok(Self::PolynomialDecay { a })
    }

    pub fn exponential_decay(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return domain(format!("decay exponent must be positive, got {a}"));
        }
        Ok(Self::ExponentialDecay { a })
    }

    pub fn custom(table: Vec<f64>) -> Result<Self> {
        if table.is_empty() {
            return domain("custom weight table is empty");
        }
        if let Some((i, w)) = table.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return domain(format!("custom weight at index {} is not positive: {w}", i + 1));
        }
        Ok(Self::Custom { table })
    }

    /// Weight at index `j ≥ 1`.
    pub fn value(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return domain("weight index must be at least 1");
        }
        let x = j as f64;
        Ok(match self {
            Self::Constant => 1.0,
            Self::Sobolev { r } => x.powf(2.0 * r),
            Self::Derivative { s } => x.powi(2 * *s as i32),
            Self::PolynomialDecay { a } => x.powf(-2.0 * a),
            Self::ExponentialDecay { a } => {
                if j == 1 {
                    1.0
                } else {
                    (-x.powf(2.0 * a)).exp()
                }
            }
            Self::Custom { table } => {
                *table.get(j - 1).ok_or(Error::WeightTableTooShort { len: table.len(), index: j })?
            }
        })
    }

    /// Weights `w_1, …, w_k`.
    pub fn values(&self, k: usize) -> Result<Vec<f64>> {
        (1..=k).map(|j| self.value(j)).collect()
    }

    /// Derivative order `s` when the sequence measures a derivative norm.
    pub fn derivative_order(&self) -> Option<f64> {
        match self {
            Self::Constant => Some(0.0),
            Self::Derivative { s } => Some(f64::from(*s)),
            Self::Sobolev { r } => Some(*r),
            _ => None,
        }
    }
}

impl fmt::Display for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant => write!(f, "constant"),
            Self::Sobolev { r } => write!(f, "sobolev:{r}"),
            Self::Derivative { s } => write!(f, "derivative:{s}"),
            Self::PolynomialDecay { a } => write!(f, "poly:{a}"),
            Self::ExponentialDecay { a } => write!(f, "exp:{a}"),
            Self::Custom { table } => {
                write!(f, "custom:")?;
                for (i, w) in table.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{w}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `constant`, `sobolev:R`, `derivative:S`, `poly:A`, `exp:A` or
/// `custom:w1,w2,...`.
impl FromStr for WeightSequence {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, arg) = match text.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (text, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Domain(format!("weight kind `{kind}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::Domain(format!("bad weight parameter in `{text}`: {e}")))
        };
        match kind {
            "constant" | "one" => Ok(Self::Constant),
            "sobolev" => Self::sobolev(number(arg)?),
            "derivative" => {
                let s = arg
                    .ok_or_else(|| Error::Domain("derivative weights need an order".into()))?
                    .parse::<u32>()
                    .map_err(|e| Error::Domain(format!("bad derivative order: {e}")))?;
                Ok(Self::derivative(s))
            }
            "poly" | "polynomial_decay" => Self::polynomial_decay(number(arg)?),
            "exp" | "exponential_decay" => Self::exponential_decay(number(arg)?),
            "custom" => {
                let table = arg
                    .unwrap_or("")
                    .split(',')
                    .map(|v| {
                        v.trim().parse::<f64>().map_err(|e| Error::Domain(format!("bad custom weight `{v}`: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::custom(table)
            }
            other => domain(format!("unknown weight kind `{other}`")),
        }
    }
}

/// Coefficients `[f]_1, …, [f]_k` in the trigonometric basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return domain("coefficient vector must have dimension at least 1");
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(k: usize) -> Self {
        assert!(k >= 1, "coefficient vector must have dimension at least 1");
        Self(vec![0.0; k])
    }

    /// Dimension `k`.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Coefficient at basis index `j` (1-based), zero beyond the dimension.
    pub fn coeff(&self, j: usize) -> f64 {
        if j == 0 {
            return 0.0;
        }
        self.0.get(j - 1).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }

    /// Evaluates `Σ_j c_j ψ_j(s)`.
    pub fn evaluate(&self, s: f64) -> Result<f64> {
        check_unit(s)?;
        Ok(self.0.iter().enumerate().map(|(i, c)| c * psi(i + 1, s)).sum())
    }
}

impl std::ops::Index<usize> for CoefficientVector {
    type Output = f64;

    /// Zero-based access, like the underlying slice.
    fn index(&self, idx: usize) -> &f64 {
        &self.0[idx]
    }
}

/// `Σ_{j ≤ k} w_j c_j²`.
pub fn weighted_norm_sq(f: &CoefficientVector, w: &WeightSequence) -> Result<f64> {
    let weights = w.values(f.dim())?;
    Ok(weighted_sum_sq(f.as_slice(), &weights))
}

pub(crate) fn weighted_sum_sq(coeffs: &[f64], weights: &[f64]) -> f64 {
    coeffs.iter().zip(weights).map(|(c, w)| w * c * c).sum()
}

/// Membership in the ellipsoid `{f : ‖f‖²_γ ≤ ρ}`.
pub fn ellipsoid_norm_check(f: &CoefficientVector, gamma: &WeightSequence, rho: f64) -> Result<bool> {
    if rho.is_nan() || rho <= 0.0 {
        return domain(format!("ellipsoid radius must be positive, got {rho}"));
    }
    Ok(weighted_norm_sq(f, gamma)? <= rho)
}
