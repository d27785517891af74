//! Simulation of instrumental regression data with a diagonal operator.
//!
//! The joint density of `(Z, W)` on `[0, 1]²` is
//! `f(z, w) = 1 + Σ_{j=2..J} t_j ψ_j(z) ψ_j(w)`. Both marginals are uniform and
//! `E[ψ_j(Z) | W] = t_j ψ_j(W)`, so the conditional expectation operator is
//! exactly `diag(t)` in the trigonometric basis. Responses follow
//! `Y = φ(Z) + U` with Gaussian `U` independent of `(Z, W)` and `E[U⁴] = σ⁴`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::{fill_basis_recurrence, weighted_norm_sq, CoefficientVector, WeightSequence};
use crate::error::{domain, Error, Result};
use crate::sample::Sample;

/// Singular value decay of the operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Decay {
    /// `λ_j = j^{-2a}`, finitely smoothing.
    Polynomial { a: f64 },
    /// `λ_1 = 1`, `λ_j = exp(-j^{2a})`, infinitely smoothing.
    Exponential { a: f64 },
}

impl Decay {
    pub fn a(&self) -> f64 {
        match self {
            Self::Polynomial { a } | Self::Exponential { a } => *a,
        }
    }

    /// The sequence `λ` as a weight sequence.
    pub fn lambda(&self) -> Result<WeightSequence> {
        match self {
            Self::Polynomial { a } => WeightSequence::polynomial_decay(*a),
            Self::Exponential { a } => WeightSequence::exponential_decay(*a),
        }
    }

    pub fn is_finitely_smoothing(&self) -> bool {
        matches!(self, Self::Polynomial { .. })
    }
}

/// Diagonal conditional expectation operator with coefficients `t_j = T_jj`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorSpec {
    pub decay: Decay,
    #[serde(rename = "J")]
    pub truncation: usize,
    /// Scale with `t_j = c √λ_j` for `2 ≤ j ≤ J`.
    pub c: f64,
    /// `t_1, …, t_J`; `t_j = 0` beyond `J`.
    pub t: Vec<f64>,
    /// Certified lower bound `1 − 2 Σ_{j≥2} |t_j|` of the joint density.
    pub density_floor: f64,
    /// Link constant: `t_j²/λ_j ∈ [1/d, d]` for all `j ≤ J`.
    pub d: f64,
    /// Extended link constant; equal to `d` for a diagonal operator.
    #[serde(rename = "D")]
    pub big_d: f64,
}

fn check_decay(decay: &Decay) -> Result<WeightSequence> {
    let a = decay.a();
    if !(a.is_finite() && a > 0.0) {
        return domain(format!("decay exponent must be positive, got {a}"));
    }
    decay.lambda()
}

// Rounding in `1 − 2cΣ√λ_j` when `c = 1/(2Σ√λ_j)`.
const FLOOR_ROUNDING: f64 = 1e-12;

impl OperatorSpec {
    /// Coefficient `t_j` at index `j ≥ 1`.
    pub fn coefficient(&self, j: usize) -> f64 {
        if j == 0 {
            return 0.0;
        }
        self.t.get(j - 1).copied().unwrap_or(0.0)
    }

    /// Operator with explicit coefficients `t_1 = 1, t_2, …, t_J`.
    ///
    /// `c` is reported as the smallest scale with `|t_j| ≤ c √λ_j`.
    pub fn with_coefficients(decay: Decay, t: Vec<f64>) -> Result<Self> {
        let lambda = check_decay(&decay)?;
        if t.len() < 2 {
            return domain("operator needs J ≥ 2 coefficients");
        }
        if t[0] != 1.0 {
            return domain(format!("t_1 must equal 1 under uniform marginals, got {}", t[0]));
        }
        if let Some(bad) = t.iter().find(|v| !v.is_finite()) {
            return domain(format!("operator coefficient {bad} is not finite"));
        }
        let lambdas = lambda.values(t.len())?;
        let mass: f64 = t[1..].iter().map(|v| v.abs()).sum();
        let mut density_floor = 1.0 - 2.0 * mass;
        if density_floor < 0.0 && density_floor > -FLOOR_ROUNDING {
            density_floor = 0.0;
        }
        if density_floor < 0.0 {
            return Err(Error::NegativeDensity { floor: density_floor });
        }
        let c = t[1..].iter().zip(&lambdas[1..]).map(|(tj, l)| tj.abs() / l.sqrt()).fold(0.0, f64::max);
        let d = t
            .iter()
            .zip(&lambdas)
            .map(|(tj, l)| {
                let t2 = tj * tj;
                (l / t2).max(t2 / l)
            })
            .fold(1.0, f64::max);
        Ok(Self { decay, truncation: t.len(), c, t, density_floor, d, big_d: d })
    }

    /// Joint density `f(z, w)`.
    pub fn density(&self, z: f64, w: f64) -> f64 {
        let j_max = self.truncation;
        let mut bz = vec![0.0; j_max];
        let mut bw = vec![0.0; j_max];
        fill_basis_recurrence(z, &mut bz);
        fill_basis_recurrence(w, &mut bw);
        density_from_basis(&self.t, &bz, &bw)
    }

    /// Rejection envelope `1 + 2 Σ_{j≥2} |t_j|`.
    pub fn envelope(&self) -> f64 {
        1.0 + 2.0 * self.t[1..].iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `λ_1, …, λ_J`.
    pub fn lambdas(&self) -> Vec<f64> {
        self.decay.lambda().and_then(|l| l.values(self.truncation)).expect("decay validated at construction")
    }
}

fn density_from_basis(t: &[f64], bz: &[f64], bw: &[f64]) -> f64 {
    1.0 + t[1..].iter().zip(&bz[1..]).zip(&bw[1..]).map(|((tj, z), w)| tj * z * w).sum::<f64>()
}

/// Builds the operator with `c = min(1, 1/(2 Σ_{j=2..J} √λ_j))`, the largest
/// scale keeping the joint density non-negative.
pub fn make_operator(decay: Decay, truncation: usize) -> Result<OperatorSpec> {
    if truncation < 2 {
        return domain(format!("operator truncation J must be at least 2, got {truncation}"));
    }
    let lambda = check_decay(&decay)?;
    let roots: Vec<f64> = lambda.values(truncation)?.iter().map(|l| l.sqrt()).collect();
    let root_sum: f64 = roots[1..].iter().sum();
    let c = if root_sum > 0.0 { (1.0 / (2.0 * root_sum)).min(1.0) } else { 1.0 };
    let mut t = Vec::with_capacity(truncation);
    t.push(1.0);
    t.extend(roots[1..].iter().map(|r| c * r));
    let mut spec = OperatorSpec::with_coefficients(decay, t)?;
    spec.c = c;
    Ok(spec)
}

/// Coefficient profile of the structural function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `b_j = κ j^{-(p + 0.51)}`, scaled to 99% of the ellipsoid radius.
    PowerLaw,
    /// Same as [`Profile::PowerLaw`] for `j ≥ 2` with `b_1 = 0`.
    CenteredPowerLaw,
    Custom(Vec<f64>),
}

/// True structural function `φ = Σ_j b_j ψ_j` in the Sobolev ellipsoid `W_p^ρ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralSpec {
    pub b: CoefficientVector,
    pub p: f64,
    pub rho: f64,
    #[serde(rename = "J_phi")]
    pub truncation: usize,
}

impl StructuralSpec {
    pub fn coefficients(&self) -> &CoefficientVector {
        &self.b
    }

    /// `Σ_j γ_j b_j²` with `γ = sobolev(p)`.
    pub fn sobolev_norm_sq(&self) -> f64 {
        let gamma = WeightSequence::Sobolev { r: self.p };
        weighted_norm_sq(&self.b, &gamma).expect("built-in weights cover every index")
    }

    /// `φ(z)`.
    pub fn eval(&self, z: f64) -> f64 {
        let mut basis = vec![0.0; self.truncation];
        fill_basis_recurrence(z, &mut basis);
        dot(self.b.as_slice(), &basis)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const POWER_LAW_OFFSET: f64 = 0.51;
const INTERIOR_FRACTION: f64 = 0.99;

pub fn make_structural(p: f64, rho: f64, truncation: usize, profile: Profile) -> Result<StructuralSpec> {
    if !(p > 0.5 && p.is_finite()) {
        return domain(format!("smoothness p must exceed 1/2, got {p}"));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return domain(format!("ellipsoid radius must be positive, got {rho}"));
    }
    let gamma = WeightSequence::Sobolev { r: p };
    let b = match profile {
        Profile::PowerLaw | Profile::CenteredPowerLaw => {
            if truncation == 0 {
                return domain("truncation J_phi must be at least 1");
            }
            let mut raw: Vec<f64> = (1..=truncation).map(|j| (j as f64).powf(-(p + POWER_LAW_OFFSET))).collect();
            if profile == Profile::CenteredPowerLaw {
                if truncation < 2 {
                    return domain("a centered profile needs J_phi ≥ 2");
                }
                raw[0] = 0.0;
            }
            let norm = weighted_norm_sq(&CoefficientVector::new(raw.clone())?, &gamma)?;
            let kappa = (INTERIOR_FRACTION * rho / norm).sqrt();
            raw.iter_mut().for_each(|v| *v *= kappa);
            CoefficientVector::new(raw)?
        }
        Profile::Custom(coeffs) => {
            let b = CoefficientVector::new(coeffs)?;
            if b.as_slice().iter().any(|v| !v.is_finite()) {
                return domain("structural coefficients must be finite");
            }
            let norm = weighted_norm_sq(&b, &gamma)?;
            if norm > rho {
                return Err(Error::OutsideEllipsoid { norm, rho });
            }
            b
        }
    };
    let truncation = b.dim();
    Ok(StructuralSpec { b, p, rho, truncation })
}

/// `[g]_j = t_j b_j`, the coefficients of `g = Tφ`, up to `max(J, J_φ)`.
pub fn true_g_coeffs(phi: &StructuralSpec, op: &OperatorSpec) -> CoefficientVector {
    let len = phi.truncation.max(op.truncation);
    let g = (1..=len).map(|j| op.coefficient(j) * phi.b.coeff(j)).collect();
    CoefficientVector::new(g).expect("length >= 1")
}

/// Independent random streams drawn for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Joint = 0,
    Noise = 1,
}

const STREAMS: u64 = 2;

/// Counter-based generator keyed by `(seed, replication, stream)`.
///
/// The seed is the ChaCha20 key and `(replication, stream)` selects the stream
/// id, so every replication draws from its own sequence regardless of the
/// order in which replications run.
pub fn stream_rng(seed: u64, replication: u64, stream: Stream) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(replication.wrapping_mul(STREAMS).wrapping_add(stream as u64));
    rng
}

/// Draws `n` pairs `(z, w)` by rejection from the uniform proposal on `[0, 1]²`.
pub fn sample_joint_with<R: Rng>(op: &OperatorSpec, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let envelope = op.envelope();
    let mut bz = vec![0.0; op.truncation];
    let mut bw = vec![0.0; op.truncation];
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z: f64 = rng.random();
        let w: f64 = rng.random();
        let u: f64 = rng.random();
        fill_basis_recurrence(z, &mut bz);
        fill_basis_recurrence(w, &mut bw);
        if u * envelope < density_from_basis(&op.t, &bz, &bw) {
            out.push((z, w));
        }
    }
    out
}

pub fn sample_joint(op: &OperatorSpec, n: usize, seed: u64) -> Vec<(f64, f64)> {
    sample_joint_with(op, n, &mut stream_rng(seed, 0, Stream::Joint))
}

/// Standard deviation `σ / 3^{1/4}` of the Gaussian noise, for which `E[U⁴] = σ⁴`.
pub fn noise_sd(sigma: f64) -> f64 {
    sigma / 3f64.powf(0.25)
}

/// Generates the sample for a given replication of a seed.
pub fn generate_sample_replication(
    phi: &StructuralSpec,
    op: &OperatorSpec,
    sigma: f64,
    n: usize,
    seed: u64,
    replication: u64,
) -> Result<Sample> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("noise level sigma must be positive, got {sigma}"));
    }
    if n == 0 {
        return domain("sample size must be at least 1");
    }
    let pairs = sample_joint_with(op, n, &mut stream_rng(seed, replication, Stream::Joint));
    let normal = Normal::new(0.0, noise_sd(sigma)).map_err(|e| Error::Domain(e.to_string()))?;
    let mut noise_rng = stream_rng(seed, replication, Stream::Noise);
    let mut basis = vec![0.0; phi.truncation];
    let (mut y, mut z, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (zi, wi) in pairs {
        fill_basis_recurrence(zi, &mut basis);
        let u = normal.sample(&mut noise_rng);
        y.push(dot(phi.b.as_slice(), &basis) + u);
        z.push(zi);
        w.push(wi);
    }
    Sample::new(y, z, w)
}

/// `y_i = φ(z_i) + u_i` with `(z_i, w_i)` from [`sample_joint`].
pub fn generate_sample(phi: &StructuralSpec, op: &OperatorSpec, sigma: f64, n: usize, seed: u64) -> Result<Sample> {
    generate_sample_replication(phi, op, sigma, n, seed, 0)
}
