//! Brute-force reference evaluators and fidelity checks shared by the
//! integration tests and the acceptance harness.
//!
//! Every evaluator recomputes each quantity from its definition, with no
//! running maxima, running sums carried between indices, or early exits.

#![allow(dead_code)]

use std::f64::consts::PI;

use npiv_core::basis::trig_eval;
use npiv_core::simulate::{sample_joint, OperatorSpec};
use npiv_core::{Decay, Sample, WeightSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub type Check = Result<(), String>;

// ----------------------------------------------------------------------------
// Sequences

pub struct BruteSequences {
    pub big_delta: Vec<f64>,
    pub tau: Vec<f64>,
    pub delta: Vec<f64>,
}

fn delta_formula(k: usize, big_delta: f64, tau: f64) -> f64 {
    let k2 = (k + 2) as f64;
    k as f64 * big_delta * (tau.max(k2).ln() / k2.ln())
}

pub fn brute_known(omega: &[f64], lambda: &[f64], k_max: usize) -> BruteSequences {
    let mut out = BruteSequences { big_delta: vec![], tau: vec![], delta: vec![] };
    for k in 1..=k_max {
        let d = (0..k).map(|j| omega[j] / lambda[j]).fold(f64::NEG_INFINITY, f64::max);
        let t = (0..k).map(|j| omega[j].max(1.0) / lambda[j]).fold(f64::NEG_INFINITY, f64::max);
        out.big_delta.push(d);
        out.tau.push(t);
        out.delta.push(delta_formula(k, d, t));
    }
    out
}

pub fn brute_dimension_bound_known(omega: &[f64], lambda: &[f64], d: f64, n: usize) -> usize {
    let nf = n as f64;
    let seq = brute_known(omega, lambda, n);
    let rhs = (2016.0 * d / lambda[0]).powi(7);
    let qualifying: Vec<usize> = (1..=n)
        .filter(|&big_n| {
            let lhs = nf.powi(7) * (-(nf * lambda[big_n - 1]) / (288.0 * d)).exp();
            lhs <= rhs && seq.delta[big_n - 1] / nf <= 1.0
        })
        .collect();
    qualifying.into_iter().max().unwrap_or(1)
}

pub fn brute_diagonal_entry(sample: &Sample, j: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..sample.len() {
        acc += trig_eval(j, sample.w()[i]).unwrap() * trig_eval(j, sample.z()[i]).unwrap();
    }
    acc / sample.len() as f64
}

/// `(N̂_u, N̂)` straight from their definitions.
pub fn brute_empirical_bound(sample: &Sample, omega: &[f64]) -> (usize, usize) {
    let n = sample.len();
    let nf = n as f64;
    let upper = (1..=n).filter(|&big_n| (0..big_n).all(|j| omega[j] / nf <= 1.0)).max().unwrap_or(1);
    let threshold = nf.ln() / nf;
    let violating: Vec<usize> = (1..=upper)
        .filter(|&j| {
            let t = brute_diagonal_entry(sample, j);
            t * t / (j as f64 * omega[j - 1].max(1.0)) < threshold
        })
        .collect();
    let bound = match violating.first() {
        Some(&j) => (j - 1).max(1),
        None => upper,
    };
    (upper, bound)
}

pub fn brute_oracle(omega: &[f64], gamma: &[f64], lambda: &[f64], n: usize, k_max: usize) -> (usize, f64) {
    let nf = n as f64;
    let objective = |k: usize| {
        let mut variance = 0.0;
        for j in 0..k {
            variance += omega[j] / lambda[j];
        }
        (omega[k - 1] / gamma[k - 1]).max(variance / nf)
    };
    let values: Vec<f64> = (1..=k_max).map(objective).collect();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = values.iter().position(|v| *v == min).unwrap() + 1;
    (k, min)
}

pub fn brute_nl(omega: &[f64], lambda: &[f64], d: f64, n: usize) -> usize {
    let cap = brute_dimension_bound_known(omega, lambda, d, n);
    let nf = n as f64;
    let threshold = 4.0 * d * nf.ln() / nf;
    (1..=cap).filter(|&j| lambda[j - 1] / (j as f64 * omega[j - 1].max(1.0)) >= threshold).max().unwrap_or(1)
}

/// Random weight sequence suitable as `ω` (positive, `ω_1 = 1`).
pub fn random_omega(rng: &mut impl Rng, len: usize) -> WeightSequence {
    match rng.random_range(0..4) {
        0 => WeightSequence::Constant,
        1 => WeightSequence::sobolev(rng.random_range(0.0..3.0)).unwrap(),
        2 => WeightSequence::derivative(rng.random_range(0..3)),
        _ => {
            let mut table = vec![1.0];
            table.extend((1..len).map(|_| rng.random_range(0.01..50.0)));
            WeightSequence::custom(table).unwrap()
        }
    }
}

/// Random decreasing sequence suitable as `λ` (`λ_1 = 1`).
pub fn random_lambda(rng: &mut impl Rng, len: usize) -> WeightSequence {
    match rng.random_range(0..3) {
        0 => WeightSequence::polynomial_decay(rng.random_range(0.1..2.5)).unwrap(),
        1 => WeightSequence::exponential_decay(rng.random_range(0.05..0.6)).unwrap(),
        _ => {
            let mut table = vec![1.0];
            let mut v = 1.0;
            for _ in 1..len {
                v *= rng.random_range(0.9..1.0);
                table.push(v);
            }
            WeightSequence::custom(table).unwrap()
        }
    }
}

pub fn random_gamma(rng: &mut impl Rng) -> WeightSequence {
    WeightSequence::sobolev(rng.random_range(0.6..3.0)).unwrap()
}

pub fn random_sample(rng: &mut impl Rng, n: usize) -> Sample {
    let coupling = rng.random_range(0.0..1.0);
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| {
            let z: f64 = rng.random();
            let w = if rng.random::<f64>() < coupling { z } else { rng.random() };
            (rng.random_range(-2.0..2.0), z, w)
        })
        .collect();
    Sample::from_rows(&rows).unwrap()
}

pub fn instance_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of randomized instances per sequence check.
pub const INSTANCES: u64 = 120;

/// Guards against instance generators that only ever hit the trivial fallback.
fn require_variety(name: &str, outcomes: &[usize]) -> Check {
    let mut distinct = outcomes.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let non_trivial = outcomes.iter().filter(|&&v| v > 1).count();
    if distinct.len() >= 5 && non_trivial * 4 >= outcomes.len() {
        Ok(())
    } else {
        Err(format!("{name}: instances too uniform ({} distinct, {non_trivial} above 1)", distinct.len()))
    }
}

pub fn check_known_sequences() -> Check {
    use npiv_core::known_sequences;
    let mut rng = instance_rng(11);
    for case in 0..INSTANCES {
        let k_max = rng.random_range(1..300);
        let omega = random_omega(&mut rng, k_max);
        let lambda = random_lambda(&mut rng, k_max);
        let got = known_sequences(&omega, &lambda, k_max).map_err(|e| e.to_string())?;
        let want = brute_known(&omega.values(k_max).unwrap(), &lambda.values(k_max).unwrap(), k_max);
        if got.big_delta != want.big_delta || got.tau != want.tau || got.delta != want.delta {
            return Err(format!("known_sequences instance {case}: {omega} / {lambda}, k_max = {k_max}"));
        }
    }
    Ok(())
}

pub fn check_dimension_bound_known() -> Check {
    use npiv_core::dimension_bound_known;
    let mut rng = instance_rng(12);
    let mut outcomes = Vec::new();
    for case in 0..INSTANCES {
        let n = rng.random_range(1..2500);
        let omega = random_omega(&mut rng, n);
        let lambda = random_lambda(&mut rng, n);
        let d = rng.random_range(1.0..4.0);
        let got = dimension_bound_known(&omega, &lambda, d, n).map_err(|e| e.to_string())?;
        let want = brute_dimension_bound_known(&omega.values(n).unwrap(), &lambda.values(n).unwrap(), d, n);
        if got != want {
            return Err(format!("dimension_bound_known instance {case}: got {got}, want {want}"));
        }
        outcomes.push(got);
    }
    require_variety("dimension_bound_known", &outcomes)
}

pub fn check_empirical_dimension_bound() -> Check {
    use npiv_core::empirical_dimension_bound;
    let mut rng = instance_rng(13);
    let mut outcomes = Vec::new();
    for case in 0..INSTANCES {
        let n = rng.random_range(1..200);
        let omega = random_omega(&mut rng, n);
        let sample = random_sample(&mut rng, n);
        let got = empirical_dimension_bound(&sample, &omega).map_err(|e| e.to_string())?;
        let want = brute_empirical_bound(&sample, &omega.values(n).unwrap());
        if (got.upper, got.bound) != want {
            return Err(format!("empirical_dimension_bound instance {case}: got {got:?}, want {want:?}"));
        }
        outcomes.push(got.bound);
    }
    require_variety("empirical_dimension_bound", &outcomes)
}

pub fn check_oracle_kstar() -> Check {
    use npiv_core::oracle_kstar;
    let mut rng = instance_rng(14);
    let mut outcomes = Vec::new();
    for case in 0..INSTANCES {
        let k_max = rng.random_range(1..400);
        let n = rng.random_range(1..1_000_000);
        let omega = random_omega(&mut rng, k_max);
        let gamma = random_gamma(&mut rng);
        let lambda = random_lambda(&mut rng, k_max);
        let got = oracle_kstar(&omega, &gamma, &lambda, n, k_max).map_err(|e| e.to_string())?;
        let want = brute_oracle(
            &omega.values(k_max).unwrap(),
            &gamma.values(k_max).unwrap(),
            &lambda.values(k_max).unwrap(),
            n,
            k_max,
        );
        if (got.k_star, got.r_star) != want {
            return Err(format!("oracle_kstar instance {case}: got {got:?}, want {want:?}"));
        }
        outcomes.push(got.k_star);
    }
    require_variety("oracle_kstar", &outcomes)
}

pub fn check_diagnostic_nl() -> Check {
    use npiv_core::diagnostic_nl;
    let mut rng = instance_rng(15);
    let mut outcomes = Vec::new();
    for case in 0..INSTANCES {
        let n = rng.random_range(2..2500);
        let omega = random_omega(&mut rng, n);
        let lambda = random_lambda(&mut rng, n);
        let d = rng.random_range(1.0..4.0);
        let got = diagnostic_nl(&omega, &lambda, d, n).map_err(|e| e.to_string())?;
        let want = brute_nl(&omega.values(n).unwrap(), &lambda.values(n).unwrap(), d, n);
        if got != want {
            return Err(format!("diagnostic_nl instance {case}: got {got}, want {want}"));
        }
        outcomes.push(got);
    }
    require_variety("diagnostic_nl", &outcomes)
}

// ----------------------------------------------------------------------------
// Simulator fidelity

pub fn fidelity_operator() -> OperatorSpec {
    npiv_core::make_operator(Decay::Polynomial { a: 1.0 }, 64).unwrap()
}

fn chi_square_uniform(values: impl Iterator<Item = f64>, bins: usize) -> f64 {
    let mut counts = vec![0usize; bins];
    let mut n = 0usize;
    for v in values {
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
        n += 1;
    }
    let expected = n as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    ChiSquared::new((bins - 1) as f64).unwrap().sf(stat)
}

pub fn check_uniform_marginals() -> Check {
    let pairs = sample_joint(&fidelity_operator(), 100_000, 2024);
    let pz = chi_square_uniform(pairs.iter().map(|p| p.0), 20);
    let pw = chi_square_uniform(pairs.iter().map(|p| p.1), 20);
    if pz > 0.001 && pw > 0.001 {
        Ok(())
    } else {
        Err(format!("chi-square p-values z = {pz:.2e}, w = {pw:.2e}"))
    }
}

/// Passes when `T̂` is within `4/√n` of `diag(t)` for `j, l ≤ 10` on at least 19 of 20 seeds.
pub fn check_operator_is_diagonal() -> Check {
    let op = fidelity_operator();
    let n = 20_000;
    let tol = 4.0 / (n as f64).sqrt();
    let mut passes = 0;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let pairs = sample_joint(&op, n, 100 + seed);
        let rows: Vec<(f64, f64, f64)> = pairs.iter().map(|&(z, w)| (0.0, z, w)).collect();
        let sample = Sample::from_rows(&rows).unwrap();
        let m = npiv_core::empirical_operator_matrix(&sample, 10).unwrap();
        let mut dev = 0.0f64;
        for l in 0..10 {
            for j in 0..10 {
                let target = if l == j { op.coefficient(j + 1) } else { 0.0 };
                dev = dev.max((m[(l, j)] - target).abs());
            }
        }
        worst = worst.max(dev);
        if dev <= tol {
            passes += 1;
        }
    }
    if passes >= 19 {
        Ok(())
    } else {
        Err(format!("{passes}/20 seeds within {tol:.4}; worst deviation {worst:.4}"))
    }
}

/// Midpoint rule on an `m × m` grid, exact for the trigonometric terms of the density.
pub fn density_integral(op: &OperatorSpec, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    let mut total = 0.0;
    for a in 0..m {
        let z = (a as f64 + 0.5) * h;
        let mut row = 0.0;
        for b in 0..m {
            row += op.density(z, (b as f64 + 0.5) * h);
        }
        total += row;
    }
    total * h * h
}

pub fn check_density_integrates_to_one() -> Check {
    for op in [
        fidelity_operator(),
        npiv_core::make_operator(Decay::Exponential { a: 0.5 }, 5).unwrap(),
        npiv_core::make_operator(Decay::Polynomial { a: 1.0 }, 5).unwrap(),
    ] {
        let total = density_integral(&op, 400);
        if (total - 1.0).abs() > 1e-6 {
            return Err(format!("density of J = {} integrates to {total}", op.truncation));
        }
    }
    Ok(())
}

// ----------------------------------------------------------------------------
// Invariants

/// Largest deviation of `∫ψ_jψ_l` from `δ_jl` over `j, l ≤ count`, by the midpoint rule.
pub fn orthonormality_error(count: usize, points: usize) -> f64 {
    let h = 1.0 / points as f64;
    let values: Vec<Vec<f64>> =
        (0..points).map(|i| (1..=count).map(|j| trig_eval(j, (i as f64 + 0.5) * h).unwrap()).collect()).collect();
    let mut worst = 0.0f64;
    for j in 0..count {
        for l in 0..count {
            let integral: f64 = values.iter().map(|v| v[j] * v[l]).sum::<f64>() * h;
            let target = if j == l { 1.0 } else { 0.0 };
            worst = worst.max((integral - target).abs());
        }
    }
    worst
}

pub fn check_orthonormality() -> Check {
    let err = orthonormality_error(20, 10_000);
    if err <= 1e-8 {
        Ok(())
    } else {
        Err(format!("orthonormality error {err:.3e}"))
    }
}

pub fn invariant_samples() -> Vec<Sample> {
    let phi = npiv_core::make_structural(2.0, 1.0, 50, npiv_core::Profile::CenteredPowerLaw).unwrap();
    let mut out = Vec::new();
    for (decay, j, n, seed) in [
        (Decay::Polynomial { a: 1.0 }, 5, 2000, 1u64),
        (Decay::Polynomial { a: 1.0 }, 5, 500, 2),
        (Decay::Exponential { a: 0.5 }, 5, 4000, 3),
        (Decay::Polynomial { a: 0.5 }, 8, 3000, 4),
        (Decay::Polynomial { a: 1.0 }, 64, 1000, 5),
    ] {
        let op = npiv_core::make_operator(decay, j).unwrap();
        out.push(npiv_core::generate_sample(&phi, &op, 0.2, n, seed).unwrap());
    }
    out
}

pub fn invariant_omegas() -> Vec<WeightSequence> {
    vec![WeightSequence::Constant, WeightSequence::derivative(1), WeightSequence::sobolev(0.5).unwrap()]
}

/// Diagonal estimates are nested: `φ̂_k` is the first `k` coordinates of `φ̂_{k+1}`
/// whenever both pass the guard.
pub fn check_diagonal_nesting() -> Check {
    for (i, sample) in invariant_samples().iter().enumerate() {
        let big = npiv_core::diagonal_estimate(sample, 12).map_err(|e| e.to_string())?;
        for k in 1..12 {
            let small = npiv_core::diagonal_estimate(sample, k).map_err(|e| e.to_string())?;
            if small.thresholded {
                continue;
            }
            let next = npiv_core::diagonal_estimate(sample, k + 1).map_err(|e| e.to_string())?;
            if !next.thresholded && next.coeffs.as_slice()[..k] != *small.coeffs.as_slice() {
                return Err(format!("sample {i}: k = {k} is not a prefix of k + 1"));
            }
            if !big.thresholded && big.coeffs.as_slice()[..k] != *small.coeffs.as_slice() {
                return Err(format!("sample {i}: k = {k} is not a prefix of k = 12"));
            }
        }
    }
    Ok(())
}

pub fn check_scale_invariance() -> Check {
    for (i, sample) in invariant_samples().iter().enumerate() {
        for omega in invariant_omegas() {
            let base = npiv_core::penalized_select(sample, &omega, 0.25).map_err(|e| e.to_string())?;
            for c in [0.5, 2.0, 8.0, -1.0] {
                let scaled = npiv_core::penalized_select(&sample.scaled(c), &omega, 0.25).map_err(|e| e.to_string())?;
                if scaled.k_hat != base.k_hat {
                    return Err(format!("sample {i}, ω = {omega}, c = {c}: k̂ {} became {}", base.k_hat, scaled.k_hat));
                }
            }
        }
    }
    Ok(())
}

/// `k̂` is the first minimizer of a criterion recomputed from scratch for every `k`.
pub fn check_trace_minimum() -> Check {
    for (i, sample) in invariant_samples().iter().enumerate() {
        for omega in invariant_omegas() {
            for pc in [0.1, 0.25, 1.0, 540.0] {
                let trace = npiv_core::penalized_select(sample, &omega, pc).map_err(|e| e.to_string())?;
                let criterion = brute_criterion(sample, &omega, pc, trace.n_hat);
                if criterion != trace.criterion {
                    return Err(format!("sample {i}, ω = {omega}, c = {pc}: criterion differs"));
                }
                let min = criterion.iter().cloned().fold(f64::INFINITY, f64::min);
                let first = criterion.iter().position(|v| *v == min).unwrap() + 1;
                if first != trace.k_hat {
                    return Err(format!("sample {i}: k̂ = {} but first minimizer is {first}", trace.k_hat));
                }
            }
        }
    }
    Ok(())
}

/// `−‖φ̂_k‖²_ω + c Ê[Y²] δ̂_k / n` for `k = 1..n_hat`, each `k` from scratch.
pub fn brute_criterion(sample: &Sample, omega: &WeightSequence, pc: f64, n_hat: usize) -> Vec<f64> {
    let n = sample.len();
    let nf = n as f64;
    let ey2 = sample.y().iter().map(|y| y * y).sum::<f64>() / nf;
    let om = omega.values(n_hat).unwrap();
    (1..=n_hat)
        .map(|k| {
            let diag: Vec<f64> = (1..=k).map(|j| brute_diagonal_entry(sample, j)).collect();
            let ok = diag.iter().all(|t| t * t >= 1.0 / nf);
            let rhs: Vec<f64> = (1..=k)
                .map(|l| {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += sample.y()[i] * trig_eval(l, sample.w()[i]).unwrap();
                    }
                    acc / nf
                })
                .collect();
            let mut contrast = 0.0;
            if ok {
                for j in 0..k {
                    let c = rhs[j] / diag[j];
                    contrast += om[j] * c * c;
                }
            }
            let delta = if ok {
                let seq = brute_known(&om, &diag.iter().map(|t| t * t).collect::<Vec<_>>(), k);
                seq.delta[k - 1]
            } else {
                0.0
            };
            -contrast + pc * ey2 * delta / nf
        })
        .collect()
}

/// Risk equals the quadrature of the squared error, for the function itself and,
/// through the derivative coefficient map, for its first two derivatives.
pub fn check_parseval() -> Check {
    use npiv_core::estimator::{derivative_of, risk_against};
    let phi = npiv_core::make_structural(2.0, 1.0, 30, npiv_core::Profile::CenteredPowerLaw).unwrap();
    for (i, sample) in invariant_samples().iter().enumerate() {
        for k in [1usize, 2, 3, 4, 7] {
            let est = npiv_core::diagonal_estimate(sample, k).map_err(|e| e.to_string())?;
            let risk =
                npiv_core::risk_weighted(&est, &phi, &WeightSequence::Constant, 30).map_err(|e| e.to_string())?;
            let quad = squared_error_quadrature(est.coeffs.as_slice(), phi.b.as_slice(), 0, 4096);
            relative_match(risk, quad).map_err(|m| format!("sample {i}, k = {k}: {m}"))?;
            for s in [1u32, 2] {
                let de = derivative_of(&est.coeffs, s);
                let dt = derivative_of(phi.coefficients(), s);
                let risk = risk_against(&de, &dt, &WeightSequence::Constant, 31).map_err(|e| e.to_string())?;
                let quad = squared_error_quadrature(est.coeffs.as_slice(), phi.b.as_slice(), s, 4096);
                relative_match(risk, quad).map_err(|m| format!("sample {i}, k = {k}, s = {s}: {m}"))?;
            }
        }
    }
    Ok(())
}

fn relative_match(a: f64, b: f64) -> Check {
    if ((a - b) / b).abs() <= 1e-6 {
        Ok(())
    } else {
        Err(format!("risk {a} vs quadrature {b}"))
    }
}

/// `∫₀¹ (f⁽ˢ⁾ − g⁽ˢ⁾)²` for trigonometric series, differentiating each basis term analytically.
pub fn squared_error_quadrature(f: &[f64], g: &[f64], s: u32, points: usize) -> f64 {
    let len = f.len().max(g.len());
    let coeff = |v: &[f64], j: usize| v.get(j - 1).copied().unwrap_or(0.0);
    let h = 1.0 / points as f64;
    let mut total = 0.0;
    for i in 0..points {
        let x = (i as f64 + 0.5) * h;
        let mut diff = 0.0;
        for j in 1..=len {
            diff += (coeff(f, j) - coeff(g, j)) * basis_derivative(j, s, x);
        }
        total += diff * diff;
    }
    total * h
}

fn basis_derivative(j: usize, s: u32, x: f64) -> f64 {
    if j == 1 {
        return if s == 0 { 1.0 } else { 0.0 };
    }
    let m = (j / 2) as f64;
    let w = 2.0 * PI * m;
    let phase = w * x + if j % 2 == 0 { PI / 2.0 } else { 0.0 };
    std::f64::consts::SQRT_2 * w.powi(s as i32) * (phase + s as f64 * PI / 2.0).sin()
}
