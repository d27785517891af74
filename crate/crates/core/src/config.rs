//! JSON configuration shared by the simulation and rate-study commands.
//!
//! A configuration is one document with the sections `structural`, `operator`,
//! `noise`, `selection` and `study`. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::WeightSequence;
use crate::error::{Error, Result};
use crate::selection::DEFAULT_PENALTY_CONST;
use crate::simulate::{make_operator, make_structural, noise_sd, Decay, OperatorSpec, Profile, StructuralSpec};

pub const DEFAULT_OPERATOR_TRUNCATION: usize = 64;
pub const DEFAULT_STRUCTURAL_TRUNCATION: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub structural: StructuralConfig,
    pub operator: OperatorConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub study: StudySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralConfig {
    pub p: f64,
    pub rho: f64,
    #[serde(rename = "J_phi", default = "default_structural_truncation")]
    pub truncation: usize,
    #[serde(default = "default_profile")]
    pub profile: Profile,
}

impl StructuralConfig {
    pub fn build(&self) -> Result<StructuralSpec> {
        make_structural(self.p, self.rho, self.truncation, self.profile.clone())
    }
}

/// Either a decay with truncation `J`, or explicit coefficients `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub decay: Decay,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
}

impl OperatorConfig {
    pub fn build(&self) -> Result<OperatorSpec> {
        match &self.t {
            Some(t) => {
                if let Some(j) = self.truncation {
                    if j != t.len() {
                        return Err(Error::Config(format!(
                            "operator J = {j} disagrees with {} explicit coefficients",
                            t.len()
                        )));
                    }
                }
                OperatorSpec::with_coefficients(self.decay, t.clone())
            }
            None => make_operator(self.decay, self.truncation.unwrap_or(DEFAULT_OPERATOR_TRUNCATION)),
        }
    }
}

/// Noise level: `sigma` directly, or `snr = sd(φ(Z)) / sd(U)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
}

impl NoiseConfig {
    /// The `σ` of the noise class, with `sd(U) = σ / 3^{1/4}`.
    pub fn sigma_for(&self, phi: &StructuralSpec) -> Result<f64> {
        let sigma = match (self.sigma, self.snr) {
            (Some(s), None) => s,
            (None, Some(snr)) => {
                if !(snr > 0.0 && snr.is_finite()) {
                    return Err(Error::Config(format!("snr must be positive, got {snr}")));
                }
                let sd_phi = signal_sd(phi);
                if sd_phi == 0.0 {
                    return Err(Error::Config("snr is undefined for a constant structural function".into()));
                }
                sd_phi / snr / noise_sd(1.0)
            }
            _ => return Err(Error::Config("noise needs exactly one of `sigma` or `snr`".into())),
        };
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(sigma)
    }
}

/// Standard deviation of `φ(Z)` for uniform `Z`.
pub fn signal_sd(phi: &StructuralSpec) -> f64 {
    phi.b.as_slice()[1..].iter().map(|b| b * b).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    #[serde(default = "default_omega")]
    pub omega: WeightSequence,
    #[serde(default = "default_penalty")]
    pub penalty_const: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { omega: default_omega(), penalty_const: default_penalty() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_structural_truncation() -> usize {
    DEFAULT_STRUCTURAL_TRUNCATION
}

fn default_profile() -> Profile {
    Profile::PowerLaw
}

fn default_omega() -> WeightSequence {
    WeightSequence::Constant
}

fn default_penalty() -> f64 {
    DEFAULT_PENALTY_CONST
}

/// A configuration with every object constructed and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub structural: StructuralSpec,
    pub operator: OperatorSpec,
    pub sigma: f64,
    pub omega: WeightSequence,
    pub penalty_const: f64,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn build(&self) -> Result<Model> {
        let structural = self.structural.build()?;
        let operator = self.operator.build()?;
        let sigma = self.noise.sigma_for(&structural)?;
        let penalty_const = self.selection.penalty_const;
        if !(penalty_const > 0.0 && penalty_const.is_finite()) {
            return Err(Error::Config(format!("penalty_const must be positive, got {penalty_const}")));
        }
        Ok(Model { structural, operator, sigma, omega: self.selection.omega.clone(), penalty_const })
    }
}
