//! Projection estimators for nonparametric instrumental regression.
//!
//! The model is `Y = φ(Z) + U` with `E[U | W] = 0`, so the structural function
//! solves `E[Y | W] = Tφ` for the conditional expectation operator `T`.
//! Working in the trigonometric basis on `[0, 1]`, the crate provides
//!
//! - [`basis`]: basis evaluation, weight sequences and weighted norms;
//! - [`estimator`]: empirical Galerkin systems, the thresholded least-squares
//!   estimator and its diagonal form, derivatives and weighted risk;
//! - [`selection`]: penalty sequences, dimension bounds, the penalized choice
//!   of the dimension and the oracle dimension;
//! - [`simulate`]: joint distributions with an exactly diagonal operator and
//!   reproducible model samples;
//! - [`config`] and [`study`]: JSON configuration and the Monte Carlo rate study.

pub mod basis;
pub mod config;
pub mod error;
pub mod estimator;
pub mod sample;
pub mod selection;
pub mod simulate;
pub mod study;

pub use basis::{ellipsoid_norm_check, trig_eval, weighted_norm_sq, CoefficientVector, WeightSequence};
pub use error::{Error, Result};
pub use estimator::{
    derivative_coeffs, diagonal_estimate, empirical_operator_matrix, empirical_rhs, evaluate_estimate,
    galerkin_estimate, risk_weighted, EstimatorMode, GalerkinEstimate,
};
pub use sample::Sample;
pub use selection::{
    diagnostic_nl, dimension_bound_known, empirical_dimension_bound, empirical_sequences, estimate_ey2,
    known_sequences, oracle_kstar, penalized_select, DimensionBound, OracleDimension, PenaltySequences, SelectionTrace,
    DEFAULT_PENALTY_CONST,
};
pub use simulate::{
    generate_sample, make_operator, make_structural, sample_joint, true_g_coeffs, Decay, OperatorSpec, Profile,
    StructuralSpec,
};
pub use study::{run_rate_study, GridSummary, RateStudyReport, ReplicationRecord, StudyPlan};
