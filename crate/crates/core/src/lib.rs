//! Anisotropic quasi-metric geometry, rough-kernel integral operators and
//! their multilinear commutators, parabolic local Morrey/Campanato norms,
//! weight admissibility conditions, and a desk-scale verification harness
//! that measures the empirical constants of the corresponding inequalities.

pub mod anisotropy;
pub mod cli;
pub mod conditions;
pub mod error;
pub mod field;
pub mod harness;
pub mod kernel;
pub mod operators;
pub mod polar;
pub mod quad;
pub mod report;
pub mod rng;
pub mod spaces;

pub use anisotropy::{AngularResolution, AngularRule, AnisotropicStructure};
pub use conditions::{
    check_condition, essinf_grid, esssup_grid, power_pair, tail_essinf, ConditionParams,
    ConditionReport, ConditionVariant,
};
pub use error::{Error, Result};
pub use field::{integrate_ellipsoid, lp_norm_ellipsoid, lp_norm_profile, FieldSpec, ScalarField, Smoothness};
pub use harness::{run_experiment, CheckKind, Experiment, ExperimentConfig};
pub use kernel::{KernelSpec, RoughKernel};
pub use operators::{
    commutator, dominating, fractional_integral, maximal, singular_integral, OperatorSpec,
    OperatorSpecConfig,
};
pub use polar::{EllipsoidHint, PolarQuad, QuadConfig};
pub use report::{CaseResult, VerificationReport};
pub use spaces::{
    campanato_norm, ellipsoid_mean, morrey_norm, RadialWeight, RadiusGrid, WeightSpec,
};
