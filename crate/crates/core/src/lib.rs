//! Numerical toolkit for random point fields arising from Gaussian
//! beta-ensembles: sampling, correlation estimation, interaction algebra,
//! condition diagnostics and infinite-dimensional SDE simulation.

// `!(x > 0.0)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod condition_checker;
pub mod config_space;
pub mod dynamics;
pub mod ensembles;
pub mod error;
pub mod estimator;
pub mod interactions;
pub mod linalg;
pub mod rng;
pub mod special_fns;
pub mod stats;

pub use condition_checker::{CompensatorModel, ConditionReport};
pub use config_space::{AnnulusSequence, Configuration, Shell, Window, WindowKind};
pub use ensembles::{EnsembleSpec, SamplerMethod, ScalingKind};
pub use error::{Error, Result};
pub use estimator::{BinnedEstimate, Bins, DeviationReport};
pub use interactions::{CompensatorSequence, PotentialPair};
pub use special_fns::KernelKind;
