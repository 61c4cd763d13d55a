//! Minimax structure of extended-real payoffs on finite metric spaces, and
//! explicit perturbations that create (well-posed) saddle points.
//!
//! - [`space`]: finite metric spaces, interval grids, separating functions.
//! - [`minimax`]: value functions, duality gap, saddle and ε-saddle points.
//! - [`perturb`]: perturbation constructions with verified postconditions.
//! - [`wellposed`]: sequence checks, ε-saddle moduli, solution-map probes.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod ext;
pub mod minimax;
pub mod perturb;
pub mod space;
pub mod wellposed;

pub use error::{Error, MetricViolation, Result};
pub use minimax::{BiFunction, Gap, MinimaxSummary, SaddleCertificate};
pub use perturb::{Perturbation, PerturbationPair};
pub use space::{GridSpec, MetricSpace, ScalarField};

/// Default absolute tolerance for derived (summed) quantities.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
