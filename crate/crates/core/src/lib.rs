//! Gradient and diagonal-Hessian estimates from interpolation on structured
//! positive bases, with a frame-based preconditioned CG solver built on them.
//!
//! ```
//! use dfderiv::{estimate, BasisKind, SamplingScheme};
//!
//! let f = |x: &[f64]| Ok::<_, std::convert::Infallible>(x[0] * x[0] + 3.0 * x[1]);
//! let scheme = SamplingScheme::new(BasisKind::RegularMinimal, 2, 1e-3).unwrap();
//! let est = estimate(f, &[1.0, 0.0], &scheme).unwrap();
//! assert!((est.g[0] - 2.0).abs() < 1e-9);
//! assert!((est.g[1] - 3.0).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bases;
pub mod bounds;
pub mod cli;

pub mod error;
pub mod estimators;
pub mod fbpcg;
pub mod oracle;
pub mod problems;
pub mod sampling;

pub use bases::{BasisConstants, BasisKind};
pub use bounds::{gradient_bound, kappa, observed_order, ErrorBoundInput, OrderFit};
pub use error::{Error, Result};
pub use estimators::{estimate, estimate_from_samples, estimate_with, DerivativeEstimate, DiagMethod, EstimateOptions};
pub use fbpcg::{solve, solve_from, solve_with, SolverConfig, SolverResult, StopReason};
pub use problems::{lookup, registry, Objective};
pub use sampling::{sample_points, ModelOrder, SampleSet, SamplingScheme};
