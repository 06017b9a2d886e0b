//! Sampling-set selection and Bayesian interpolation of bandlimited graph
//! signals.
//!
//! A signal `x = V_K x̄_K` lives in the span of a few eigenvectors of a real
//! symmetric shift operator. Noisy samples `y_S` are taken on a node subset
//! `S` and the linear minimum-MSE interpolator recovers `z = H x`. The crate
//! provides:
//!
//! * [`graphs`]: random graph models and the graph Fourier basis,
//! * [`signals`]: signal/noise priors and seeded draws,
//! * [`interp`]: the optimal interpolator, its error covariance and MSE,
//! * [`bounds`]: set-independent MSE bounds and sample-count bounds,
//! * [`samplers`]: greedy selection with rank-one updates, exhaustive search
//!   and randomized/deterministic baselines,
//! * [`alpha`]: exact and bounded approximate supermodularity of the MSE,
//! * [`kpca`]: kernel PCA projections computed from a sampled subset.
//!
//! Everything that is random takes an explicit `u64` seed.

pub mod alpha;
pub mod bounds;
mod error;
pub mod graphs;
pub mod interp;
pub mod kpca;
mod linalg;
pub mod rng;
pub mod samplers;
pub mod signals;

pub use error::{Error, Result};
