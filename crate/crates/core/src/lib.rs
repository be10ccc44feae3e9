//! Quasirandom quadratures for mean-field distributions and a sparsifying
//! mean-field variational trainer built on them.
//!
//! - [`quadrature`]: cross-polytope sign sequences, simplex sigma points,
//!   blocked quadratures and Monte Carlo baselines.
//! - [`meanfield`]: Gaussian, Laplace and spike-and-slab mean-fields.
//! - [`projection`]: per-case diagonal quadratic fits from gradients.
//! - [`trainer`]: the epoch loop, restarted sums and sieve.
//! - [`models`]: loss models and dataset I/O.

pub mod error;
pub mod meanfield;
pub mod models;
pub mod projection;
pub mod quadrature;
pub mod trainer;

pub use error::{Error, Result};
pub use meanfield::{DiracGaussMF, GaussianMF, LaplaceMF, Marginal, MeanField, OrthonormalBasis};
pub use projection::{full_period, quadratic_approx, LossModel, QuadraticSummary};
pub use quadrature::{AntitheticPair, BlockPartition, NodeSet, PairMethod, SignVector};
pub use trainer::{TrainConfig, TrainState};
