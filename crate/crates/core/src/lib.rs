//! Data-parallel Monte Carlo engine.
//!
//! Population MCMC with parallel tempering, tempered SMC samplers and
//! bootstrap particle filters, built on two substrates: partitioned parallel
//! random-number streams (MRG32k3a with logarithmic skip-ahead, or a seeded
//! xorshift) and deterministic tree reductions. Runs are bit-reproducible for
//! any worker count, and every sampler is generic over the floating-point
//! width so experiments can execute end to end in single or double precision.
//!
//! Module map:
//! - [`prng`]: generators, skip-ahead, substream partitioning, transforms.
//! - [`parallel`]: the worker-invariant map, pairwise reductions, weight
//!   normalization, ESS and importance-sampling estimators.
//! - [`models`]: the mixture posterior, the factor stochastic volatility
//!   model, the toy target and a linear-Gaussian surrogate.
//! - [`popmcmc`]: tempered subchains with random-walk moves plus adjacent
//!   exchange passes.
//! - [`smc`]: resampling, the tempered SMC sampler (AIS when resampling is
//!   off) and the bootstrap particle filter.
//! - [`diagnostics`]: mode assignment, traversal times, histograms, kernel
//!   density grids, estimator summaries.
//! - [`io`]: deterministic CSV reading and writing.

pub mod diagnostics;
pub mod error;
pub mod io;
pub mod models;
pub mod parallel;
pub mod popmcmc;
pub mod prng;
pub mod scalar;
pub mod smc;

pub use error::{Error, Result};
pub use parallel::PrecisionMode;
pub use prng::GeneratorKind;
pub use scalar::Scalar;

/// Double-precision aliases of the main engine types.
pub type StreamF64 = prng::Stream<f64>;
pub type ChainStateF64 = popmcmc::ChainState<f64>;
pub type WeightedPopulationF64 = smc::WeightedPopulation<f64>;

/// Single-precision aliases of the main engine types.
pub type StreamF32 = prng::Stream<f32>;
pub type ChainStateF32 = popmcmc::ChainState<f32>;
pub type WeightedPopulationF32 = smc::WeightedPopulation<f32>;
