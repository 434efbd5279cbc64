//! The concrete sampling targets: an importance-sampling toy, the Gaussian
//! mixture posterior, and a factor stochastic volatility state-space model,
//! plus a linear-Gaussian surrogate used to validate the particle filter.

mod fsv;
mod linalg;
mod linear_gaussian;
mod mixture;
mod toy;

pub use fsv::FsvParams;
pub use linear_gaussian::LinearGaussianSsm;
pub use mixture::{simulate_mixture_data, MixtureModel, MixturePosterior, MAX_COMPONENTS};
pub use toy::{log_standard_normal, toy_log_target};

use crate::prng::Stream;
use crate::scalar::Scalar;

/// A pointwise-evaluable unnormalized log-density together with the
/// distribution runs start from (the prior for posteriors, and in general
/// whatever plays the role of the flattest tempered distribution).
///
/// `log_density` must be deterministic, side-effect free, and return either a
/// finite value or -inf, never NaN, for finite input.
pub trait TargetDistribution<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[T]) -> T;
    fn sample_prior(&self, stream: &mut Stream<T>) -> Vec<T>;
}

/// A state-space model for particle filtering: initial state sampler, Markov
/// transition sampler and pointwise observation log-density.
pub trait StateSpaceModel<T: Scalar>: Sync {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn sample_initial(&self, stream: &mut Stream<T>) -> Vec<T>;
    /// Draws `next ~ f(.|prev)` into the provided buffer, consuming a fixed
    /// number of normals per call.
    fn sample_transition(&self, prev: &[T], next: &mut [T], stream: &mut Stream<T>);
    fn log_obs_density(&self, state: &[T], obs: &[T]) -> T;
}
