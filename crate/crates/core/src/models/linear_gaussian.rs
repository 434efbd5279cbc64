//! One-dimensional linear-Gaussian state-space model. The filtering
//! distributions have closed Kalman forms, which makes this the reference
//! surrogate for validating the particle filter end to end.

use crate::error::{Error, Result};
use crate::prng::Stream;
use crate::scalar::Scalar;

use super::StateSpaceModel;

/// `x_t = phi x_{t-1} + N(0, q)`, `y_t = x_t + N(0, r)`,
/// `x_0 ~ N(init_mean, init_var)`.
#[derive(Clone, Copy, Debug)]
pub struct LinearGaussianSsm<T> {
    pub ar_coeff: T,
    pub process_var: T,
    pub obs_var: T,
    pub init_mean: T,
    pub init_var: T,
}

impl<T: Scalar> LinearGaussianSsm<T> {
    pub fn new(ar_coeff: T, process_var: T, obs_var: T, init_mean: T, init_var: T) -> Result<Self> {
        if !(process_var >= T::zero()) || !(obs_var > T::zero()) || !(init_var >= T::zero()) {
            return Err(Error::InvalidModel(
                "variances must be nonnegative (observation variance positive)".into(),
            ));
        }
        Ok(LinearGaussianSsm {
            ar_coeff,
            process_var,
            obs_var,
            init_mean,
            init_var,
        })
    }

    /// Stationary AR(1) surrogate used by the validation runs:
    /// phi = 0.9, q = 0.1, r = 0.5, x0 from the stationary distribution.
    pub fn default_model() -> Self {
        let f = T::from_f64_lossy;
        LinearGaussianSsm::new(f(0.9), f(0.1), f(0.5), T::zero(), f(0.1 / (1.0 - 0.81)))
            .expect("surrogate parameters are valid")
    }

    /// Simulates latent states and observations; one normal for the initial
    /// state and two per step afterwards.
    pub fn simulate(&self, steps: usize, stream: &mut Stream<T>) -> (Vec<T>, Vec<T>) {
        let mut x = self.init_mean + self.init_var.sqrt() * stream.next_gaussian();
        let mut states = Vec::with_capacity(steps);
        let mut obs = Vec::with_capacity(steps);
        for _ in 0..steps {
            x = self.ar_coeff * x + self.process_var.sqrt() * stream.next_gaussian();
            states.push(x);
            obs.push(x + self.obs_var.sqrt() * stream.next_gaussian());
        }
        (states, obs)
    }
}

impl<T: Scalar> StateSpaceModel<T> for LinearGaussianSsm<T> {
    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn sample_initial(&self, stream: &mut Stream<T>) -> Vec<T> {
        vec![self.init_mean + self.init_var.sqrt() * stream.next_gaussian()]
    }

    fn sample_transition(&self, prev: &[T], next: &mut [T], stream: &mut Stream<T>) {
        next[0] = self.ar_coeff * prev[0] + self.process_var.sqrt() * stream.next_gaussian();
    }

    fn log_obs_density(&self, state: &[T], obs: &[T]) -> T {
        let d = obs[0] - state[0];
        -(d * d / self.obs_var + (T::two() * T::PI() * self.obs_var).ln()) * T::half()
    }
}
