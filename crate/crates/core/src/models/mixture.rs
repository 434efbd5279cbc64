//! Univariate Gaussian mixture with known component count, weights and
//! variance, and the posterior over the component means under a uniform
//! hypercube prior. The posterior is invariant to permutations of the mean
//! labels, which gives it k! symmetric modes; that multimodality is what the
//! population samplers are exercised on.

use crate::error::{Error, Result};
use crate::prng::Stream;
use crate::scalar::Scalar;

use super::TargetDistribution;

/// Upper bound on the component count; keeps the likelihood hot path on
/// stack buffers.
pub const MAX_COMPONENTS: usize = 16;

/// Mixture with `k` components of common standard deviation `sigma` and
/// common weight `1/k`, a uniform prior on `[-bound, bound]^k` for the means,
/// and a fixed observation vector.
#[derive(Clone, Debug)]
pub struct MixtureModel<T> {
    k: usize,
    sigma: T,
    bound: T,
    observations: Vec<T>,
}

impl<T: Scalar> MixtureModel<T> {
    pub fn new(k: usize, sigma: T, bound: T, observations: Vec<T>) -> Result<Self> {
        if k == 0 || k > MAX_COMPONENTS {
            return Err(Error::InvalidModel(format!(
                "component count {k} outside 1..={MAX_COMPONENTS}"
            )));
        }
        if !(sigma > T::zero()) {
            return Err(Error::InvalidModel("sigma must be positive".into()));
        }
        if !(bound > T::zero()) {
            return Err(Error::InvalidModel("prior bound must be positive".into()));
        }
        if observations.is_empty() {
            return Err(Error::InvalidModel("need at least one observation".into()));
        }
        if observations.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidModel("observations must be finite".into()));
        }
        Ok(MixtureModel {
            k,
            sigma,
            bound,
            observations,
        })
    }

    pub fn component_count(&self) -> usize {
        self.k
    }

    pub fn observations(&self) -> &[T] {
        &self.observations
    }

    /// Unnormalized log-posterior of the mean vector: the log-likelihood on
    /// `[-bound, bound]^k` and -inf outside.
    ///
    /// The per-observation mixture is evaluated in the log domain with a
    /// max-shifted sum of exponentials. The shifted terms are accumulated in
    /// descending order (after an ascending sort of the squared distances),
    /// which makes the value exactly invariant under permutations of `mu`;
    /// terms too small to move the sum by half an ulp are dropped. The
    /// per-observation factors are multiplied together and the log is taken
    /// per batch rather than per observation.
    pub fn log_posterior(&self, mu: &[T]) -> T {
        let k = self.k;
        assert_eq!(mu.len(), k, "mean vector has wrong dimension");
        for &m in mu {
            if !(m.abs() <= self.bound) {
                return T::neg_infinity();
            }
        }
        let inv2s2 = T::one() / (T::two() * self.sigma * self.sigma);
        // exp(-e) with e above this cannot change a sum that is >= 1.
        let cutoff = -(T::epsilon() * T::half()).ln();
        let flush = T::max_value().sqrt();

        let mut d = [T::zero(); MAX_COMPONENTS];
        let mut sum_min_sq = T::zero();
        let mut product = T::one();
        let mut log_product = T::zero();
        for &y in &self.observations {
            for i in 0..k {
                let t = y - mu[i];
                d[i] = t * t;
            }
            sort_ascending(&mut d[..k]);
            sum_min_sq += d[0];
            let mut s = T::one();
            for &di in &d[1..k] {
                let e = (di - d[0]) * inv2s2;
                if e > cutoff {
                    break;
                }
                s = s + (-e).exp();
            }
            product = product * s;
            if product > flush {
                log_product += product.ln();
                product = T::one();
            }
        }
        log_product += product.ln();

        let m = T::from_usize(self.observations.len()).expect("observation count fits scalar");
        let weight = T::one() / T::from_usize(k).expect("component count fits scalar");
        let log_component_norm = (weight / (self.sigma * (T::two() * T::PI()).sqrt())).ln();
        m * log_component_norm - inv2s2 * sum_min_sq + log_product
    }
}

/// Ascending sort of a small distance buffer; a branch-free network for the
/// common four-component case, insertion sort otherwise. Values are finite
/// squared distances, so plain comparisons are total here.
#[inline]
fn sort_ascending<T: Scalar>(d: &mut [T]) {
    #[inline]
    fn compare_swap<T: Scalar>(d: &mut [T], a: usize, b: usize) {
        let lo = d[a].min(d[b]);
        let hi = d[a].max(d[b]);
        d[a] = lo;
        d[b] = hi;
    }
    if d.len() == 4 {
        compare_swap(d, 0, 1);
        compare_swap(d, 2, 3);
        compare_swap(d, 0, 2);
        compare_swap(d, 1, 3);
        compare_swap(d, 1, 2);
    } else {
        for i in 1..d.len() {
            let mut j = i;
            while j > 0 && d[j - 1] > d[j] {
                d.swap(j - 1, j);
                j -= 1;
            }
        }
    }
}

/// Draws `m` observations from the mixture with the given true means: a
/// uniformly chosen component plus `N(0, sigma^2)` noise. Consumes one
/// uniform and one gaussian per observation.
pub fn simulate_mixture_data<T: Scalar>(
    true_mu: &[T],
    m: usize,
    sigma: T,
    stream: &mut Stream<T>,
) -> Vec<T> {
    let k = true_mu.len();
    let kf = T::from_usize(k).expect("component count fits scalar");
    (0..m)
        .map(|_| {
            let u = stream.next_uniform();
            let idx = ((u * kf).to_usize().unwrap_or(0)).min(k - 1);
            true_mu[idx] + sigma * stream.next_gaussian()
        })
        .collect()
}

/// The mixture-mean posterior as a sampling target; the prior is uniform on
/// the hypercube and doubles as the flattest tempered distribution.
#[derive(Clone, Debug)]
pub struct MixturePosterior<T> {
    model: MixtureModel<T>,
}

impl<T: Scalar> MixturePosterior<T> {
    pub fn new(model: MixtureModel<T>) -> Self {
        MixturePosterior { model }
    }

    pub fn model(&self) -> &MixtureModel<T> {
        &self.model
    }
}

impl<T: Scalar> TargetDistribution<T> for MixturePosterior<T> {
    fn dim(&self) -> usize {
        self.model.k
    }

    fn log_density(&self, x: &[T]) -> T {
        self.model.log_posterior(x)
    }

    fn sample_prior(&self, stream: &mut Stream<T>) -> Vec<T> {
        (0..self.model.k)
            .map(|_| (T::two() * stream.next_uniform() - T::one()) * self.model.bound)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::{make_streams, GeneratorKind, DEFAULT_BLOCK_LEN};

    fn test_stream() -> Stream<f64> {
        make_streams(GeneratorKind::Mrg32k3a, 99, 1, DEFAULT_BLOCK_LEN)
            .unwrap()
            .pop()
            .unwrap()
    }

    fn default_model() -> MixtureModel<f64> {
        let mut stream = test_stream();
        let data = simulate_mixture_data(&[-3.0, 0.0, 3.0, 6.0], 100, 0.55, &mut stream);
        MixtureModel::new(4, 0.55, 10.0, data).unwrap()
    }

    /// Naive per-observation double loop over components, the independent
    /// oracle for the optimized likelihood.
    fn naive_log_posterior(model: &MixtureModel<f64>, mu: &[f64]) -> f64 {
        if mu.iter().any(|m| m.abs() > 10.0) {
            return f64::NEG_INFINITY;
        }
        let sigma = 0.55f64;
        let mut total = 0.0;
        for &y in model.observations() {
            let mut density = 0.0;
            for &m in mu {
                let z = (y - m) / sigma;
                density += 0.25 * (-0.5 * z * z).exp()
                    / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            }
            total += density.ln();
        }
        total
    }

    #[test]
    fn matches_naive_oracle_at_the_true_means() {
        let model = default_model();
        let mu = [-3.0, 0.0, 3.0, 6.0];
        let got = model.log_posterior(&mu);
        let want = naive_log_posterior(&model, &mu);
        assert!(
            (got - want).abs() <= 1e-10 * want.abs(),
            "got {got}, want {want}"
        );
    }

    #[test]
    fn matches_naive_oracle_at_random_points() {
        let model = default_model();
        let mut stream = test_stream();
        for _ in 0..200 {
            let mu: Vec<f64> = (0..4).map(|_| stream.next_uniform() * 16.0 - 8.0).collect();
            let got = model.log_posterior(&mu);
            let want = naive_log_posterior(&model, &mu);
            assert!(
                (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                "mu {mu:?}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn out_of_prior_support_is_neg_infinity() {
        let model = default_model();
        assert_eq!(
            model.log_posterior(&[10.5, 0.0, 0.0, 0.0]),
            f64::NEG_INFINITY
        );
        assert_eq!(
            model.log_posterior(&[0.0, 0.0, -11.0, 0.0]),
            f64::NEG_INFINITY
        );
        assert!(model.log_posterior(&[10.0, -10.0, 0.0, 0.0]).is_finite());
    }

    #[test]
    fn exactly_permutation_invariant() {
        let model = default_model();
        let mu = [-2.9, 0.3, 3.2, 5.8];
        let reference = model.log_posterior(&mu);
        let mut indices = [0usize, 1, 2, 3];
        // All 24 permutations via a simple recursion-free enumeration.
        let mut perms = Vec::new();
        heap_permutations(&mut indices, 4, &mut perms);
        assert_eq!(perms.len(), 24);
        for perm in perms {
            let permuted: Vec<f64> = perm.iter().map(|&i| mu[i]).collect();
            assert_eq!(model.log_posterior(&permuted), reference, "perm {perm:?}");
        }
    }

    fn heap_permutations(items: &mut [usize; 4], n: usize, out: &mut Vec<[usize; 4]>) {
        if n == 1 {
            out.push(*items);
            return;
        }
        for i in 0..n {
            heap_permutations(items, n - 1, out);
            if n % 2 == 0 {
                items.swap(i, n - 1);
            } else {
                items.swap(0, n - 1);
            }
        }
    }

    #[test]
    fn never_nan_for_finite_input() {
        let model = default_model();
        let mut stream = test_stream();
        for _ in 0..500 {
            let mu: Vec<f64> = (0..4)
                .map(|_| stream.next_uniform() * 40.0 - 20.0)
                .collect();
            let v = model.log_posterior(&mu);
            assert!(!v.is_nan(), "mu {mu:?}");
        }
    }

    #[test]
    fn degenerate_noise_yields_exact_component_values() {
        let mut stream = test_stream();
        let data = simulate_mixture_data(&[-3.0, 0.0, 3.0, 6.0], 200, 0.0, &mut stream);
        for y in data {
            assert!([-3.0, 0.0, 3.0, 6.0].contains(&y), "y = {y}");
        }
    }

    #[test]
    fn simulated_data_mean_is_near_the_mixture_mean() {
        // Mixture mean 1.5, sd ~3.3989; tolerance 4 sd / sqrt(m).
        let mut stream = test_stream();
        let data = simulate_mixture_data(&[-3.0, 0.0, 3.0, 6.0], 100, 0.55, &mut stream);
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        assert!((mean - 1.5).abs() < 4.0 * 3.3989 / 10.0, "mean {mean}");
    }

    #[test]
    fn simulation_is_reproducible() {
        let mut a = test_stream();
        let mut b = test_stream();
        let da = simulate_mixture_data(&[-3.0, 0.0, 3.0, 6.0], 50, 0.55, &mut a);
        let db = simulate_mixture_data(&[-3.0, 0.0, 3.0, 6.0], 50, 0.55, &mut b);
        assert_eq!(da, db);
    }

    #[test]
    fn prior_samples_stay_in_the_hypercube() {
        let model = default_model();
        let target = MixturePosterior::new(model);
        let mut stream = test_stream();
        for _ in 0..100 {
            let x = target.sample_prior(&mut stream);
            assert_eq!(x.len(), 4);
            assert!(x.iter().all(|v| v.abs() < 10.0));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MixtureModel::new(0, 0.55, 10.0, vec![1.0]).is_err());
        assert!(MixtureModel::new(4, 0.0, 10.0, vec![1.0]).is_err());
        assert!(MixtureModel::new(4, 0.55, 0.0, vec![1.0]).is_err());
        assert!(MixtureModel::new(4, 0.55, 10.0, vec![]).is_err());
        assert!(MixtureModel::new(4, 0.55, 10.0, vec![f64::NAN]).is_err());
        assert!(MixtureModel::new(17, 0.55, 10.0, vec![1.0]).is_err());
    }
}
