//! Deterministic data-parallel execution and numerically careful reductions.
//!
//! The contract that everything else builds on: results are bit-identical for
//! every worker count. Maps are elementwise (each element sees only its own
//! state and its own substream), and every reduction uses one fixed
//! balanced-tree association determined by input length alone, so the
//! schedule can never leak into the arithmetic.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prng::Stream;
use crate::scalar::Scalar;

/// Floating-point width of a run. `Single` exists to reproduce the
/// single-precision robustness comparison; `Double` is the default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecisionMode {
    Single,
    Double,
}

impl PrecisionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrecisionMode::Single => "single",
            PrecisionMode::Double => "double",
        }
    }
}

impl std::str::FromStr for PrecisionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "f32" => Ok(PrecisionMode::Single),
            "double" | "f64" => Ok(PrecisionMode::Double),
            other => Err(Error::InvalidConfig(format!(
                "unknown precision '{other}' (expected single or double)"
            ))),
        }
    }
}

impl std::fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An ordered population of element states with one substream per element.
/// Element order is part of the data and never changes under parallel
/// execution.
#[derive(Clone, Debug)]
pub struct Population<S, T> {
    pub items: Vec<S>,
    pub streams: Vec<Stream<T>>,
}

impl<S, T: Scalar> Population<S, T> {
    pub fn new(items: Vec<S>, streams: Vec<Stream<T>>) -> Result<Self> {
        if items.len() != streams.len() {
            return Err(Error::InvalidConfig(format!(
                "population has {} items but {} substreams",
                items.len(),
                streams.len()
            )));
        }
        Ok(Population { items, streams })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Thread pools are cached per worker count so iterated kernels do not pay a
/// pool construction per call. Pool identity never affects results; it only
/// schedules independent per-element work.
fn pool(workers: usize) -> Arc<rayon::ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let map = POOLS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap_or_else(|p| p.into_inner());
    guard
        .entry(workers)
        .or_insert_with(|| {
            Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .expect("failed to build worker pool"),
            )
        })
        .clone()
}

/// Applies a pure per-element kernel to every (item, substream) pair.
///
/// The kernel must read and write only its own element and substream; under
/// that contract the result is bit-identical for every `workers` value,
/// including 1. On failure the error of the lowest-indexed failing element is
/// returned and the population contents are unspecified.
pub fn par_map<S, T, F>(pop: &mut Population<S, T>, workers: usize, kernel: &F) -> Result<()>
where
    S: Send,
    T: Scalar,
    F: Fn(&mut S, &mut Stream<T>) -> Result<()> + Sync,
{
    if pop.items.len() != pop.streams.len() {
        return Err(Error::InvalidConfig(
            "population items and substreams diverged".into(),
        ));
    }
    if workers <= 1 {
        for (index, (item, stream)) in pop.items.iter_mut().zip(pop.streams.iter_mut()).enumerate()
        {
            kernel(item, stream).map_err(|e| Error::Element {
                index,
                source: Box::new(e),
            })?;
        }
        return Ok(());
    }
    let outcome = pool(workers).install(|| {
        pop.items
            .par_iter_mut()
            .zip(pop.streams.par_iter_mut())
            .enumerate()
            .map(|(index, (item, stream))| kernel(item, stream).map_err(|e| (index, e)))
            .reduce(
                || Ok(()),
                |a, b| match (a, b) {
                    (Err(x), Err(y)) => {
                        if x.0 <= y.0 {
                            Err(x)
                        } else {
                            Err(y)
                        }
                    }
                    (Err(x), Ok(())) => Err(x),
                    (Ok(()), r) => r,
                },
            )
    });
    outcome.map_err(|(index, e)| Error::Element {
        index,
        source: Box::new(e),
    })
}

/// Elementwise map of a plain slice, bit-identical for any worker count.
pub fn par_map_values<X, Y, F>(values: &[X], workers: usize, f: F) -> Vec<Y>
where
    X: Sync,
    Y: Send,
    F: Fn(&X) -> Y + Sync + Send,
{
    if workers <= 1 {
        return values.iter().map(f).collect();
    }
    pool(workers).install(|| values.par_iter().map(f).collect())
}

/// Sum with a fixed balanced binary tree association: values are summed in
/// pairs, the pair sums in pairs and so on, a trailing odd element being
/// promoted unchanged to the next level. The tree shape depends on the input
/// length only, so any execution schedule produces the same bits, and the
/// rounding error grows like O(log N) instead of the O(N) worst case of a
/// running accumulator. Empty input sums to zero.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    match values.len() {
        0 => T::zero(),
        1 => values[0],
        _ => {
            let mut buf = values.to_vec();
            let mut n = buf.len();
            while n > 1 {
                let half = n / 2;
                for i in 0..half {
                    buf[i] = buf[2 * i] + buf[2 * i + 1];
                }
                if n % 2 == 1 {
                    buf[half] = buf[n - 1];
                }
                n = half + (n % 2);
            }
            buf[0]
        }
    }
}

/// Inclusive prefix sums sharing the association of [`pairwise_sum`]:
/// `out[i]` carries exactly the bits of `pairwise_sum(&values[..=i])`, and in
/// particular the last entry equals the pairwise sum of the whole input.
///
/// Implementation: a binary-counter stack of completed subtree sums; each
/// prefix is the right-nested fold of the stack, which is the same
/// decomposition the fixed tree induces on a prefix.
pub fn inclusive_prefix_sum<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(values.len());
    let mut stack: Vec<(u32, T)> = Vec::new();
    for &v in values {
        let mut level = 0u32;
        let mut node = v;
        while let Some(&(top_level, top)) = stack.last() {
            if top_level == level {
                stack.pop();
                node = top + node;
                level += 1;
            } else {
                break;
            }
        }
        stack.push((level, node));
        let mut blocks = stack.iter().rev();
        let mut acc = blocks.next().expect("stack nonempty").1;
        for &(_, block) in blocks {
            acc = block + acc;
        }
        out.push(acc);
    }
    out
}

/// Self-normalized weights plus the log-normalizer increment
/// `max + log(pairwise_sum(exp(lw - max))) - log N`.
#[derive(Clone, Debug)]
pub struct NormalizedWeights<T> {
    pub weights: Vec<T>,
    pub log_norm_constant_increment: T,
}

/// Exponentiates and normalizes log-weights in a max-shifted, log-domain-safe
/// way. Entries of -inf map to weight zero; a population whose weights are
/// all -inf, or contain NaN or +inf, is degenerate.
pub fn normalize_log_weights<T: Scalar>(log_weights: &[T]) -> Result<NormalizedWeights<T>> {
    if log_weights.is_empty() {
        return Err(Error::DegeneratePopulation("no weights to normalize".into()));
    }
    let mut max = T::neg_infinity();
    for &lw in log_weights {
        if lw.is_nan() {
            return Err(Error::DegeneratePopulation("NaN log-weight".into()));
        }
        if lw > max {
            max = lw;
        }
    }
    if max == T::neg_infinity() {
        return Err(Error::DegeneratePopulation(
            "all log-weights are -inf".into(),
        ));
    }
    if max == T::infinity() {
        return Err(Error::DegeneratePopulation("+inf log-weight".into()));
    }
    let mut weights: Vec<T> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total = pairwise_sum(&weights);
    for w in &mut weights {
        *w = *w / total;
    }
    let n = T::from_usize(log_weights.len()).expect("population size fits the scalar");
    Ok(NormalizedWeights {
        weights,
        log_norm_constant_increment: max + total.ln() - n.ln(),
    })
}

/// Effective sample size `1 / sum(W_i^2)`, in `[1, N]` for normalized
/// weights.
pub fn ess<T: Scalar>(weights: &NormalizedWeights<T>) -> T {
    let squares: Vec<T> = weights.weights.iter().map(|&w| w * w).collect();
    T::one() / pairwise_sum(&squares)
}

/// Plain Monte Carlo estimate `(1/N) * pairwise_sum(phi(x_i))`.
pub fn mc_estimate<T, X, F>(samples: &[X], phi: F) -> Result<T>
where
    T: Scalar,
    F: Fn(&X) -> T,
{
    if samples.is_empty() {
        return Err(Error::InvalidConfig("mc_estimate needs samples".into()));
    }
    let values: Vec<T> = samples.iter().map(phi).collect();
    let n = T::from_usize(samples.len()).expect("sample count fits the scalar");
    Ok(pairwise_sum(&values) / n)
}

/// A self-normalized importance-sampling estimate with its standard error
/// `sqrt(sum W_i^2 (phi_i - est)^2)` and the effective sample size of the
/// weights.
#[derive(Clone, Debug)]
pub struct IsEstimate<T> {
    pub estimate: T,
    pub std_error: T,
    pub ess: T,
}

/// Self-normalized importance sampling: weights are
/// `exp(log_target - log_proposal)` normalized over the sample, the estimate
/// is `sum W_i phi(x_i)`. Evaluation of the three functions is data-parallel
/// over `workers`.
pub fn importance_estimate<T, X, Ft, Fp, Fphi>(
    samples: &[X],
    log_target: Ft,
    log_proposal: Fp,
    phi: Fphi,
    workers: usize,
) -> Result<IsEstimate<T>>
where
    T: Scalar,
    X: Sync,
    Ft: Fn(&X) -> T + Sync,
    Fp: Fn(&X) -> T + Sync,
    Fphi: Fn(&X) -> T + Sync,
{
    if samples.is_empty() {
        return Err(Error::InvalidConfig(
            "importance_estimate needs samples".into(),
        ));
    }
    let log_weights = par_map_values(samples, workers, |x| log_target(x) - log_proposal(x));
    let phis = par_map_values(samples, workers, |x| phi(x));
    let normalized = normalize_log_weights(&log_weights)?;
    let weighted: Vec<T> = normalized
        .weights
        .iter()
        .zip(&phis)
        .map(|(&w, &p)| w * p)
        .collect();
    let estimate = pairwise_sum(&weighted);
    let deviations: Vec<T> = normalized
        .weights
        .iter()
        .zip(&phis)
        .map(|(&w, &p)| {
            let d = p - estimate;
            w * w * d * d
        })
        .collect();
    Ok(IsEstimate {
        estimate,
        std_error: pairwise_sum(&deviations).sqrt(),
        ess: ess(&normalized),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::{make_streams, GeneratorKind, Mrg32k3a, DEFAULT_BLOCK_LEN};
    use proptest::prelude::*;

    /// Recursive definition of the fixed tree: split at the largest power of
    /// two strictly below the length. The production code is an iterative
    /// bottom-up version of the same association.
    fn recursive_pairwise(values: &[f64]) -> f64 {
        match values.len() {
            0 => 0.0,
            1 => values[0],
            n => {
                let mut split = 1usize;
                while split * 2 < n {
                    split *= 2;
                }
                recursive_pairwise(&values[..split]) + recursive_pairwise(&values[split..])
            }
        }
    }

    #[test]
    fn pairwise_trivial_cases() {
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0, 4.0]), 10.0);
    }

    #[test]
    fn pairwise_error_beats_sequential_in_f32() {
        // 10^5 values of 0.1f32: the running accumulator drifts, the tree
        // does not (relative to an f64 reference).
        let values = vec![0.1f32; 100_000];
        let exact = 0.1f64 * 100_000.0;
        let sequential: f32 = values.iter().copied().sum();
        let pairwise = pairwise_sum(&values);
        let err_seq = (sequential as f64 - exact).abs();
        let err_pair = (pairwise as f64 - exact).abs();
        assert!(
            err_pair * 100.0 <= err_seq,
            "pairwise {err_pair} vs sequential {err_seq}"
        );
    }

    #[test]
    fn prefix_sum_examples() {
        assert_eq!(inclusive_prefix_sum(&[1.0f64]), vec![1.0]);
        assert_eq!(
            inclusive_prefix_sum(&[0.25f64, 0.25, 0.5]),
            vec![0.25, 0.5, 1.0]
        );
    }

    #[test]
    fn prefix_matches_sequential_scan_on_random_input() {
        let mut gen = Mrg32k3a::from_master_seed(2024);
        let values: Vec<f64> = (0..10_000).map(|_| gen.next_f64()).collect();
        let prefix = inclusive_prefix_sum(&values);
        let mut acc = 0.0f64;
        let n = values.len() as f64;
        for (i, &v) in values.iter().enumerate() {
            acc += v;
            assert!(
                (prefix[i] - acc).abs() <= 4.0 * f64::EPSILON * n * acc.abs().max(1.0),
                "index {i}"
            );
        }
    }

    proptest! {
        #[test]
        fn pairwise_matches_recursive_definition(values in proptest::collection::vec(-1e6f64..1e6, 0..300)) {
            prop_assert_eq!(pairwise_sum(&values), recursive_pairwise(&values));
        }

        #[test]
        fn prefix_entries_carry_pairwise_association(values in proptest::collection::vec(0.0f64..1e3, 1..200)) {
            let prefix = inclusive_prefix_sum(&values);
            for i in 0..values.len() {
                prop_assert_eq!(prefix[i], pairwise_sum(&values[..=i]), "prefix {}", i);
            }
        }

        #[test]
        fn normalized_weights_sum_to_one(lw in proptest::collection::vec(-700.0f64..700.0, 1..200)) {
            let nw = normalize_log_weights(&lw).unwrap();
            let total = pairwise_sum(&nw.weights);
            let n = lw.len() as f64;
            prop_assert!((total - 1.0).abs() <= 8.0 * f64::EPSILON * n);
            prop_assert!(nw.weights.iter().all(|&w| w >= 0.0));
        }

        #[test]
        fn normalize_shift_invariance_is_exact_for_exact_shifts(
            lw in proptest::collection::vec(-40i32..40, 1..100),
            shift_exp in -8i32..8,
        ) {
            // Integer log-weights shifted by a power of two: the additions
            // are exact, so the normalized weights must agree bit for bit.
            let base: Vec<f64> = lw.iter().map(|&v| v as f64).collect();
            let c = (2.0f64).powi(shift_exp);
            let shifted: Vec<f64> = base.iter().map(|&v| v + c).collect();
            let a = normalize_log_weights(&base).unwrap();
            let b = normalize_log_weights(&shifted).unwrap();
            prop_assert_eq!(a.weights, b.weights);
        }

        #[test]
        fn ess_bounds_and_permutation_invariance(lw in proptest::collection::vec(-30.0f64..30.0, 2..100)) {
            let nw = normalize_log_weights(&lw).unwrap();
            let e = ess(&nw);
            let n = lw.len() as f64;
            prop_assert!(e >= 1.0 - 1e-9 && e <= n * (1.0 + 1e-12));
            let mut reversed = nw.clone();
            reversed.weights.reverse();
            // Permutation moves values through the same tree shape; the sum
            // of squares changes only at rounding level.
            let e_rev = ess(&reversed);
            prop_assert!((e - e_rev).abs() <= 1e-9 * e.abs().max(1.0));
        }
    }

    #[test]
    fn normalize_examples() {
        let nw = normalize_log_weights(&[0.0f64, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(nw.weights, vec![0.25, 0.25, 0.25, 0.25]);

        let nw = normalize_log_weights(&[f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(nw.weights, vec![0.0, 1.0]);

        let lw: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0].iter().map(|v| v.ln()).collect();
        let nw = normalize_log_weights(&lw).unwrap();
        for (got, want) in nw.weights.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn normalize_degenerate_inputs_error() {
        assert!(normalize_log_weights::<f64>(&[]).is_err());
        assert!(normalize_log_weights(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).is_err());
        assert!(normalize_log_weights(&[0.0, f64::NAN]).is_err());
        assert!(normalize_log_weights(&[0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn ess_examples() {
        let uniform = normalize_log_weights(&vec![0.0f64; 100]).unwrap();
        assert!((ess(&uniform) - 100.0).abs() < 1e-9);

        let one_hot = NormalizedWeights {
            weights: vec![1.0f64, 0.0, 0.0],
            log_norm_constant_increment: 0.0,
        };
        assert_eq!(ess(&one_hot), 1.0);

        let w = NormalizedWeights {
            weights: vec![0.5f64, 0.25, 0.25],
            log_norm_constant_increment: 0.0,
        };
        assert!((ess(&w) - 1.0 / 0.375).abs() < 1e-12);
    }

    #[test]
    fn mc_estimate_examples() {
        let xs = [1.0f64, 2.0, 3.0];
        assert_eq!(mc_estimate(&xs, |_| 5.0f64).unwrap(), 5.0);
        assert_eq!(mc_estimate(&xs, |&x| x).unwrap(), 2.0);
        assert!(mc_estimate::<f64, f64, _>(&[], |&x| x).is_err());
    }

    #[test]
    fn importance_with_matching_densities_reduces_to_mc() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let is = importance_estimate(&xs, |&x| -x, |&x| -x, |&x| x * x, 1).unwrap();
        let mc = mc_estimate(&xs, |&x| x * x).unwrap();
        assert!((is.estimate - mc).abs() < 1e-12);
    }

    #[test]
    fn importance_of_constant_one_is_one() {
        let xs: Vec<f64> = (0..37).map(|i| i as f64).collect();
        let is = importance_estimate(&xs, |&x| -x / 10.0, |_| 0.0, |_| 1.0f64, 1).unwrap();
        assert!((is.estimate - 1.0).abs() <= 8.0 * f64::EPSILON * xs.len() as f64);
        assert!(is.std_error.abs() < 1e-12);
    }

    fn uniform_increment_kernel(
        item: &mut f64,
        stream: &mut Stream<f64>,
    ) -> crate::error::Result<()> {
        *item += stream.next_uniform();
        Ok(())
    }

    #[test]
    fn par_map_identity_kernel_is_identity() {
        let streams =
            make_streams::<f64>(GeneratorKind::Mrg32k3a, 1, 16, DEFAULT_BLOCK_LEN).unwrap();
        let items: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let mut pop = Population::new(items.clone(), streams).unwrap();
        par_map(&mut pop, 4, &|_item, _stream| Ok(())).unwrap();
        assert_eq!(pop.items, items);
    }

    #[test]
    fn par_map_matches_sequential_oracle_for_any_worker_count() {
        let make = || {
            let streams =
                make_streams(GeneratorKind::Mrg32k3a, 9, 100, DEFAULT_BLOCK_LEN).unwrap();
            Population::new(vec![0.0f64; 100], streams).unwrap()
        };
        let mut expected = make();
        for (item, stream) in expected.items.iter_mut().zip(expected.streams.iter_mut()) {
            uniform_increment_kernel(item, stream).unwrap();
        }
        for workers in [1usize, 2, 4, 8] {
            let mut pop = make();
            par_map(&mut pop, workers, &uniform_increment_kernel).unwrap();
            assert_eq!(pop.items, expected.items, "workers = {workers}");
        }
    }

    #[test]
    fn par_map_reports_lowest_failing_index() {
        let streams = make_streams(GeneratorKind::Mrg32k3a, 9, 64, DEFAULT_BLOCK_LEN).unwrap();
        let mut pop = Population::new((0..64).collect::<Vec<i64>>(), streams).unwrap();
        let kernel = |item: &mut i64, _stream: &mut Stream<f64>| {
            if *item % 2 == 1 {
                Err(Error::DegeneratePopulation("odd".into()))
            } else {
                Ok(())
            }
        };
        for workers in [1usize, 4] {
            let err = par_map(&mut pop, workers, &kernel).unwrap_err();
            match err {
                Error::Element { index, .. } => assert_eq!(index, 1),
                other => panic!("unexpected error {other:?}"),
            }
        }
    }

    #[test]
    fn precision_mode_parses() {
        assert_eq!(
            "single".parse::<PrecisionMode>().unwrap(),
            PrecisionMode::Single
        );
        assert_eq!(
            "double".parse::<PrecisionMode>().unwrap(),
            PrecisionMode::Double
        );
        assert!("half".parse::<PrecisionMode>().is_err());
    }
}
