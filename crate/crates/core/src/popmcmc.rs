//! Population MCMC with parallel tempering.
//!
//! M subchains target the tempered densities `pi^beta_i` on the squared
//! cooling schedule `beta_i = (i/M)^2`. Each iteration advances every chain
//! one random-walk Metropolis step in parallel, then attempts one pass of
//! exchange moves between adjacent chains. Within a pass the pairs are
//! disjoint, so the swaps commute and the pass is order-free; the pairing
//! alternates randomly between the two adjacent index sets so information
//! percolates along the whole ladder.

use std::mem;

use crate::error::{Error, Result};
use crate::models::TargetDistribution;
use crate::parallel::{par_map, Population};
use crate::prng::{make_streams, GeneratorKind, Stream, DEFAULT_BLOCK_LEN};
use crate::scalar::Scalar;

/// Ascending inverse temperatures with the final entry exactly one.
#[derive(Clone, Debug)]
pub struct TemperatureLadder<T> {
    betas: Vec<T>,
}

impl<T: Scalar> TemperatureLadder<T> {
    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

/// The squared cooling schedule `beta_i = (i/M)^2` for `i = 1..=M`.
pub fn make_ladder<T: Scalar>(m: usize) -> Result<TemperatureLadder<T>> {
    if m == 0 {
        return Err(Error::InvalidConfig("chain count must be positive".into()));
    }
    let mf = T::from_usize(m).expect("chain count fits scalar");
    let betas = (1..=m)
        .map(|i| {
            let r = T::from_usize(i).expect("chain index fits scalar") / mf;
            r * r
        })
        .collect();
    Ok(TemperatureLadder { betas })
}

/// One tempered chain: current position, cached unnormalized log-density at
/// that position (untempered), and the slot's inverse temperature. The
/// scratch buffer holds proposals so stepping allocates nothing.
///
/// Exchange moves swap positions and caches between slots; the temperature
/// and the accept counter belong to the slot and never move.
#[derive(Clone, Debug)]
pub struct ChainState<T> {
    pub position: Vec<T>,
    pub log_density: T,
    pub beta: T,
    pub rwm_accepts: u64,
    scratch: Vec<T>,
}

impl<T: Scalar> ChainState<T> {
    pub fn new(dim: usize, beta: T) -> Self {
        ChainState {
            position: vec![T::zero(); dim],
            log_density: T::zero(),
            beta,
            rwm_accepts: 0,
            scratch: vec![T::zero(); dim],
        }
    }

    /// Read access to the position together with write access to the scratch
    /// buffer, for kernels that compute a successor state in place.
    pub fn position_and_scratch(&mut self) -> (&[T], &mut [T]) {
        (&self.position, &mut self.scratch)
    }

    /// Promotes the scratch buffer to the current position.
    pub fn swap_scratch(&mut self) {
        mem::swap(&mut self.position, &mut self.scratch);
    }
}

/// One random-walk Metropolis step targeting `beta * log_target`: an
/// isotropic normal proposal of the given scale, accepted with probability
/// `min(1, exp(beta (l(x') - l(x))))`. Proposals with -inf density are always
/// rejected. Consumes `dim` normals plus one uniform regardless of outcome.
pub fn rwm_step<T, L>(
    state: &mut ChainState<T>,
    scale: T,
    log_target: &L,
    stream: &mut Stream<T>,
) -> bool
where
    T: Scalar,
    L: Fn(&[T]) -> T + ?Sized,
{
    for (slot, &cur) in state.scratch.iter_mut().zip(&state.position) {
        *slot = cur + scale * stream.next_gaussian();
    }
    let proposal_log_density = log_target(&state.scratch);
    let log_ratio = state.beta * (proposal_log_density - state.log_density);
    let u = stream.next_uniform();
    let accept = u.ln() < log_ratio;
    if accept {
        mem::swap(&mut state.position, &mut state.scratch);
        state.log_density = proposal_log_density;
        state.rwm_accepts += 1;
    }
    accept
}

/// Adjacent exchange pairs (0-based). The first set is {0,1},{2,3},...; the
/// second is {1,2},{3,4},... plus the wrap-around pair {M-1,0}. For odd M the
/// second set drops the pair that would collide with the wrap, leaving chain
/// M-2 idle, so the pairs within a set are always disjoint.
pub fn exchange_pairs(m: usize, second_set: bool) -> Vec<(usize, usize)> {
    if m < 2 {
        return Vec::new();
    }
    if !second_set {
        (0..m / 2).map(|i| (2 * i, 2 * i + 1)).collect()
    } else {
        let mut pairs: Vec<(usize, usize)> = (0..)
            .map(|i| (2 * i + 1, 2 * i + 2))
            .take_while(|&(_, b)| b <= m - 2)
            .collect();
        pairs.push((m - 1, 0));
        pairs
    }
}

/// Log acceptance ratio of swapping chains at temperatures `beta_i, beta_j`
/// holding untempered log-densities `lp_i, lp_j`:
/// `(beta_i - beta_j) (lp_j - lp_i)`.
pub fn exchange_log_alpha<T: Scalar>(beta_i: T, beta_j: T, lp_i: T, lp_j: T) -> T {
    (beta_i - beta_j) * (lp_j - lp_i)
}

/// Outcome of one exchange pass.
#[derive(Clone, Copy, Debug)]
pub struct ExchangeOutcome {
    pub second_set: bool,
    pub attempted: usize,
    pub accepted: usize,
}

/// One pass of adjacent exchange moves: draws the parity bit, then attempts
/// every pair of that parity. Swaps move positions and cached log-densities
/// between slots; densities are never re-evaluated. `swap_attempts` and
/// `swap_accepts` are indexed by the lower chain index of each pair (the
/// wrap pair {M-1,0} is counted under M-1).
pub fn exchange_pass<T: Scalar>(
    states: &mut [ChainState<T>],
    stream: &mut Stream<T>,
    swap_attempts: &mut [u64],
    swap_accepts: &mut [u64],
) -> ExchangeOutcome {
    let m = states.len();
    if m < 2 {
        return ExchangeOutcome {
            second_set: false,
            attempted: 0,
            accepted: 0,
        };
    }
    let second_set = stream.next_uniform() >= T::half();
    let pairs = exchange_pairs(m, second_set);
    let mut accepted = 0;
    for &(a, b) in &pairs {
        let u = stream.next_uniform();
        let log_alpha =
            exchange_log_alpha(states[a].beta, states[b].beta, states[a].log_density, states[b].log_density);
        swap_attempts[a] += 1;
        if u.ln() < log_alpha {
            swap_accepts[a] += 1;
            accepted += 1;
            let (x, y) = two_mut(states, a, b);
            mem::swap(&mut x.position, &mut y.position);
            mem::swap(&mut x.log_density, &mut y.log_density);
        }
    }
    ExchangeOutcome {
        second_set,
        attempted: pairs.len(),
        accepted,
    }
}

fn two_mut<S>(slice: &mut [S], a: usize, b: usize) -> (&mut S, &mut S) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = slice.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = slice.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

#[derive(Clone, Debug)]
pub struct PopMcmcConfig {
    /// Number of tempered chains M.
    pub chains: usize,
    /// Samples recorded from the target chain after burn-in.
    pub iterations: usize,
    /// Iterations discarded up front (none by default).
    pub burn_in: usize,
    /// Random-walk proposal standard deviation.
    pub rwm_scale: f64,
    pub seed: u64,
    pub workers: usize,
    pub generator: GeneratorKind,
    /// Also record every auxiliary chain's path (memory heavy).
    pub keep_all_chains: bool,
}

impl Default for PopMcmcConfig {
    fn default() -> Self {
        PopMcmcConfig {
            chains: 200,
            iterations: 8192,
            burn_in: 0,
            rwm_scale: 1.0,
            seed: 12345,
            workers: 1,
            generator: GeneratorKind::Mrg32k3a,
            keep_all_chains: false,
        }
    }
}

/// Output of a population MCMC run: the target chain's recorded path plus
/// per-chain acceptance and per-pair swap counters.
#[derive(Clone, Debug)]
pub struct PopMcmcRun<T> {
    pub samples: Vec<Vec<T>>,
    pub betas: Vec<T>,
    pub rwm_accepts: Vec<u64>,
    pub rwm_steps: u64,
    pub swap_attempts: Vec<u64>,
    pub swap_accepts: Vec<u64>,
    pub all_chain_samples: Option<Vec<Vec<Vec<T>>>>,
}

/// Runs the two-stage scheme: per iteration, a parallel RWM step on every
/// chain, then one exchange pass, recording the state of chain M (the
/// untempered chain) each post-burn-in iteration.
pub fn run_popmcmc<T, G>(config: &PopMcmcConfig, target: &G) -> Result<PopMcmcRun<T>>
where
    T: Scalar,
    G: TargetDistribution<T>,
{
    if config.chains == 0 {
        return Err(Error::InvalidConfig("chain count must be positive".into()));
    }
    if config.iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be positive".into()));
    }
    if config.workers == 0 {
        return Err(Error::InvalidConfig("workers must be positive".into()));
    }
    let m = config.chains;
    let dim = target.dim();
    let ladder = make_ladder::<T>(m)?;

    // Streams 0..M belong to the chains; stream M drives the exchange pass.
    let mut streams = make_streams::<T>(config.generator, config.seed, m + 1, DEFAULT_BLOCK_LEN)?;
    let mut exchange_stream = streams.pop().expect("m + 1 streams were built");
    let items: Vec<ChainState<T>> = ladder
        .betas()
        .iter()
        .map(|&beta| ChainState::new(dim, beta))
        .collect();
    let mut population = Population::new(items, streams)?;

    let init = |state: &mut ChainState<T>, stream: &mut Stream<T>| {
        state.position = target.sample_prior(stream);
        state.log_density = target.log_density(&state.position);
        Ok(())
    };
    par_map(&mut population, config.workers, &init)?;

    let scale = T::from_f64_lossy(config.rwm_scale);
    let log_target = |x: &[T]| target.log_density(x);
    let step = |state: &mut ChainState<T>, stream: &mut Stream<T>| {
        rwm_step(state, scale, &log_target, stream);
        Ok(())
    };

    let total = config.burn_in + config.iterations;
    let mut samples = Vec::with_capacity(config.iterations);
    let mut all_chain_samples = if config.keep_all_chains {
        Some(Vec::with_capacity(config.iterations))
    } else {
        None
    };
    let mut swap_attempts = vec![0u64; m];
    let mut swap_accepts = vec![0u64; m];
    for iteration in 0..total {
        par_map(&mut population, config.workers, &step)?;
        if m >= 2 {
            exchange_pass(
                &mut population.items,
                &mut exchange_stream,
                &mut swap_attempts,
                &mut swap_accepts,
            );
        }
        if iteration >= config.burn_in {
            samples.push(population.items[m - 1].position.clone());
            if let Some(all) = all_chain_samples.as_mut() {
                all.push(
                    population
                        .items
                        .iter()
                        .map(|s| s.position.clone())
                        .collect(),
                );
            }
        }
    }

    Ok(PopMcmcRun {
        samples,
        betas: ladder.betas().to_vec(),
        rwm_accepts: population.items.iter().map(|s| s.rwm_accepts).collect(),
        rwm_steps: total as u64,
        swap_attempts,
        swap_accepts,
        all_chain_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate_mixture_data, MixtureModel, MixturePosterior};
    use proptest::prelude::*;

    fn stream(seed: u64) -> Stream<f64> {
        make_streams(GeneratorKind::Mrg32k3a, seed, 1, DEFAULT_BLOCK_LEN)
            .unwrap()
            .pop()
            .unwrap()
    }

    fn mixture_target(seed: u64) -> MixturePosterior<f64> {
        let mut s = stream(seed);
        let data = simulate_mixture_data(&[-3.0, 0.0, 3.0, 6.0], 100, 0.55, &mut s);
        MixturePosterior::new(MixtureModel::new(4, 0.55, 10.0, data).unwrap())
    }

    #[test]
    fn ladder_examples() {
        let l = make_ladder::<f64>(1).unwrap();
        assert_eq!(l.betas(), &[1.0]);
        let l = make_ladder::<f64>(2).unwrap();
        assert_eq!(l.betas(), &[0.25, 1.0]);
        let l = make_ladder::<f64>(200).unwrap();
        assert_eq!(l.betas()[99], 0.25);
        assert_eq!(*l.betas().last().unwrap(), 1.0);
        assert!(make_ladder::<f64>(0).is_err());
    }

    #[test]
    fn ladder_is_strictly_increasing_within_unit_interval() {
        let l = make_ladder::<f64>(317).unwrap();
        for w in l.betas().windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(l.betas()[0] > 0.0);
        assert_eq!(*l.betas().last().unwrap(), 1.0);
    }

    #[test]
    fn exchange_pairs_as_printed() {
        assert_eq!(exchange_pairs(6, false), vec![(0, 1), (2, 3), (4, 5)]);
        assert_eq!(exchange_pairs(6, true), vec![(1, 2), (3, 4), (5, 0)]);
        assert_eq!(exchange_pairs(5, false), vec![(0, 1), (2, 3)]);
        assert_eq!(exchange_pairs(5, true), vec![(1, 2), (4, 0)]);
        assert_eq!(exchange_pairs(2, true), vec![(1, 0)]);
        assert!(exchange_pairs(1, false).is_empty());
        assert!(exchange_pairs(1, true).is_empty());
    }

    proptest! {
        #[test]
        fn exchange_pairs_are_disjoint(m in 2usize..300, second in proptest::bool::ANY) {
            let pairs = exchange_pairs(m, second);
            let mut seen = vec![false; m];
            for (a, b) in pairs {
                prop_assert!(a < m && b < m);
                prop_assert!(!seen[a] && !seen[b]);
                seen[a] = true;
                seen[b] = true;
            }
        }
    }

    #[test]
    fn exchange_log_alpha_direct_arithmetic() {
        assert_eq!(exchange_log_alpha(0.25, 1.0, -1.0, -5.0), 3.0);
        assert_eq!(exchange_log_alpha(0.5, 0.5, -1.0, -9.0), 0.0);
        assert_eq!(exchange_log_alpha(0.25, 1.0, -2.0, -2.0), 0.0);
    }

    #[test]
    fn equal_temperature_swaps_always_accepted() {
        let mut states = vec![ChainState::<f64>::new(1, 0.5), ChainState::new(1, 0.5)];
        states[0].position = vec![1.0];
        states[0].log_density = -10.0;
        states[1].position = vec![2.0];
        states[1].log_density = -0.5;
        let mut attempts = vec![0u64; 2];
        let mut accepts = vec![0u64; 2];
        let mut s = stream(1);
        for _ in 0..50 {
            exchange_pass(&mut states, &mut s, &mut attempts, &mut accepts);
        }
        assert_eq!(attempts.iter().sum::<u64>(), 50);
        assert_eq!(accepts.iter().sum::<u64>(), 50);
    }

    #[test]
    fn flat_density_proposals_always_accepted() {
        // On a flat support every in-support proposal has ratio >= 1; far
        // from any boundary all 500 steps must be accepted.
        let log_target = |x: &[f64]| if x[0] > 0.0 { 0.0 } else { f64::NEG_INFINITY };
        let mut state = ChainState::<f64>::new(1, 1.0);
        state.position = vec![1000.0];
        state.log_density = 0.0;
        let mut s = stream(3);
        for _ in 0..500 {
            assert!(rwm_step(&mut state, 1.0, &log_target, &mut s));
        }
    }

    #[test]
    fn out_of_support_proposals_always_rejected() {
        let target = mixture_target(7);
        // Near the prior boundary many proposals fall outside the hypercube;
        // the chain must never move there and the cache must stay coherent.
        let mut state = ChainState::<f64>::new(4, 1.0);
        state.position = vec![9.9, 9.9, 9.9, 9.9];
        state.log_density = target.log_density(&state.position);
        let mut s = stream(3);
        for _ in 0..200 {
            let before = state.position.clone();
            let accepted = rwm_step(&mut state, 1.0, &|x| target.log_density(x), &mut s);
            if accepted {
                assert!(state.position.iter().all(|v| v.abs() <= 10.0));
            } else {
                assert_eq!(state.position, before);
            }
            assert_eq!(state.log_density, target.log_density(&state.position));
        }
    }

    #[test]
    fn rwm_on_standard_normal_has_correct_moments() {
        let mut state = ChainState::<f64>::new(1, 1.0);
        state.position = vec![0.0];
        let log_target = |x: &[f64]| -0.5 * x[0] * x[0];
        state.log_density = log_target(&state.position);
        let mut s = stream(11);
        let n = 100_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            rwm_step(&mut state, 1.0, &log_target, &mut s);
            sum += state.position[0];
            sum_sq += state.position[0] * state.position[0];
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        // RWM autocorrelation inflates the CLT standard error by roughly the
        // integrated autocorrelation time (~6 for unit proposals on N(0,1));
        // the bounds below are ~4 inflated sigmas.
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn single_chain_reduces_to_plain_rwm() {
        let target = mixture_target(13);
        let config = PopMcmcConfig {
            chains: 1,
            iterations: 50,
            workers: 1,
            seed: 5,
            ..PopMcmcConfig::default()
        };
        let run = run_popmcmc(&config, &target).unwrap();

        // Manual chain with the same substream layout.
        let mut streams =
            make_streams::<f64>(GeneratorKind::Mrg32k3a, 5, 2, DEFAULT_BLOCK_LEN).unwrap();
        let _exchange = streams.pop();
        let mut s = streams.pop().unwrap();
        let mut state = ChainState::<f64>::new(4, 1.0);
        state.position = target.sample_prior(&mut s);
        state.log_density = target.log_density(&state.position);
        let mut manual = Vec::new();
        for _ in 0..50 {
            rwm_step(&mut state, 1.0, &|x: &[f64]| target.log_density(x), &mut s);
            manual.push(state.position.clone());
        }
        assert_eq!(run.samples, manual);
    }

    #[test]
    fn caches_stay_coherent_over_a_run() {
        let target = mixture_target(17);
        let config = PopMcmcConfig {
            chains: 8,
            iterations: 200,
            workers: 2,
            seed: 23,
            ..PopMcmcConfig::default()
        };
        // Re-run the loop manually to inspect the final population.
        let m = config.chains;
        let ladder = make_ladder::<f64>(m).unwrap();
        let mut streams =
            make_streams::<f64>(config.generator, config.seed, m + 1, DEFAULT_BLOCK_LEN).unwrap();
        let mut exchange_stream = streams.pop().unwrap();
        let items: Vec<ChainState<f64>> = ladder
            .betas()
            .iter()
            .map(|&beta| ChainState::new(4, beta))
            .collect();
        let mut population = Population::new(items, streams).unwrap();
        par_map(&mut population, 2, &|st, stream| {
            st.position = target.sample_prior(stream);
            st.log_density = target.log_density(&st.position);
            Ok(())
        })
        .unwrap();
        let mut attempts = vec![0u64; m];
        let mut accepts = vec![0u64; m];
        for _ in 0..200 {
            par_map(&mut population, 2, &|st, stream| {
                rwm_step(st, 1.0, &|x: &[f64]| target.log_density(x), stream);
                Ok(())
            })
            .unwrap();
            exchange_pass(
                &mut population.items,
                &mut exchange_stream,
                &mut attempts,
                &mut accepts,
            );
        }
        for st in &population.items {
            assert_eq!(st.log_density, target.log_density(&st.position));
        }
    }

    #[test]
    fn runs_are_worker_count_invariant() {
        let target = mixture_target(19);
        let base = PopMcmcConfig {
            chains: 16,
            iterations: 100,
            seed: 31,
            ..PopMcmcConfig::default()
        };
        let mut runs = Vec::new();
        for workers in [1usize, 2, 8] {
            let config = PopMcmcConfig { workers, ..base.clone() };
            runs.push(run_popmcmc(&config, &target).unwrap());
        }
        assert_eq!(runs[0].samples, runs[1].samples);
        assert_eq!(runs[0].samples, runs[2].samples);
        assert_eq!(runs[0].rwm_accepts, runs[1].rwm_accepts);
        assert_eq!(runs[0].swap_accepts, runs[2].swap_accepts);
    }

    #[test]
    fn rejects_bad_configs() {
        let target = mixture_target(1);
        let bad_chains = PopMcmcConfig {
            chains: 0,
            ..PopMcmcConfig::default()
        };
        assert!(run_popmcmc::<f64, _>(&bad_chains, &target).is_err());
        let bad_iters = PopMcmcConfig {
            iterations: 0,
            ..PopMcmcConfig::default()
        };
        assert!(run_popmcmc::<f64, _>(&bad_iters, &target).is_err());
    }
}
