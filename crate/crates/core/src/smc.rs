//! Sequential Monte Carlo: resampling, the tempered SMC sampler (annealed
//! importance sampling being its no-resampling special case) and the
//! bootstrap particle filter.
//!
//! Log-weights follow one convention everywhere: they are kept centered so
//! that `logsumexp(lw) = log N`, i.e. `lw_i = log(N W_i)` with uniform
//! weights at zero. Under that convention the normalizer increment returned
//! by `normalize_log_weights` after adding one step's log-likelihood terms is
//! exactly the per-step log-likelihood contribution, and magnitudes stay
//! bounded in single precision.

use crate::error::{Error, Result};
use crate::models::{StateSpaceModel, TargetDistribution};
use crate::parallel::{
    ess, inclusive_prefix_sum, normalize_log_weights, par_map, pairwise_sum, NormalizedWeights,
    Population,
};
use crate::popmcmc::{make_ladder, rwm_step, ChainState};
use crate::prng::{make_streams, GeneratorKind, Stream, DEFAULT_BLOCK_LEN};
use crate::scalar::Scalar;

/// Resampling rule. Multinomial is the default ECDF inversion sampled N
/// times; systematic inverts the ECDF on a single stratified grid and keeps
/// every offspring count within one of its expectation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resampler {
    Multinomial,
    Systematic,
}

impl Resampler {
    pub fn as_str(&self) -> &'static str {
        match self {
            Resampler::Multinomial => "multinomial",
            Resampler::Systematic => "systematic",
        }
    }
}

impl std::str::FromStr for Resampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multinomial" => Ok(Resampler::Multinomial),
            "systematic" => Ok(Resampler::Systematic),
            other => Err(Error::InvalidConfig(format!(
                "unknown resampler '{other}' (expected multinomial or systematic)"
            ))),
        }
    }
}

impl std::fmt::Display for Resampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// N particles with centered log-weights and the cached ESS/N of the last
/// normalization (exactly one after a resample, by construction).
#[derive(Clone, Debug)]
pub struct WeightedPopulation<T> {
    pub population: Population<ChainState<T>, T>,
    pub log_weights: Vec<T>,
    pub ess_ratio: T,
}

impl<T: Scalar> WeightedPopulation<T> {
    pub fn len(&self) -> usize {
        self.population.len()
    }

    pub fn is_empty(&self) -> bool {
        self.population.is_empty()
    }

    pub fn normalized_weights(&self) -> Result<NormalizedWeights<T>> {
        normalize_log_weights(&self.log_weights)
    }
}

/// Ancestor indices for multinomial resampling: each draw inverts the ECDF by
/// binary search (first index whose cumulative weight reaches the draw).
pub fn multinomial_ancestors<T: Scalar>(cdf: &[T], draws: &[T]) -> Vec<usize> {
    draws
        .iter()
        .map(|&u| {
            let idx = cdf.partition_point(|&c| c < u);
            idx.min(cdf.len() - 1)
        })
        .collect()
}

/// Ancestor indices for systematic resampling: the positions `(i + u)/N`
/// inverted through the ECDF with a single merge pass.
pub fn systematic_ancestors<T: Scalar>(cdf: &[T], u: T, count: usize) -> Vec<usize> {
    let n = T::from_usize(count).expect("count fits scalar");
    let mut ancestors = Vec::with_capacity(count);
    let mut j = 0usize;
    for i in 0..count {
        let position = (T::from_usize(i).expect("index fits scalar") + u) / n;
        while j < cdf.len() - 1 && cdf[j] < position {
            j += 1;
        }
        ancestors.push(j);
    }
    ancestors
}

fn apply_ancestors<T: Scalar>(pop: &mut WeightedPopulation<T>, ancestors: &[usize]) {
    let items = &mut pop.population.items;
    let new_items: Vec<ChainState<T>> = ancestors.iter().map(|&a| items[a].clone()).collect();
    *items = new_items;
    for lw in &mut pop.log_weights {
        *lw = T::zero();
    }
    pop.ess_ratio = T::one();
}

/// Resamples in place with the chosen rule, drawing from `stream` (N uniforms
/// for multinomial, one for systematic). Weights become uniform; particle
/// substreams stay attached to their slots, not to the surviving ancestors.
pub fn resample<T: Scalar>(
    pop: &mut WeightedPopulation<T>,
    rule: Resampler,
    stream: &mut Stream<T>,
) -> Result<()> {
    let weights = pop.normalized_weights()?;
    resample_with_weights(pop, &weights, rule, stream);
    Ok(())
}

fn resample_with_weights<T: Scalar>(
    pop: &mut WeightedPopulation<T>,
    weights: &NormalizedWeights<T>,
    rule: Resampler,
    stream: &mut Stream<T>,
) {
    let n = pop.len();
    let cdf = inclusive_prefix_sum(&weights.weights);
    let ancestors = match rule {
        Resampler::Multinomial => {
            let draws: Vec<T> = (0..n).map(|_| stream.next_uniform()).collect();
            multinomial_ancestors(&cdf, &draws)
        }
        Resampler::Systematic => systematic_ancestors(&cdf, stream.next_uniform(), n),
    };
    apply_ancestors(pop, &ancestors);
}

/// Multinomial resampling, ECDF inversion sampled N times.
pub fn resample_multinomial<T: Scalar>(
    pop: &mut WeightedPopulation<T>,
    stream: &mut Stream<T>,
) -> Result<()> {
    resample(pop, Resampler::Multinomial, stream)
}

/// Systematic resampling on a single stratified uniform.
pub fn resample_systematic<T: Scalar>(
    pop: &mut WeightedPopulation<T>,
    stream: &mut Stream<T>,
) -> Result<()> {
    resample(pop, Resampler::Systematic, stream)
}

#[derive(Clone, Debug)]
pub struct SmcSamplerConfig {
    pub particles: usize,
    /// Number of tempering steps T; the ladder is beta_t = (t/T)^2 with an
    /// implicit beta_0 = 0 (the prior).
    pub temperatures: usize,
    /// MCMC steps applied after each reweighting.
    pub mcmc_steps: usize,
    /// Resample when ESS/N falls below this ratio; 0 disables resampling,
    /// which is annealed importance sampling.
    pub ess_threshold: f64,
    pub resampler: Resampler,
    pub rwm_scale: f64,
    pub seed: u64,
    pub workers: usize,
    pub generator: GeneratorKind,
}

impl Default for SmcSamplerConfig {
    fn default() -> Self {
        SmcSamplerConfig {
            particles: 8192,
            temperatures: 200,
            mcmc_steps: 10,
            ess_threshold: 0.5,
            resampler: Resampler::Multinomial,
            rwm_scale: 1.0,
            seed: 12345,
            workers: 1,
            generator: GeneratorKind::Mrg32k3a,
        }
    }
}

/// Per-temperature trace: the ESS is recorded after reweighting and before
/// any resample decision.
#[derive(Clone, Debug)]
pub struct TemperatureTraceRow<T> {
    pub step: usize,
    pub beta: T,
    pub ess: T,
    pub resampled: bool,
}

#[derive(Clone, Debug)]
pub struct SmcSamplerRun<T> {
    pub cloud: WeightedPopulation<T>,
    pub final_weights: NormalizedWeights<T>,
    pub trace: Vec<TemperatureTraceRow<T>>,
    pub resample_events: Vec<usize>,
}

/// Moves a particle population from the prior to the target along the
/// squared tempering ladder. Per temperature: multiply the weights by the
/// incremental term `(beta_t - beta_{t-1}) log pi*(x_{t-1})` (evaluated at
/// the pre-move particles, whose densities are cached), resample if ESS/N
/// fell below the threshold, then apply the MCMC moves targeting the current
/// tempered density.
pub fn smc_sampler_run<T, G>(config: &SmcSamplerConfig, target: &G) -> Result<SmcSamplerRun<T>>
where
    T: Scalar,
    G: TargetDistribution<T>,
{
    if config.particles < 2 {
        return Err(Error::InvalidConfig("need at least two particles".into()));
    }
    if config.temperatures == 0 {
        return Err(Error::InvalidConfig("need at least one temperature".into()));
    }
    if config.workers == 0 {
        return Err(Error::InvalidConfig("workers must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.ess_threshold) {
        return Err(Error::InvalidConfig(
            "ess threshold must lie in [0, 1]".into(),
        ));
    }
    let n = config.particles;
    let dim = target.dim();
    let ladder = make_ladder::<T>(config.temperatures)?;

    // Streams 0..N belong to the particles; stream N drives resampling.
    let mut streams = make_streams::<T>(config.generator, config.seed, n + 1, DEFAULT_BLOCK_LEN)?;
    let mut driver_stream = streams.pop().expect("n + 1 streams were built");
    let items: Vec<ChainState<T>> = (0..n).map(|_| ChainState::new(dim, T::zero())).collect();
    let mut cloud = WeightedPopulation {
        population: Population::new(items, streams)?,
        log_weights: vec![T::zero(); n],
        ess_ratio: T::one(),
    };

    let init = |state: &mut ChainState<T>, stream: &mut Stream<T>| {
        state.position = target.sample_prior(stream);
        state.log_density = target.log_density(&state.position);
        Ok(())
    };
    par_map(&mut cloud.population, config.workers, &init)?;

    let n_scalar = T::from_usize(n).expect("particle count fits scalar");
    let threshold = T::from_f64_lossy(config.ess_threshold);
    let scale = T::from_f64_lossy(config.rwm_scale);
    let log_target = |x: &[T]| target.log_density(x);

    let mut trace = Vec::with_capacity(config.temperatures);
    let mut resample_events = Vec::new();
    let mut previous_beta = T::zero();
    for t in 1..=config.temperatures {
        let beta = ladder.betas()[t - 1];
        let delta = beta - previous_beta;
        for (lw, state) in cloud.log_weights.iter_mut().zip(&cloud.population.items) {
            *lw = *lw + delta * state.log_density;
        }
        let weights = normalize_log_weights(&cloud.log_weights).map_err(|e| match e {
            Error::DegeneratePopulation(reason) => Error::DegenerateAtStep { step: t, reason },
            other => other,
        })?;
        let effective = ess(&weights);
        let ratio = effective / n_scalar;
        let resampled = ratio < threshold;
        trace.push(TemperatureTraceRow {
            step: t,
            beta,
            ess: effective,
            resampled,
        });
        if resampled {
            resample_with_weights(&mut cloud, &weights, config.resampler, &mut driver_stream);
            resample_events.push(t);
        } else {
            for (lw, &w) in cloud.log_weights.iter_mut().zip(&weights.weights) {
                *lw = (n_scalar * w).ln();
            }
            cloud.ess_ratio = ratio;
        }

        let steps = config.mcmc_steps;
        let move_kernel = |state: &mut ChainState<T>, stream: &mut Stream<T>| {
            state.beta = beta;
            for _ in 0..steps {
                rwm_step(state, scale, &log_target, stream);
            }
            Ok(())
        };
        par_map(&mut cloud.population, config.workers, &move_kernel)?;
        previous_beta = beta;
    }

    let final_weights = cloud.normalized_weights()?;
    Ok(SmcSamplerRun {
        cloud,
        final_weights,
        trace,
        resample_events,
    })
}

#[derive(Clone, Debug)]
pub struct PfilterConfig {
    pub particles: usize,
    /// Resample when ESS/N falls below this ratio.
    pub ess_threshold: f64,
    pub resampler: Resampler,
    pub seed: u64,
    pub workers: usize,
    pub generator: GeneratorKind,
}

impl Default for PfilterConfig {
    fn default() -> Self {
        PfilterConfig {
            particles: 8192,
            ess_threshold: 0.5,
            resampler: Resampler::Multinomial,
            seed: 12345,
            workers: 1,
            generator: GeneratorKind::Mrg32k3a,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PfilterRun<T> {
    /// Weighted posterior mean of the state at each time, recorded after
    /// weighting and before any resampling.
    pub filter_means: Vec<Vec<T>>,
    /// Weighted posterior standard deviation per state coordinate.
    pub filter_stds: Vec<Vec<T>>,
    /// Estimate of `log p(y_{1:T})` accumulated from the per-step
    /// normalization increments.
    pub log_likelihood: T,
    pub ess_trace: Vec<T>,
    pub resample_events: Vec<usize>,
}

/// Bootstrap particle filter: initialize from the model's initial sampler,
/// then per observation propagate every particle through the transition
/// (data-parallel), weight by the observation density, update the
/// log-likelihood estimate by the normalization increment, record the
/// weighted moments, and resample when ESS/N drops below the threshold.
pub fn particle_filter_run<T, M>(
    config: &PfilterConfig,
    model: &M,
    observations: &[Vec<T>],
) -> Result<PfilterRun<T>>
where
    T: Scalar,
    M: StateSpaceModel<T>,
{
    if config.particles < 2 {
        return Err(Error::InvalidConfig("need at least two particles".into()));
    }
    if config.workers == 0 {
        return Err(Error::InvalidConfig("workers must be positive".into()));
    }
    if observations.is_empty() {
        return Err(Error::InvalidConfig("no observations to filter".into()));
    }
    if observations.iter().any(|y| y.len() != model.obs_dim()) {
        return Err(Error::InvalidConfig(format!(
            "observations must have dimension {}",
            model.obs_dim()
        )));
    }
    let n = config.particles;
    let state_dim = model.state_dim();

    let mut streams = make_streams::<T>(config.generator, config.seed, n + 1, DEFAULT_BLOCK_LEN)?;
    let mut driver_stream = streams.pop().expect("n + 1 streams were built");
    let items: Vec<ChainState<T>> = (0..n)
        .map(|_| ChainState::new(state_dim, T::zero()))
        .collect();
    let mut cloud = WeightedPopulation {
        population: Population::new(items, streams)?,
        log_weights: vec![T::zero(); n],
        ess_ratio: T::one(),
    };

    let init = |state: &mut ChainState<T>, stream: &mut Stream<T>| {
        state.position = model.sample_initial(stream);
        state.log_density = T::zero();
        Ok(())
    };
    par_map(&mut cloud.population, config.workers, &init)?;

    let n_scalar = T::from_usize(n).expect("particle count fits scalar");
    let threshold = T::from_f64_lossy(config.ess_threshold);

    let mut filter_means = Vec::with_capacity(observations.len());
    let mut filter_stds = Vec::with_capacity(observations.len());
    let mut ess_trace = Vec::with_capacity(observations.len());
    let mut resample_events = Vec::new();
    let mut log_likelihood = T::zero();
    let mut scratch = vec![T::zero(); n];

    for (index, y) in observations.iter().enumerate() {
        let step = index + 1;
        let propagate = |state: &mut ChainState<T>, stream: &mut Stream<T>| {
            // Move through the transition into the scratch buffer, then swap;
            // the kernel owns no allocation.
            let (position, scratch) = state.position_and_scratch();
            model.sample_transition(position, scratch, stream);
            state.swap_scratch();
            state.log_density = model.log_obs_density(&state.position, y);
            Ok(())
        };
        par_map(&mut cloud.population, config.workers, &propagate)?;
        for (lw, state) in cloud.log_weights.iter_mut().zip(&cloud.population.items) {
            *lw = *lw + state.log_density;
        }
        let weights = normalize_log_weights(&cloud.log_weights).map_err(|e| match e {
            Error::DegeneratePopulation(reason) => Error::DegenerateAtStep { step, reason },
            other => other,
        })?;
        log_likelihood = log_likelihood + weights.log_norm_constant_increment;

        let mut means = Vec::with_capacity(state_dim);
        let mut stds = Vec::with_capacity(state_dim);
        for d in 0..state_dim {
            for (slot, (state, &w)) in scratch
                .iter_mut()
                .zip(cloud.population.items.iter().zip(&weights.weights))
            {
                *slot = state.position[d] * w;
            }
            let mean = pairwise_sum(&scratch);
            for (slot, (state, &w)) in scratch
                .iter_mut()
                .zip(cloud.population.items.iter().zip(&weights.weights))
            {
                let dev = state.position[d] - mean;
                *slot = dev * dev * w;
            }
            means.push(mean);
            stds.push(pairwise_sum(&scratch).sqrt());
        }
        filter_means.push(means);
        filter_stds.push(stds);

        let effective = ess(&weights);
        ess_trace.push(effective);
        let ratio = effective / n_scalar;
        if ratio < threshold {
            resample_with_weights(&mut cloud, &weights, config.resampler, &mut driver_stream);
            resample_events.push(step);
        } else {
            for (lw, &w) in cloud.log_weights.iter_mut().zip(&weights.weights) {
                *lw = (n_scalar * w).ln();
            }
            cloud.ess_ratio = ratio;
        }
    }

    Ok(PfilterRun {
        filter_means,
        filter_stds,
        log_likelihood,
        ess_trace,
        resample_events,
    })
}
