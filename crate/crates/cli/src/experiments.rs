//! The experiment implementations behind the CLI subcommands. Every
//! experiment resolves its settings, runs at the configured precision, writes
//! deterministic CSV artifacts into the output directory and leaves a
//! manifest describing the run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use popmc_core::diagnostics::{
    coupon_expectation, kde_grid_2d, mode_counts, traversal_time, ModeAtlas,
};
use popmc_core::io::{read_matrix_csv, write_matrix_csv, write_record_csv};
use popmc_core::models::{
    log_standard_normal, simulate_mixture_data, toy_log_target, FsvParams, LinearGaussianSsm,
    MixtureModel, MixturePosterior,
};
use popmc_core::parallel::importance_estimate;
use popmc_core::popmcmc::{run_popmcmc, PopMcmcConfig, PopMcmcRun};
use popmc_core::prng::{make_streams, Stream, DEFAULT_BLOCK_LEN};
use popmc_core::smc::{
    particle_filter_run, smc_sampler_run, PfilterConfig, Resampler, SmcSamplerConfig,
};
use popmc_core::{GeneratorKind, PrecisionMode, Scalar};

use crate::config::{canonical_settings, CommonSettings};
use crate::manifest::Manifest;
use crate::CliError;

/// The demo mixture ground truth: four components at (-3, 0, 3, 6), common
/// sigma 0.55, uniform prior on [-10, 10]^4, one hundred observations.
pub const MIXTURE_TRUE_MEANS: [f64; 4] = [-3.0, 0.0, 3.0, 6.0];
pub const MIXTURE_SIGMA: f64 = 0.55;
pub const MIXTURE_BOUND: f64 = 10.0;
pub const MIXTURE_OBSERVATIONS: usize = 100;
/// Seed of the regenerated default dataset (distinct from the sampler seed).
pub const DEFAULT_DATA_SEED: u64 = 42;

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))
}

/// Simulates the default mixture dataset. Data are always generated in
/// double precision so that single- and double-precision runs of the same
/// experiment see the same observations.
pub fn default_mixture_data(data_seed: u64) -> Vec<f64> {
    let mut stream: Stream<f64> =
        make_streams(GeneratorKind::Mrg32k3a, data_seed, 1, DEFAULT_BLOCK_LEN)
            .expect("one stream")
            .pop()
            .expect("one stream");
    simulate_mixture_data(
        &MIXTURE_TRUE_MEANS,
        MIXTURE_OBSERVATIONS,
        MIXTURE_SIGMA,
        &mut stream,
    )
}

fn load_column_data(path: &Path) -> Result<Vec<f64>, CliError> {
    let (_, rows) = read_matrix_csv(path).map_err(CliError::from)?;
    if rows.iter().any(|r| r.len() != 1) {
        return Err(CliError::Config(format!(
            "{}: expected a single-column observation file",
            path.display()
        )));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

fn mixture_observations(
    data: Option<&Path>,
    data_seed: u64,
) -> Result<Vec<f64>, CliError> {
    match data {
        Some(path) => load_column_data(path),
        None => Ok(default_mixture_data(data_seed)),
    }
}

fn convert<T: Scalar>(values: &[f64]) -> Vec<T> {
    values.iter().map(|&v| T::from_f64_lossy(v)).collect()
}

fn mixture_target<T: Scalar>(observations: &[f64]) -> Result<MixturePosterior<T>, CliError> {
    let model = MixtureModel::new(
        MIXTURE_TRUE_MEANS.len(),
        T::from_f64_lossy(MIXTURE_SIGMA),
        T::from_f64_lossy(MIXTURE_BOUND),
        convert(observations),
    )
    .map_err(CliError::from)?;
    Ok(MixturePosterior::new(model))
}

/// The demo posterior at double precision over single-column observations
/// (used by the benchmark harness).
pub fn mixture_target_f64(observations: &[Vec<f64>]) -> Result<MixturePosterior<f64>, CliError> {
    let flat: Vec<f64> = observations.iter().map(|r| r[0]).collect();
    mixture_target::<f64>(&flat)
}

// ---------------------------------------------------------------------------
// istoy
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct IstoySpec {
    pub common: CommonSettings,
    pub n: usize,
}

pub fn run_istoy(spec: &IstoySpec) -> Result<(), CliError> {
    match spec.common.precision {
        PrecisionMode::Double => istoy_impl::<f64>(spec),
        PrecisionMode::Single => istoy_impl::<f32>(spec),
    }
}

/// The importance-sampling toy: N standard-normal proposals drawn from the
/// master stream, weighted against the two-component mixture, estimating the
/// target's second moment (1.875 in closed form).
pub fn istoy_estimate<T: Scalar>(
    n: usize,
    seed: u64,
    generator: GeneratorKind,
    workers: usize,
) -> Result<(T, T, T), CliError> {
    let mut master: Stream<T> = make_streams(generator, seed, 1, DEFAULT_BLOCK_LEN)
        .map_err(CliError::from)?
        .pop()
        .expect("one stream");
    let samples: Vec<T> = (0..n).map(|_| master.next_gaussian()).collect();
    let est = importance_estimate(
        &samples,
        |&x| toy_log_target(x),
        |&x| log_standard_normal(x),
        |&x| x * x,
        workers,
    )
    .map_err(CliError::from)?;
    Ok((est.estimate, est.std_error, est.ess))
}

fn istoy_impl<T: Scalar>(spec: &IstoySpec) -> Result<(), CliError> {
    if spec.n == 0 {
        return Err(CliError::Config("sample count must be positive".into()));
    }
    let start = Instant::now();
    ensure_out_dir(&spec.common.out_dir)?;
    let (estimate, std_error, ess) = istoy_estimate::<T>(
        spec.n,
        spec.common.seed,
        spec.common.generator,
        spec.common.workers,
    )?;
    let estimate_path = spec.common.out_dir.join("estimate.csv");
    write_record_csv(
        &estimate_path,
        &["n", "estimate", "std_error", "ess"],
        &[vec![
            spec.n.to_string(),
            estimate.to_string(),
            std_error.to_string(),
            ess.to_string(),
        ]],
    )
    .map_err(CliError::from)?;
    let settings = canonical_settings(
        "istoy",
        &spec.common,
        &[("n", spec.n.to_string())],
    );
    Manifest::new(
        "istoy",
        settings,
        spec.common.workers,
        spec.common.precision.as_str(),
        start.elapsed().as_secs_f64(),
        vec!["estimate.csv".to_string()],
    )
    .write(&spec.common.out_dir)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gendata
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataModel {
    Mixture,
    Fsv,
    LinearGaussian,
}

impl std::str::FromStr for DataModel {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "mixture" => Ok(DataModel::Mixture),
            "fsv" => Ok(DataModel::Fsv),
            "lg" | "linear-gaussian" => Ok(DataModel::LinearGaussian),
            other => Err(CliError::Config(format!(
                "unknown model '{other}' (expected mixture, fsv or lg)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GendataSpec {
    pub common: CommonSettings,
    pub model: DataModel,
    /// Observation count for the mixture model.
    pub m: usize,
    /// Mixture noise standard deviation.
    pub sigma: f64,
    /// Time steps for the state-space models.
    pub steps: usize,
}

/// Simulates a dataset and writes it as CSV; state-space models also write
/// the simulated latent path. Data generation always runs in double
/// precision.
pub fn run_gendata(spec: &GendataSpec) -> Result<(), CliError> {
    let start = Instant::now();
    ensure_out_dir(&spec.common.out_dir)?;
    let mut stream: Stream<f64> = make_streams(
        spec.common.generator,
        spec.common.seed,
        1,
        DEFAULT_BLOCK_LEN,
    )
    .map_err(CliError::from)?
    .pop()
    .expect("one stream");
    let mut files = Vec::new();
    let mut extra: Vec<(&str, String)> = Vec::new();
    match spec.model {
        DataModel::Mixture => {
            if spec.m == 0 {
                return Err(CliError::Config("m must be positive".into()));
            }
            if spec.sigma < 0.0 {
                return Err(CliError::Config("sigma must be nonnegative".into()));
            }
            let data =
                simulate_mixture_data(&MIXTURE_TRUE_MEANS, spec.m, spec.sigma, &mut stream);
            let rows: Vec<Vec<f64>> = data.into_iter().map(|y| vec![y]).collect();
            write_matrix_csv(spec.common.out_dir.join("mixture_y.csv"), &["y"], &rows)
                .map_err(CliError::from)?;
            files.push("mixture_y.csv".to_string());
            extra.push(("model", "mixture".to_string()));
            extra.push(("m", spec.m.to_string()));
            extra.push(("sigma", spec.sigma.to_string()));
        }
        DataModel::Fsv => {
            if spec.steps == 0 {
                return Err(CliError::Config("steps must be positive".into()));
            }
            let params: FsvParams<f64> = FsvParams::default_model();
            let (states, obs) = params.simulate(spec.steps, &mut stream);
            write_matrix_csv(
                spec.common.out_dir.join("fsv_y.csv"),
                &["y1", "y2", "y3", "y4", "y5"],
                &obs,
            )
            .map_err(CliError::from)?;
            write_matrix_csv(
                spec.common.out_dir.join("fsv_x.csv"),
                &["x1", "x2", "x3"],
                &states,
            )
            .map_err(CliError::from)?;
            files.push("fsv_y.csv".to_string());
            files.push("fsv_x.csv".to_string());
            extra.push(("model", "fsv".to_string()));
            extra.push(("steps", spec.steps.to_string()));
        }
        DataModel::LinearGaussian => {
            if spec.steps == 0 {
                return Err(CliError::Config("steps must be positive".into()));
            }
            let model: LinearGaussianSsm<f64> = LinearGaussianSsm::default_model();
            let (states, obs) = model.simulate(spec.steps, &mut stream);
            let obs_rows: Vec<Vec<f64>> = obs.into_iter().map(|y| vec![y]).collect();
            let state_rows: Vec<Vec<f64>> = states.into_iter().map(|x| vec![x]).collect();
            write_matrix_csv(spec.common.out_dir.join("lg_y.csv"), &["y"], &obs_rows)
                .map_err(CliError::from)?;
            write_matrix_csv(spec.common.out_dir.join("lg_x.csv"), &["x"], &state_rows)
                .map_err(CliError::from)?;
            files.push("lg_y.csv".to_string());
            files.push("lg_x.csv".to_string());
            extra.push(("model", "lg".to_string()));
            extra.push(("steps", spec.steps.to_string()));
        }
    }
    let settings = canonical_settings("gendata", &spec.common, &extra);
    Manifest::new(
        "gendata",
        settings,
        spec.common.workers,
        spec.common.precision.as_str(),
        start.elapsed().as_secs_f64(),
        files,
    )
    .write(&spec.common.out_dir)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// popmcmc
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct PopmcmcSpec {
    pub common: CommonSettings,
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub rwm_scale: f64,
    pub data: Option<PathBuf>,
    pub data_seed: u64,
    pub histogram: bool,
    pub traversal: bool,
    pub kde: bool,
    pub all_chains: bool,
}

pub fn run_popmcmc_experiment(spec: &PopmcmcSpec) -> Result<(), CliError> {
    match spec.common.precision {
        PrecisionMode::Double => popmcmc_impl::<f64>(spec),
        PrecisionMode::Single => popmcmc_impl::<f32>(spec),
    }
}

fn popmcmc_impl<T: Scalar>(spec: &PopmcmcSpec) -> Result<(), CliError> {
    let start = Instant::now();
    ensure_out_dir(&spec.common.out_dir)?;
    let observations = mixture_observations(spec.data.as_deref(), spec.data_seed)?;
    let target = mixture_target::<T>(&observations)?;
    let config = PopMcmcConfig {
        chains: spec.chains,
        iterations: spec.iterations,
        burn_in: spec.burn_in,
        rwm_scale: spec.rwm_scale,
        seed: spec.common.seed,
        workers: spec.common.workers,
        generator: spec.common.generator,
        keep_all_chains: spec.all_chains,
    };
    let run = run_popmcmc(&config, &target).map_err(CliError::from)?;
    let mut files = Vec::new();

    write_matrix_csv(
        spec.common.out_dir.join("samples.csv"),
        &["mu1", "mu2", "mu3", "mu4"],
        &run.samples,
    )
    .map_err(CliError::from)?;
    files.push("samples.csv".to_string());

    write_trace(&spec.common.out_dir, &run)?;
    files.push("trace.csv".to_string());

    if spec.all_chains {
        if let Some(all) = &run.all_chain_samples {
            let mut rows = Vec::new();
            for (iteration, chains) in all.iter().enumerate() {
                for (chain, state) in chains.iter().enumerate() {
                    let mut row = vec![iteration.to_string(), chain.to_string()];
                    row.extend(state.iter().map(|v| v.to_string()));
                    rows.push(row);
                }
            }
            write_record_csv(
                spec.common.out_dir.join("all_chains.csv"),
                &["iteration", "chain", "mu1", "mu2", "mu3", "mu4"],
                &rows,
            )
            .map_err(CliError::from)?;
            files.push("all_chains.csv".to_string());
        }
    }

    let atlas: ModeAtlas<T> = ModeAtlas::default_mixture();
    if spec.histogram {
        let hist = mode_counts(&run.samples, None, &atlas, false);
        write_histogram(&spec.common.out_dir, &hist.counts, hist.unassigned)?;
        files.push("histogram.csv".to_string());
    }
    if spec.traversal {
        let assignments = run.samples.iter().map(|s| atlas.assign_mode(s));
        let time = traversal_time(assignments, atlas.full_mode_count());
        let seen: usize = {
            let hist = mode_counts(&run.samples, None, &atlas, false);
            hist.occupied()
        };
        let json = format!(
            "{{\n  \"traversed\": {},\n  \"iterations\": {},\n  \"modes_seen\": {},\n  \"mode_count\": {},\n  \"coupon_expectation\": {}\n}}\n",
            time.is_some(),
            time.map_or("null".to_string(), |t| t.to_string()),
            seen,
            atlas.full_mode_count(),
            coupon_expectation(atlas.full_mode_count()),
        );
        std::fs::write(spec.common.out_dir.join("traversal.json"), json)
            .map_err(|e| CliError::Io(e.to_string()))?;
        files.push("traversal.json".to_string());
    }
    if spec.kde {
        let points: Vec<(f64, f64)> = run
            .samples
            .iter()
            .map(|s| (s[0].to_f64_lossy(), s[1].to_f64_lossy()))
            .collect();
        write_kde(&spec.common.out_dir, &points, None)?;
        files.push("kde.csv".to_string());
    }

    let settings = canonical_settings(
        "popmcmc",
        &spec.common,
        &[
            ("chains", spec.chains.to_string()),
            ("iterations", spec.iterations.to_string()),
            ("burn-in", spec.burn_in.to_string()),
            ("rwm-scale", spec.rwm_scale.to_string()),
            ("data-seed", spec.data_seed.to_string()),
            (
                "data",
                spec.data
                    .as_ref()
                    .map_or("<regenerated>".to_string(), |p| p.display().to_string()),
            ),
        ],
    );
    Manifest::new(
        "popmcmc",
        settings,
        spec.common.workers,
        spec.common.precision.as_str(),
        start.elapsed().as_secs_f64(),
        files,
    )
    .write(&spec.common.out_dir)?;
    Ok(())
}

fn write_trace<T: Scalar>(out_dir: &Path, run: &PopMcmcRun<T>) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for (chain, &beta) in run.betas.iter().enumerate() {
        let accepts = run.rwm_accepts[chain];
        let rate = accepts as f64 / run.rwm_steps as f64;
        let swap_attempts = run.swap_attempts[chain];
        let swap_accepts = run.swap_accepts[chain];
        let swap_rate = if swap_attempts > 0 {
            swap_accepts as f64 / swap_attempts as f64
        } else {
            0.0
        };
        rows.push(vec![
            chain.to_string(),
            beta.to_string(),
            accepts.to_string(),
            run.rwm_steps.to_string(),
            rate.to_string(),
            swap_attempts.to_string(),
            swap_accepts.to_string(),
            swap_rate.to_string(),
        ]);
    }
    write_record_csv(
        out_dir.join("trace.csv"),
        &[
            "chain",
            "beta",
            "rwm_accepts",
            "rwm_steps",
            "rwm_rate",
            "swap_attempts",
            "swap_accepts",
            "swap_rate",
        ],
        &rows,
    )
    .map_err(CliError::from)
}

fn write_histogram(out_dir: &Path, counts: &[f64], unassigned: f64) -> Result<(), CliError> {
    let mut rows: Vec<Vec<String>> = counts
        .iter()
        .enumerate()
        .map(|(i, c)| vec![i.to_string(), c.to_string()])
        .collect();
    rows.push(vec!["-1".to_string(), unassigned.to_string()]);
    write_record_csv(
        out_dir.join("histogram.csv"),
        &["mode_id", "count_or_weight"],
        &rows,
    )
    .map_err(CliError::from)
}

fn write_kde(
    out_dir: &Path,
    points: &[(f64, f64)],
    weights: Option<&[f64]>,
) -> Result<(), CliError> {
    let grid = kde_grid_2d(points, weights, (-MIXTURE_BOUND, MIXTURE_BOUND), 101, None);
    let rows: Vec<Vec<f64>> = grid.into_iter().map(|(x, y, d)| vec![x, y, d]).collect();
    write_matrix_csv(out_dir.join("kde.csv"), &["x", "y", "density"], &rows)
        .map_err(CliError::from)
}

// ---------------------------------------------------------------------------
// smc-sampler
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SmcSpec {
    pub common: CommonSettings,
    pub particles: usize,
    pub temperatures: usize,
    pub mcmc_steps: usize,
    pub ess_threshold: f64,
    pub resampler: Resampler,
    pub rwm_scale: f64,
    pub data: Option<PathBuf>,
    pub data_seed: u64,
    pub histogram: bool,
    pub kde: bool,
}

pub fn run_smc_experiment(spec: &SmcSpec) -> Result<(), CliError> {
    match spec.common.precision {
        PrecisionMode::Double => smc_impl::<f64>(spec),
        PrecisionMode::Single => smc_impl::<f32>(spec),
    }
}

fn smc_impl<T: Scalar>(spec: &SmcSpec) -> Result<(), CliError> {
    let start = Instant::now();
    ensure_out_dir(&spec.common.out_dir)?;
    let observations = mixture_observations(spec.data.as_deref(), spec.data_seed)?;
    let target = mixture_target::<T>(&observations)?;
    let config = SmcSamplerConfig {
        particles: spec.particles,
        temperatures: spec.temperatures,
        mcmc_steps: spec.mcmc_steps,
        ess_threshold: spec.ess_threshold,
        resampler: spec.resampler,
        rwm_scale: spec.rwm_scale,
        seed: spec.common.seed,
        workers: spec.common.workers,
        generator: spec.common.generator,
    };
    let run = smc_sampler_run(&config, &target).map_err(CliError::from)?;
    let mut files = Vec::new();

    let particle_rows: Vec<Vec<T>> = run
        .cloud
        .population
        .items
        .iter()
        .zip(&run.final_weights.weights)
        .map(|(state, &w)| {
            let mut row = state.position.clone();
            row.push(w);
            row
        })
        .collect();
    write_matrix_csv(
        spec.common.out_dir.join("particles.csv"),
        &["mu1", "mu2", "mu3", "mu4", "weight"],
        &particle_rows,
    )
    .map_err(CliError::from)?;
    files.push("particles.csv".to_string());

    let trace_rows: Vec<Vec<String>> = run
        .trace
        .iter()
        .map(|row| {
            vec![
                row.step.to_string(),
                row.beta.to_string(),
                row.ess.to_string(),
                (row.resampled as u8).to_string(),
            ]
        })
        .collect();
    write_record_csv(
        spec.common.out_dir.join("ess_trace.csv"),
        &["step", "beta", "ess", "resampled"],
        &trace_rows,
    )
    .map_err(CliError::from)?;
    files.push("ess_trace.csv".to_string());

    if spec.histogram {
        // Effective mass per marginal mode (weights, not heads).
        let atlas: ModeAtlas<T> = ModeAtlas::default_mixture();
        let positions: Vec<Vec<T>> = run
            .cloud
            .population
            .items
            .iter()
            .map(|s| s.position.clone())
            .collect();
        let hist = mode_counts(
            &positions,
            Some(&run.final_weights.weights),
            &atlas,
            true,
        );
        write_histogram(&spec.common.out_dir, &hist.counts, hist.unassigned)?;
        files.push("histogram.csv".to_string());
    }
    if spec.kde {
        let points: Vec<(f64, f64)> = run
            .cloud
            .population
            .items
            .iter()
            .map(|s| (s.position[0].to_f64_lossy(), s.position[1].to_f64_lossy()))
            .collect();
        let weights: Vec<f64> = run
            .final_weights
            .weights
            .iter()
            .map(|w| w.to_f64_lossy())
            .collect();
        write_kde(&spec.common.out_dir, &points, Some(&weights))?;
        files.push("kde.csv".to_string());
    }

    let settings = canonical_settings(
        "smc-sampler",
        &spec.common,
        &[
            ("particles", spec.particles.to_string()),
            ("temperatures", spec.temperatures.to_string()),
            ("mcmc-steps", spec.mcmc_steps.to_string()),
            ("ess-threshold", spec.ess_threshold.to_string()),
            ("resampler", spec.resampler.to_string()),
            ("rwm-scale", spec.rwm_scale.to_string()),
            ("data-seed", spec.data_seed.to_string()),
            (
                "data",
                spec.data
                    .as_ref()
                    .map_or("<regenerated>".to_string(), |p| p.display().to_string()),
            ),
        ],
    );
    Manifest::new(
        "smc-sampler",
        settings,
        spec.common.workers,
        spec.common.precision.as_str(),
        start.elapsed().as_secs_f64(),
        files,
    )
    .write(&spec.common.out_dir)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// pfilter
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct PfilterSpec {
    pub common: CommonSettings,
    pub particles: usize,
    pub ess_threshold: f64,
    pub resampler: Resampler,
    pub model: DataModel,
    pub data: Option<PathBuf>,
    pub data_seed: u64,
    /// Steps to simulate when no data file is given.
    pub steps: usize,
}

pub fn run_pfilter_experiment(spec: &PfilterSpec) -> Result<(), CliError> {
    match spec.common.precision {
        PrecisionMode::Double => pfilter_impl::<f64>(spec),
        PrecisionMode::Single => pfilter_impl::<f32>(spec),
    }
}

fn pfilter_impl<T: Scalar>(spec: &PfilterSpec) -> Result<(), CliError> {
    let start = Instant::now();
    ensure_out_dir(&spec.common.out_dir)?;
    let mut files = Vec::new();

    // Load observations, or simulate them (in double precision) and record
    // the simulated truth beside the filter outputs.
    let observations_f64: Vec<Vec<f64>> = match (&spec.data, spec.model) {
        (Some(path), _) => read_matrix_csv(path).map_err(CliError::from)?.1,
        (None, DataModel::Fsv) => {
            let mut stream: Stream<f64> = make_streams(
                GeneratorKind::Mrg32k3a,
                spec.data_seed,
                1,
                DEFAULT_BLOCK_LEN,
            )
            .map_err(CliError::from)?
            .pop()
            .expect("one stream");
            let params: FsvParams<f64> = FsvParams::default_model();
            let (states, obs) = params.simulate(spec.steps, &mut stream);
            write_matrix_csv(
                spec.common.out_dir.join("sim_y.csv"),
                &["y1", "y2", "y3", "y4", "y5"],
                &obs,
            )
            .map_err(CliError::from)?;
            write_matrix_csv(
                spec.common.out_dir.join("sim_x.csv"),
                &["x1", "x2", "x3"],
                &states,
            )
            .map_err(CliError::from)?;
            files.push("sim_y.csv".to_string());
            files.push("sim_x.csv".to_string());
            obs
        }
        (None, DataModel::LinearGaussian) => {
            let mut stream: Stream<f64> = make_streams(
                GeneratorKind::Mrg32k3a,
                spec.data_seed,
                1,
                DEFAULT_BLOCK_LEN,
            )
            .map_err(CliError::from)?
            .pop()
            .expect("one stream");
            let model: LinearGaussianSsm<f64> = LinearGaussianSsm::default_model();
            let (states, obs) = model.simulate(spec.steps, &mut stream);
            write_matrix_csv(
                spec.common.out_dir.join("sim_y.csv"),
                &["y"],
                &obs.iter().map(|&y| vec![y]).collect::<Vec<_>>(),
            )
            .map_err(CliError::from)?;
            write_matrix_csv(
                spec.common.out_dir.join("sim_x.csv"),
                &["x"],
                &states.iter().map(|&x| vec![x]).collect::<Vec<_>>(),
            )
            .map_err(CliError::from)?;
            files.push("sim_y.csv".to_string());
            files.push("sim_x.csv".to_string());
            obs.into_iter().map(|y| vec![y]).collect()
        }
        (None, DataModel::Mixture) => {
            return Err(CliError::Config(
                "pfilter needs a state-space model (fsv or lg)".into(),
            ));
        }
    };
    let observations: Vec<Vec<T>> = observations_f64.iter().map(|r| convert(r)).collect();

    let config = PfilterConfig {
        particles: spec.particles,
        ess_threshold: spec.ess_threshold,
        resampler: spec.resampler,
        seed: spec.common.seed,
        workers: spec.common.workers,
        generator: spec.common.generator,
    };
    let run = match spec.model {
        DataModel::Fsv => {
            let params: FsvParams<T> = FsvParams::default_model();
            particle_filter_run(&config, &params, &observations).map_err(CliError::from)?
        }
        DataModel::LinearGaussian => {
            let model: LinearGaussianSsm<T> = LinearGaussianSsm::default_model();
            particle_filter_run(&config, &model, &observations).map_err(CliError::from)?
        }
        DataModel::Mixture => unreachable!("rejected above"),
    };

    let state_dim = run.filter_means.first().map_or(0, |m| m.len());
    let mean_header: Vec<String> = (1..=state_dim).map(|d| format!("mean_{d}")).collect();
    let std_header: Vec<String> = (1..=state_dim).map(|d| format!("std_{d}")).collect();
    write_matrix_csv(
        spec.common.out_dir.join("means.csv"),
        &mean_header.iter().map(String::as_str).collect::<Vec<_>>(),
        &run.filter_means,
    )
    .map_err(CliError::from)?;
    files.push("means.csv".to_string());
    write_matrix_csv(
        spec.common.out_dir.join("stds.csv"),
        &std_header.iter().map(String::as_str).collect::<Vec<_>>(),
        &run.filter_stds,
    )
    .map_err(CliError::from)?;
    files.push("stds.csv".to_string());

    let resampled: std::collections::BTreeSet<usize> =
        run.resample_events.iter().copied().collect();
    let trace_rows: Vec<Vec<String>> = run
        .ess_trace
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                e.to_string(),
                (resampled.contains(&(i + 1)) as u8).to_string(),
            ]
        })
        .collect();
    write_record_csv(
        spec.common.out_dir.join("ess_trace.csv"),
        &["step", "ess", "resampled"],
        &trace_rows,
    )
    .map_err(CliError::from)?;
    files.push("ess_trace.csv".to_string());

    write_record_csv(
        spec.common.out_dir.join("summary.csv"),
        &["key", "value"],
        &[
            vec![
                "log_likelihood".to_string(),
                run.log_likelihood.to_string(),
            ],
            vec![
                "resample_count".to_string(),
                run.resample_events.len().to_string(),
            ],
            vec!["steps".to_string(), run.ess_trace.len().to_string()],
        ],
    )
    .map_err(CliError::from)?;
    files.push("summary.csv".to_string());

    let settings = canonical_settings(
        "pfilter",
        &spec.common,
        &[
            ("particles", spec.particles.to_string()),
            ("ess-threshold", spec.ess_threshold.to_string()),
            ("resampler", spec.resampler.to_string()),
            (
                "model",
                match spec.model {
                    DataModel::Fsv => "fsv".to_string(),
                    DataModel::LinearGaussian => "lg".to_string(),
                    DataModel::Mixture => "mixture".to_string(),
                },
            ),
            ("data-seed", spec.data_seed.to_string()),
            ("steps", spec.steps.to_string()),
            (
                "data",
                spec.data
                    .as_ref()
                    .map_or("<simulated>".to_string(), |p| p.display().to_string()),
            ),
        ],
    );
    Manifest::new(
        "pfilter",
        settings,
        spec.common.workers,
        spec.common.precision.as_str(),
        start.elapsed().as_secs_f64(),
        files,
    )
    .write(&spec.common.out_dir)?;
    Ok(())
}
