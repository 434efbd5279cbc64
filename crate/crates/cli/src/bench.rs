//! CPU worker-scaling benchmark: times the samplers at a ladder of sizes and
//! worker counts and reports medians and speedups against one worker. The
//! table mirrors the shape size / time / speedup; absolute numbers are
//! machine-specific, the scaling shape is the interesting part.

use std::time::Instant;

use popmc_core::models::FsvParams;
use popmc_core::popmcmc::{run_popmcmc, PopMcmcConfig};
use popmc_core::prng::{make_streams, Stream, DEFAULT_BLOCK_LEN};
use popmc_core::smc::{particle_filter_run, smc_sampler_run, PfilterConfig, SmcSamplerConfig};
use popmc_core::GeneratorKind;

use crate::config::CommonSettings;
use crate::experiments::{default_mixture_data, mixture_target_f64};
use crate::manifest::Manifest;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchExperiment {
    Popmcmc,
    SmcSampler,
    Pfilter,
}

impl std::str::FromStr for BenchExperiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "popmcmc" => Ok(BenchExperiment::Popmcmc),
            "smc-sampler" => Ok(BenchExperiment::SmcSampler),
            "pfilter" => Ok(BenchExperiment::Pfilter),
            other => Err(CliError::Config(format!(
                "unknown bench experiment '{other}'"
            ))),
        }
    }
}

impl BenchExperiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchExperiment::Popmcmc => "popmcmc",
            BenchExperiment::SmcSampler => "smc-sampler",
            BenchExperiment::Pfilter => "pfilter",
        }
    }

    pub fn default_sizes(&self) -> Vec<usize> {
        match self {
            BenchExperiment::Popmcmc => vec![256, 512, 1024, 2048],
            BenchExperiment::SmcSampler => vec![1024, 2048, 4096, 8192],
            BenchExperiment::Pfilter => vec![2048, 4096, 8192, 16384],
        }
    }
}

/// Fixed per-experiment workloads; size scales the population, everything
/// else stays constant so timings scale with the size axis alone.
const BENCH_POPMCMC_ITERATIONS: usize = 192;
const BENCH_SMC_TEMPERATURES: usize = 20;
const BENCH_SMC_MCMC_STEPS: usize = 10;
const BENCH_PFILTER_STEPS: usize = 200;

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub experiment: String,
    pub size: usize,
    pub workers: usize,
    pub median_seconds: f64,
    pub speedup_vs_one: f64,
}

#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub common: CommonSettings,
    pub experiment: BenchExperiment,
    pub sizes: Vec<usize>,
    pub workers_list: Vec<usize>,
    pub reps: usize,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    xs[xs.len() / 2]
}

/// One timed run of the benchmark workload at the given size and workers.
fn run_once(
    experiment: BenchExperiment,
    size: usize,
    workers: usize,
    seed: u64,
    generator: GeneratorKind,
    observations: &[Vec<f64>],
) -> Result<f64, CliError> {
    match experiment {
        BenchExperiment::Popmcmc => {
            let target = mixture_target_f64(observations)?;
            let config = PopMcmcConfig {
                chains: size,
                iterations: BENCH_POPMCMC_ITERATIONS,
                burn_in: 0,
                rwm_scale: 1.0,
                seed,
                workers,
                generator,
                keep_all_chains: false,
            };
            let start = Instant::now();
            run_popmcmc(&config, &target).map_err(CliError::from)?;
            Ok(start.elapsed().as_secs_f64())
        }
        BenchExperiment::SmcSampler => {
            let target = mixture_target_f64(observations)?;
            let config = SmcSamplerConfig {
                particles: size,
                temperatures: BENCH_SMC_TEMPERATURES,
                mcmc_steps: BENCH_SMC_MCMC_STEPS,
                seed,
                workers,
                generator,
                ..SmcSamplerConfig::default()
            };
            let start = Instant::now();
            smc_sampler_run(&config, &target).map_err(CliError::from)?;
            Ok(start.elapsed().as_secs_f64())
        }
        BenchExperiment::Pfilter => {
            let params: FsvParams<f64> = FsvParams::default_model();
            let obs: Vec<Vec<f64>> = observations.to_vec();
            let config = PfilterConfig {
                particles: size,
                seed,
                workers,
                generator,
                ..PfilterConfig::default()
            };
            let start = Instant::now();
            particle_filter_run(&config, &params, &obs).map_err(CliError::from)?;
            Ok(start.elapsed().as_secs_f64())
        }
    }
}

/// Runs the benchmark grid and returns one row per (size, workers).
pub fn run_bench_grid(spec: &BenchSpec) -> Result<Vec<BenchRow>, CliError> {
    if spec.sizes.is_empty() {
        return Err(CliError::Config("bench needs at least one size".into()));
    }
    if spec.workers_list.len() < 2 {
        return Err(CliError::Config(
            "bench needs at least two worker counts".into(),
        ));
    }
    if spec.reps == 0 {
        return Err(CliError::Config("reps must be positive".into()));
    }
    // Shared input data, built once outside the timings.
    let observations: Vec<Vec<f64>> = match spec.experiment {
        BenchExperiment::Pfilter => {
            let mut stream: Stream<f64> = make_streams(
                GeneratorKind::Mrg32k3a,
                crate::experiments::DEFAULT_DATA_SEED,
                1,
                DEFAULT_BLOCK_LEN,
            )
            .map_err(CliError::from)?
            .pop()
            .expect("one stream");
            let params: FsvParams<f64> = FsvParams::default_model();
            params.simulate(BENCH_PFILTER_STEPS, &mut stream).1
        }
        _ => default_mixture_data(crate::experiments::DEFAULT_DATA_SEED)
            .into_iter()
            .map(|y| vec![y])
            .collect(),
    };
    let flat_obs: Vec<Vec<f64>> = observations;

    let mut rows = Vec::new();
    for &size in &spec.sizes {
        let mut base_time = None;
        for &workers in &spec.workers_list {
            let mut times = Vec::with_capacity(spec.reps);
            for rep in 0..spec.reps {
                let seed = spec.common.seed.wrapping_add(rep as u64);
                times.push(run_once(
                    spec.experiment,
                    size,
                    workers,
                    seed,
                    spec.common.generator,
                    &flat_obs,
                )?);
            }
            let med = median(times);
            if workers == 1 {
                base_time = Some(med);
            }
            let speedup = base_time.map_or(f64::NAN, |b| b / med);
            rows.push(BenchRow {
                experiment: spec.experiment.as_str().to_string(),
                size,
                workers,
                median_seconds: med,
                speedup_vs_one: speedup,
            });
        }
    }
    Ok(rows)
}

pub fn run_bench(spec: &BenchSpec) -> Result<(), CliError> {
    let start = Instant::now();
    std::fs::create_dir_all(&spec.common.out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", spec.common.out_dir.display())))?;
    let rows = run_bench_grid(spec)?;
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.experiment.clone(),
                r.size.to_string(),
                r.workers.to_string(),
                r.median_seconds.to_string(),
                r.speedup_vs_one.to_string(),
            ]
        })
        .collect();
    popmc_core::io::write_record_csv(
        spec.common.out_dir.join("bench.csv"),
        &["experiment", "size", "workers", "median_seconds", "speedup_vs_one"],
        &records,
    )
    .map_err(CliError::from)?;
    let settings = crate::config::canonical_settings(
        "bench",
        &spec.common,
        &[
            ("experiment", spec.experiment.as_str().to_string()),
            (
                "sizes",
                spec.sizes
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "workers-list",
                spec.workers_list
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("reps", spec.reps.to_string()),
        ],
    );
    Manifest::new(
        "bench",
        settings,
        spec.common.workers,
        spec.common.precision.as_str(),
        start.elapsed().as_secs_f64(),
        vec!["bench.csv".to_string()],
    )
    .write(&spec.common.out_dir)?;
    Ok(())
}
