//! popmc: parallel Monte Carlo experiments from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use popmc::bench::{run_bench, BenchExperiment, BenchSpec};
use popmc::config::{resolve_common, CommonFlags, ConfigMap, Resolver};
use popmc::experiments::{
    run_gendata, run_istoy, run_pfilter_experiment, run_popmcmc_experiment, run_smc_experiment,
    DataModel, GendataSpec, IstoySpec, PfilterSpec, PopmcmcSpec, SmcSpec, DEFAULT_DATA_SEED,
};
use popmc::CliError;
use popmc_core::smc::Resampler;

#[derive(Parser)]
#[command(
    name = "popmc",
    version,
    about = "Data-parallel Monte Carlo experiments: population MCMC, SMC samplers, particle filters",
    long_about = "Runs the bundled experiments with paper-shaped defaults and writes \
                  deterministic CSV artifacts plus a manifest.json per run. Settings resolve \
                  as: built-in defaults, then --config file entries, then command-line flags."
)]
struct Cli {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory artifacts are written into.
    #[arg(long, global = true, value_name = "PATH")]
    out_dir: Option<PathBuf>,

    /// Master seed of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; results are bit-identical for any value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Floating-point width of the run: single or double.
    #[arg(long, global = true)]
    precision: Option<String>,

    /// Uniform generator: mrg32k3a or xorshift.
    #[arg(long, global = true)]
    generator: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Importance-sampling toy: estimate E[X^2] of a two-component normal
    /// mixture from standard-normal proposals.
    Istoy {
        /// Number of proposal samples.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Population MCMC with parallel tempering on the mixture posterior.
    Popmcmc {
        #[command(flatten)]
        opts: PopmcmcOpts,
    },
    /// Tempered SMC sampler on the mixture posterior.
    SmcSampler {
        #[command(flatten)]
        opts: SmcOpts,
    },
    /// Bootstrap particle filter on a state-space model.
    Pfilter {
        #[command(flatten)]
        opts: PfilterOpts,
    },
    /// Worker-scaling benchmark over a ladder of problem sizes.
    Bench {
        #[command(flatten)]
        opts: BenchOpts,
    },
    /// Simulate a dataset (mixture observations or state-space paths).
    Gendata {
        #[command(flatten)]
        opts: GendataOpts,
    },
}

#[derive(Args)]
struct PopmcmcOpts {
    /// Number of tempered chains M.
    #[arg(long)]
    chains: Option<usize>,
    /// Samples to record from the target chain.
    #[arg(long)]
    iterations: Option<usize>,
    /// Iterations discarded before recording.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Random-walk proposal standard deviation.
    #[arg(long)]
    rwm_scale: Option<f64>,
    /// Observation CSV (single column); regenerated from --data-seed if absent.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Seed of the regenerated default dataset.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Also write the per-mode sample histogram.
    #[arg(long)]
    histogram: bool,
    /// Also write the mode-traversal summary.
    #[arg(long)]
    traversal: bool,
    /// Also write a 2-D kernel density grid of the first two coordinates.
    #[arg(long)]
    kde: bool,
    /// Also record every auxiliary chain (memory heavy).
    #[arg(long)]
    all_chains: bool,
}

#[derive(Args)]
struct SmcOpts {
    /// Number of particles N.
    #[arg(long)]
    particles: Option<usize>,
    /// Number of tempering steps.
    #[arg(long)]
    temperatures: Option<usize>,
    /// MCMC moves per temperature.
    #[arg(long)]
    mcmc_steps: Option<usize>,
    /// Resample when ESS/N drops below this; 0 disables resampling (AIS).
    #[arg(long)]
    ess_threshold: Option<f64>,
    /// multinomial or systematic.
    #[arg(long)]
    resampler: Option<String>,
    /// Random-walk proposal standard deviation.
    #[arg(long)]
    rwm_scale: Option<f64>,
    /// Observation CSV (single column); regenerated from --data-seed if absent.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Seed of the regenerated default dataset.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Also write the weighted marginal-mode histogram.
    #[arg(long)]
    histogram: bool,
    /// Also write a weighted 2-D kernel density grid.
    #[arg(long)]
    kde: bool,
}

#[derive(Args)]
struct PfilterOpts {
    /// Number of particles N.
    #[arg(long)]
    particles: Option<usize>,
    /// Resample when ESS/N drops below this.
    #[arg(long)]
    ess_threshold: Option<f64>,
    /// multinomial or systematic.
    #[arg(long)]
    resampler: Option<String>,
    /// State-space model: fsv or lg.
    #[arg(long)]
    model: Option<String>,
    /// Observation CSV; simulated from --data-seed if absent.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Seed of the simulated dataset.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Steps to simulate when no data file is given.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct BenchOpts {
    /// Workload: popmcmc, smc-sampler or pfilter.
    #[arg(long)]
    experiment: Option<String>,
    /// Population sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Worker counts, comma separated (include 1 for speedup baselines).
    #[arg(long, value_delimiter = ',')]
    workers_list: Option<Vec<usize>>,
    /// Repetitions per cell; the median is reported.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args)]
struct GendataOpts {
    /// mixture, fsv or lg.
    #[arg(long)]
    model: Option<String>,
    /// Observation count for the mixture model.
    #[arg(long)]
    m: Option<usize>,
    /// Mixture noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Time steps for the state-space models.
    #[arg(long)]
    steps: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    let common_flags = CommonFlags {
        seed: cli.seed,
        workers: cli.workers,
        precision: cli.precision.clone(),
        generator: cli.generator.clone(),
        out_dir: cli.out_dir.clone(),
    };
    let common = resolve_common(&common_flags, &config)?;
    let r = Resolver::new(&config);
    match cli.command {
        Command::Istoy { n } => {
            let n = r.parsed("n", n, 16_777_216usize)?;
            run_istoy(&IstoySpec { common, n })
        }
        Command::Popmcmc { opts } => {
            let spec = PopmcmcSpec {
                chains: r.parsed("chains", opts.chains, 200usize)?,
                iterations: r.parsed("iterations", opts.iterations, 8192usize)?,
                burn_in: r.parsed("burn-in", opts.burn_in, 0usize)?,
                rwm_scale: r.parsed("rwm-scale", opts.rwm_scale, 1.0f64)?,
                data: r.path("data", opts.data),
                data_seed: r.parsed("data-seed", opts.data_seed, DEFAULT_DATA_SEED)?,
                histogram: opts.histogram,
                traversal: opts.traversal,
                kde: opts.kde,
                all_chains: opts.all_chains,
                common,
            };
            run_popmcmc_experiment(&spec)
        }
        Command::SmcSampler { opts } => {
            let resampler_raw =
                r.parsed("resampler", opts.resampler, "multinomial".to_string())?;
            let spec = SmcSpec {
                particles: r.parsed("particles", opts.particles, 8192usize)?,
                temperatures: r.parsed("temperatures", opts.temperatures, 200usize)?,
                mcmc_steps: r.parsed("mcmc-steps", opts.mcmc_steps, 10usize)?,
                ess_threshold: r.parsed("ess-threshold", opts.ess_threshold, 0.5f64)?,
                resampler: resampler_raw
                    .parse::<Resampler>()
                    .map_err(|e| CliError::Config(e.to_string()))?,
                rwm_scale: r.parsed("rwm-scale", opts.rwm_scale, 1.0f64)?,
                data: r.path("data", opts.data),
                data_seed: r.parsed("data-seed", opts.data_seed, DEFAULT_DATA_SEED)?,
                histogram: opts.histogram,
                kde: opts.kde,
                common,
            };
            run_smc_experiment(&spec)
        }
        Command::Pfilter { opts } => {
            let resampler_raw =
                r.parsed("resampler", opts.resampler, "multinomial".to_string())?;
            let model_raw = r.parsed("model", opts.model, "fsv".to_string())?;
            let spec = PfilterSpec {
                particles: r.parsed("particles", opts.particles, 8192usize)?,
                ess_threshold: r.parsed("ess-threshold", opts.ess_threshold, 0.5f64)?,
                resampler: resampler_raw
                    .parse::<Resampler>()
                    .map_err(|e| CliError::Config(e.to_string()))?,
                model: model_raw.parse::<DataModel>()?,
                data: r.path("data", opts.data),
                data_seed: r.parsed("data-seed", opts.data_seed, DEFAULT_DATA_SEED)?,
                steps: r.parsed("steps", opts.steps, 200usize)?,
                common,
            };
            run_pfilter_experiment(&spec)
        }
        Command::Bench { opts } => {
            let experiment_raw = r.parsed("experiment", opts.experiment, "popmcmc".to_string())?;
            let experiment = experiment_raw.parse::<BenchExperiment>()?;
            let sizes = match opts.sizes {
                Some(sizes) => sizes,
                None => match config.get("sizes") {
                    Some(raw) => parse_usize_list(raw)?,
                    None => experiment.default_sizes(),
                },
            };
            let workers_list = match opts.workers_list {
                Some(list) => list,
                None => match config.get("workers-list") {
                    Some(raw) => parse_usize_list(raw)?,
                    None => vec![1, popmc::config::default_workers()],
                },
            };
            let spec = BenchSpec {
                experiment,
                sizes,
                workers_list,
                reps: r.parsed("reps", opts.reps, 3usize)?,
                common,
            };
            run_bench(&spec)
        }
        Command::Gendata { opts } => {
            let model_raw = r.parsed("model", opts.model, "mixture".to_string())?;
            let spec = GendataSpec {
                model: model_raw.parse::<DataModel>()?,
                m: r.parsed("m", opts.m, 100usize)?,
                sigma: r.parsed("sigma", opts.sigma, 0.55f64)?,
                steps: r.parsed("steps", opts.steps, 200usize)?,
                common,
            };
            run_gendata(&spec)
        }
    }
}

fn parse_usize_list(raw: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Config(format!("list entry '{s}': {e}")))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("popmc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
