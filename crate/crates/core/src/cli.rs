//! `unfold` command-line interface.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input validation
//! failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Result, UnfoldError};
use crate::experiments::benchmark::{benchmark, BenchmarkConfig, SpectrumLibrary};
use crate::experiments::dynamic::DynamicSampler;
use crate::experiments::io;
use crate::experiments::landscape::{static_landscape, SamplingMode};
use crate::experiments::synth::{generate_synthetic, generate_synthetic_response, SyntheticShape, SyntheticSpec};
use crate::experiments::LibrarySource;
use crate::fitness::{FitnessFunction, FitnessKind, FitnessParams};
use crate::forward::NoiseSpec;
use crate::metrics::qs_default;
use crate::solver::{run_dea_with, run_ga_with, Algorithm, DeaConfig, GaConfig, GenerationObserver, MutationSign, RunHooks};
use crate::types::{EnergyGrid, Spectrum, UnfoldProblem};

/// Environment variable holding the benchmark worker count.
pub const WORKERS_ENV: &str = "UNFOLD_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "unfold", version, about = "Evolutionary neutron spectrum unfolding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unfold one set of detector counts.
    Unfold(UnfoldArgs),
    /// Run repeated GA/DEA runs over a spectrum library.
    Benchmark(BenchmarkArgs),
    /// Score random candidates with every fitness function.
    Landscape(LandscapeArgs),
    /// Write a synthetic problem directory.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SignArg {
    Difference,
    SumAsPrinted,
}

impl From<SignArg> for MutationSign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Difference => MutationSign::Difference,
            SignArg::SumAsPrinted => MutationSign::SumAsPrinted,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitnessArgs {
    #[arg(long, default_value_t = 0.1)]
    pub beta1: f64,
    #[arg(long, default_value_t = 100.0)]
    pub beta4: f64,
    #[arg(long, default_value_t = 100.0)]
    pub beta6: f64,
    #[arg(long, default_value_t = 100.0)]
    pub beta8: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub epsilon: f64,
    /// Use β1 = β6 = 100, β4 = 1000 (overrides the individual β flags).
    #[arg(long)]
    pub alternate_betas: bool,
}

impl FitnessArgs {
    pub fn params(&self) -> Result<FitnessParams> {
        let p = if self.alternate_betas {
            FitnessParams {
                epsilon: self.epsilon,
                beta8: self.beta8,
                ..FitnessParams::alternate_betas()
            }
        } else {
            FitnessParams {
                beta1: self.beta1,
                beta4: self.beta4,
                beta6: self.beta6,
                beta8: self.beta8,
                epsilon: self.epsilon,
            }
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 200)]
    pub pop: usize,
    #[arg(long, default_value_t = 3000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// GA per-individual mutation probability.
    #[arg(long, default_value_t = 0.1)]
    pub pm: f64,
    /// Crossover probability (GA per pair, DEA per gene).
    #[arg(long, default_value_t = 0.9)]
    pub pc: f64,
    /// DEA scale factor F.
    #[arg(long, default_value_t = 0.5)]
    pub scale_factor: f64,
    #[arg(long, value_enum, default_value = "difference")]
    pub mutation_sign: SignArg,
    /// DEA: do not force one mutant gene into every trial vector.
    #[arg(long)]
    pub no_forced_gene: bool,
    /// GA: carry the best individual into the next population.
    #[arg(long)]
    pub elitism: bool,
}

impl SolverArgs {
    pub fn ga(&self) -> Result<GaConfig> {
        let c = GaConfig {
            population_size: self.pop,
            max_iterations: self.iters,
            mutation_prob: self.pm,
            crossover_prob: self.pc,
            seed: self.seed,
            elitism: self.elitism,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn dea(&self) -> Result<DeaConfig> {
        let c = DeaConfig {
            population_size: self.pop,
            max_iterations: self.iters,
            scale_factor: self.scale_factor,
            crossover_prob: self.pc,
            seed: self.seed,
            mutation_sign: self.mutation_sign.into(),
            forced_gene: !self.no_forced_gene,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct UnfoldArgs {
    #[arg(long)]
    pub response: PathBuf,
    #[arg(long)]
    pub counts: PathBuf,
    /// Reference spectrum; enables Qs reporting.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub algo: Algorithm,
    #[arg(long)]
    pub fitness: FitnessKind,
    /// Output directory for spectrum.csv and trace.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write dynamic.csv: rank-spread (fitness, Qs) samples per generation.
    #[arg(long, requires = "reference")]
    pub dynamic: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub fitness_args: FitnessArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Directory with response.csv and *.spectrum.csv, or a synth.json manifest.
    #[arg(long)]
    pub library: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[arg(long, value_delimiter = ',', default_value = "ga,dea")]
    pub algos: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', default_value = "f1,f2,f3,f4,f5,f6,f7,f8")]
    pub fitness_set: Vec<FitnessKind>,
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse completed cell files in --out.
    #[arg(long)]
    pub resume: bool,
    /// Relative noise for spectra without a counts file.
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub fitness_args: FitnessArgs,
}

#[derive(Debug, Clone, Args)]
pub struct LandscapeArgs {
    #[arg(long)]
    pub response: PathBuf,
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "f1,f2,f3,f4,f5,f6,f7,f8")]
    pub fitness_set: Vec<FitnessKind>,
    /// Sample around the reference within this fraction of each bound
    /// instead of the whole search box.
    #[arg(long)]
    pub centered_radius: Option<f64>,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fitness_args: FitnessArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub shape: SyntheticShape,
    /// Target first-difference penalty of the reference spectrum.
    #[arg(long)]
    pub p1: f64,
    #[arg(long, default_value_t = 15)]
    pub m: usize,
    #[arg(long, default_value_t = 53)]
    pub n: usize,
    /// Seed of the spectrum shape jitter.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub response_seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    /// Base name of the spectrum and counts files.
    #[arg(long, default_value = "reference")]
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// An error tagged with the exit code it maps to.
struct Failure {
    code: i32,
    error: UnfoldError,
}

/// Input loading and flag validation: always a usage error.
fn input<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(|error| Failure { code: EXIT_USAGE, error })
}

/// Work after inputs are accepted.
fn runtime<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(|error| Failure {
        code: if matches!(error, UnfoldError::InvalidConfig(_)) { EXIT_USAGE } else { EXIT_RUNTIME },
        error,
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Unfold(a) => cmd_unfold(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Landscape(a) => cmd_landscape(&a),
        Command::Synth(a) => cmd_synth(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

fn load_problem(response: &Path, counts: &Path) -> Result<UnfoldProblem> {
    UnfoldProblem::new(io::read_response(response)?, io::read_counts(counts)?)
}

fn load_reference(path: &Path, problem: &UnfoldProblem) -> Result<Spectrum> {
    let reference = io::read_spectrum(path)?;
    if reference.len() != problem.groups() {
        return Err(UnfoldError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("reference has {} groups, response has {}", reference.len(), problem.groups()),
        });
    }
    Ok(reference)
}

fn cmd_unfold(a: &UnfoldArgs) -> Result<i32, Failure> {
    let problem = input(load_problem(&a.response, &a.counts))?;
    let reference = input(a.reference.as_deref().map(|p| load_reference(p, &problem)).transpose())?;
    let fitness = input(FitnessFunction::new(a.fitness, a.fitness_args.params()?))?;
    let mut sampler = reference.as_ref().filter(|_| a.dynamic).map(|r| DynamicSampler::new(r.fluence()));
    let hooks = RunHooks {
        reference: reference.as_ref().map(Spectrum::fluence),
        observer: sampler.as_mut().map(|s| s as &mut dyn GenerationObserver),
    };
    let trace = match a.algo {
        Algorithm::Ga => {
            let config = input(a.solver.ga())?;
            runtime(run_ga_with(&problem, &fitness, &config, hooks))?
        }
        Algorithm::Dea => {
            let config = input(a.solver.dea())?;
            runtime(run_dea_with(&problem, &fitness, &config, hooks))?
        }
    };

    let grid = match &reference {
        Some(r) => r.grid().clone(),
        None => Arc::new(EnergyGrid::with_groups(problem.groups())),
    };
    let solution = runtime(Spectrum::new(grid, trace.history_best.genes.clone()))?;
    runtime(io::write_spectrum(&a.out.join("spectrum.csv"), &solution))?;
    runtime(io::write_trace(&a.out.join("trace.csv"), &trace))?;
    if let Some(s) = &sampler {
        runtime(io::write_atomic(&a.out.join("dynamic.csv"), &s.to_csv()))?;
    }
    if let Some(r) = &reference {
        let history = runtime(qs_default(r.fluence(), &trace.history_best.genes))?;
        let last = runtime(qs_default(r.fluence(), &trace.last_best.genes))?;
        println!("history-best Qs = {history:.6}");
        println!("last-best Qs = {last:.6}");
    }
    Ok(EXIT_OK)
}

impl From<UnfoldError> for Failure {
    fn from(error: UnfoldError) -> Self {
        Failure { code: EXIT_USAGE, error }
    }
}

fn worker_count() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| UnfoldError::InvalidConfig(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
    }
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<i32, Failure> {
    let noise = input(NoiseSpec::new(a.sigma, a.noise_seed))?;
    let library = input(SpectrumLibrary::load(&a.library, &noise))?;
    let config = BenchmarkConfig {
        algorithms: a.algos.clone(),
        fitness_kinds: a.fitness_set.clone(),
        runs_per_cell: a.runs,
        base_seed: a.solver.seed,
        ga: input(a.solver.ga())?,
        dea: input(a.solver.dea())?,
        params: a.fitness_args.params()?,
        workers: input(worker_count())?,
        resume: a.resume,
    };
    input(config.validate())?;
    let grid = runtime(benchmark(&library, &config, Some(&a.out)))?;

    for cell in &grid.cells {
        match (&cell.summary, &cell.error) {
            (Some(s), _) => println!(
                "{} {} {}: median Qs {:.4}, mean {:.4} ± {:.4}",
                cell.spectrum, cell.algorithm, cell.fitness, s.qs.median, s.qs.mean, s.qs.stddev
            ),
            (None, e) => eprintln!(
                "{} {} {}: failed: {}",
                cell.spectrum,
                cell.algorithm,
                cell.fitness,
                e.as_deref().unwrap_or("unknown error")
            ),
        }
    }
    Ok(if grid.failed_cells() == grid.cells.len() { EXIT_RUNTIME } else { EXIT_OK })
}

fn cmd_landscape(a: &LandscapeArgs) -> Result<i32, Failure> {
    let problem = input(load_problem(&a.response, &a.counts))?;
    let reference = input(load_reference(&a.reference, &problem))?;
    let mode = match a.centered_radius {
        Some(radius) => SamplingMode::Centered { radius },
        None => SamplingMode::UniformBox,
    };
    let params = a.fitness_args.params()?;
    let landscape = runtime(static_landscape(&problem, &reference, a.samples, &a.fitness_set, params, a.seed, mode))?;
    runtime(io::write_atomic(&a.out, &landscape.to_csv()))?;
    Ok(EXIT_OK)
}

fn cmd_synth(a: &SynthArgs) -> Result<i32, Failure> {
    let noise = input(NoiseSpec::new(a.sigma, a.noise_seed))?;
    let response = input(generate_synthetic_response(a.m, a.n, a.response_seed))?;
    let spec = SyntheticSpec {
        shape: a.shape,
        target_p1: a.p1,
        seed: a.seed,
    };
    let reference = input(generate_synthetic(&spec, &EnergyGrid::with_groups(a.n)))?;
    let library = input(SpectrumLibrary::from_references(
        LibrarySource::Synthetic,
        response,
        vec![(a.name.clone(), reference)],
        &noise,
    ))?;
    runtime(library.write_dir(&a.out))?;
    Ok(EXIT_OK)
}
