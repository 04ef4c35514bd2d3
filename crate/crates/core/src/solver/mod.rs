//! Population-based solvers and the run bookkeeping they share.

pub mod dea;
pub mod ga;

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UnfoldError};
use crate::fitness::{relative_residual_score, FitnessFunction, FitnessKind, Penalties, PopulationContext};
use crate::forward::convolve_into;
use crate::metrics::qs_default;
use crate::types::UnfoldProblem;

pub use dea::{de_crossover, de_mutate, de_select, mutant_vector, run_dea, run_dea_with, DeaConfig, MutationSign, Survivor};
pub use ga::{crossover, mutate, roulette_select, run_ga, run_ga_with, GaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ga,
    Dea,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Ga, Algorithm::Dea];

    pub fn token(self) -> &'static str {
        match self {
            Algorithm::Ga => "ga",
            Algorithm::Dea => "dea",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Algorithm {
    type Err = UnfoldError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ga" => Ok(Algorithm::Ga),
            "dea" | "de" => Ok(Algorithm::Dea),
            other => Err(UnfoldError::InvalidConfig(format!("unknown algorithm {other:?} (expected ga or dea)"))),
        }
    }
}

/// A candidate spectrum and its cached evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genes: Vec<f64>,
    /// Fitness under the run's fitness function, if evaluated.
    pub fitness: Option<f64>,
    /// Relative residual score `Σ (T_j/C_j)²`, if evaluated.
    pub score: Option<f64>,
}

impl Individual {
    pub fn new(genes: Vec<f64>) -> Self {
        Self {
            genes,
            fitness: None,
            score: None,
        }
    }

    pub fn evaluated(genes: Vec<f64>, fitness: f64) -> Self {
        Self {
            genes,
            fitness: Some(fitness),
            score: None,
        }
    }

    /// Cached fitness; NaN when unevaluated so comparisons fail loudly in tests.
    pub fn fitness_or_nan(&self) -> f64 {
        self.fitness.unwrap_or(f64::NAN)
    }

    fn invalidate(&mut self) {
        self.fitness = None;
        self.score = None;
    }
}

/// Called after every generation with the surviving population.
pub trait GenerationObserver {
    fn observe(&mut self, iteration: usize, population: &[Individual]);
}

/// Optional extras for a run: a reference spectrum for Qs bookkeeping and a
/// per-generation observer.
#[derive(Default)]
pub struct RunHooks<'a> {
    pub reference: Option<&'a [f64]>,
    pub observer: Option<&'a mut dyn GenerationObserver>,
}

impl<'a> RunHooks<'a> {
    pub fn with_reference(reference: &'a [f64]) -> Self {
        Self {
            reference: Some(reference),
            observer: None,
        }
    }
}

/// Per-generation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Best fitness in the population after selection.
    pub best_fitness: f64,
    /// Qs of that individual, when a reference was supplied.
    pub best_qs: Option<f64>,
    pub history_best_fitness: f64,
    /// min, lower quartile, median, upper quartile, max of population fitness.
    pub fitness_quantiles: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub fitness: FitnessKind,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    /// Genes of the random starting population.
    pub initial_population: Vec<Vec<f64>>,
    /// Best individual over the whole run: highest fitness, or lowest
    /// residual score for F3 whose values are not comparable across
    /// generations.
    pub history_best: Individual,
    /// Best-fitness individual of the final population.
    pub last_best: Individual,
}

/// Uniform random population inside the search box, each gene in `(0, b_i)`.
pub fn initialize_with<R: Rng + ?Sized>(problem: &UnfoldProblem, size: usize, rng: &mut R) -> Vec<Individual> {
    (0..size)
        .map(|_| Individual::new(random_genes(problem.bounds(), rng)))
        .collect()
}

pub(crate) fn random_genes<R: Rng + ?Sized>(bounds: &[f64], rng: &mut R) -> Vec<f64> {
    bounds.iter().map(|&b| b * rng.sample::<f64, _>(Open01)).collect()
}

/// Evaluates individuals against one problem, reusing a folding buffer.
pub(crate) struct Evaluator<'a> {
    problem: &'a UnfoldProblem,
    fitness: &'a FitnessFunction,
    folded: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(problem: &'a UnfoldProblem, fitness: &'a FitnessFunction) -> Self {
        Self {
            problem,
            fitness,
            folded: vec![0.0; problem.detectors()],
        }
    }

    fn fold(&mut self, genes: &[f64]) -> Result<()> {
        convolve_into(self.problem.response(), genes, &mut self.folded)
    }

    /// Fills in missing scores and fitness values. F3 needs every member's
    /// score first, so for F3 the context is built from `pool` and every
    /// fitness is recomputed.
    pub(crate) fn evaluate_pool(&mut self, pool: &mut [Individual]) -> Result<()> {
        let counts = self.problem.counts().values();
        if self.fitness.needs_context() {
            for ind in pool.iter_mut().filter(|i| i.score.is_none()) {
                self.fold(&ind.genes)?;
                ind.score = Some(relative_residual_score(counts, &self.folded));
            }
            let ctx = PopulationContext::new(pool.iter().map(|i| i.score.unwrap_or(0.0)).collect())?;
            self.rescore_with_context(pool, &ctx)
        } else {
            for ind in pool.iter_mut().filter(|i| i.fitness.is_none()) {
                self.fold(&ind.genes)?;
                let penalties = Penalties::for_kind(self.fitness.kind, &ind.genes)?;
                ind.score = Some(relative_residual_score(counts, &self.folded));
                ind.fitness = Some(self.fitness.score(counts, &self.folded, penalties, None)?);
            }
            Ok(())
        }
    }

    /// F3 only: recomputes fitness of already-scored individuals under `ctx`.
    pub(crate) fn rescore_with_context(&mut self, pool: &mut [Individual], ctx: &PopulationContext) -> Result<()> {
        let counts = self.problem.counts().values();
        for ind in pool.iter_mut() {
            self.fold(&ind.genes)?;
            ind.fitness = Some(self.fitness.score(counts, &self.folded, Penalties::default(), Some(ctx))?);
        }
        Ok(())
    }

    /// Residual score only (used to assemble F3 contexts).
    pub(crate) fn ensure_score(&mut self, ind: &mut Individual) -> Result<f64> {
        if let Some(s) = ind.score {
            return Ok(s);
        }
        self.fold(&ind.genes)?;
        let s = relative_residual_score(self.problem.counts().values(), &self.folded);
        ind.score = Some(s);
        Ok(s)
    }
}

/// Tracks the best individual seen over a run.
pub(crate) struct HistoryBest {
    by_score: bool,
    best: Option<Individual>,
}

impl HistoryBest {
    pub(crate) fn new(kind: FitnessKind) -> Self {
        Self {
            by_score: kind.needs_context(),
            best: None,
        }
    }

    pub(crate) fn offer(&mut self, candidate: &Individual) {
        let better = match &self.best {
            None => true,
            Some(best) if self.by_score => candidate.score.unwrap_or(f64::INFINITY) < best.score.unwrap_or(f64::INFINITY),
            Some(best) => candidate.fitness_or_nan() > best.fitness_or_nan(),
        };
        if better {
            self.best = Some(candidate.clone());
        }
    }

    pub(crate) fn offer_all(&mut self, pool: &[Individual]) {
        for ind in pool {
            self.offer(ind);
        }
    }

    pub(crate) fn fitness(&self) -> f64 {
        self.best.as_ref().map_or(f64::NAN, Individual::fitness_or_nan)
    }

    pub(crate) fn into_best(self) -> Individual {
        self.best.expect("history holds at least the initial population")
    }
}

pub(crate) fn best_index(population: &[Individual]) -> usize {
    population
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.fitness_or_nan().total_cmp(&b.1.fitness_or_nan()))
        .map(|(i, _)| i)
        .expect("population is never empty")
}

pub(crate) fn record(
    iteration: usize,
    population: &[Individual],
    history: &HistoryBest,
    reference: Option<&[f64]>,
) -> Result<TraceRecord> {
    let best = &population[best_index(population)];
    let best_qs = reference.map(|r| qs_default(r, &best.genes)).transpose()?;
    let mut fitness: Vec<f64> = population.iter().map(Individual::fitness_or_nan).collect();
    fitness.sort_by(f64::total_cmp);
    let quantile = |q: f64| {
        let pos = q * (fitness.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        fitness[lo] + (fitness[hi] - fitness[lo]) * (pos - lo as f64)
    };
    Ok(TraceRecord {
        iteration,
        best_fitness: best.fitness_or_nan(),
        best_qs,
        history_best_fitness: history.fitness(),
        fitness_quantiles: [quantile(0.0), quantile(0.25), quantile(0.5), quantile(0.75), quantile(1.0)],
    })
}

pub(crate) fn check_population_size(size: usize) -> Result<()> {
    if size < 4 {
        return Err(UnfoldError::InvalidConfig(format!("population_size must be >= 4, got {size}")));
    }
    Ok(())
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(UnfoldError::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}
