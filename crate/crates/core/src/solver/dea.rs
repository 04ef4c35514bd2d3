//! Differential evolution: rand/1 mutation, binomial crossover and greedy
//! one-to-one selection.
//!
//! Generations are synchronous: every trial vector is built from the
//! pre-generation population before any slot is replaced.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    best_index, check_population_size, check_probability, initialize_with, record, Algorithm, Evaluator,
    HistoryBest, Individual, RunHooks, RunTrace,
};
use crate::error::{Result, UnfoldError};
use crate::fitness::{FitnessFunction, PopulationContext};
use crate::types::UnfoldProblem;

/// Sign joining the two difference donors in the mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationSign {
    /// `x1 + F·(x2 − x3)`.
    #[default]
    Difference,
    /// `x1 + F·(x2 + x3)`.
    SumAsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeaConfig {
    pub population_size: usize,
    pub max_iterations: usize,
    pub scale_factor: f64,
    pub crossover_prob: f64,
    pub seed: u64,
    pub mutation_sign: MutationSign,
    /// Always take at least one gene from the mutant vector.
    pub forced_gene: bool,
}

impl Default for DeaConfig {
    fn default() -> Self {
        Self {
            population_size: 200,
            max_iterations: 3000,
            scale_factor: 0.5,
            crossover_prob: 0.9,
            seed: 0,
            mutation_sign: MutationSign::Difference,
            forced_gene: true,
        }
    }
}

impl DeaConfig {
    pub fn validate(&self) -> Result<()> {
        check_population_size(self.population_size)?;
        check_probability("crossover_prob", self.crossover_prob)?;
        if !(self.scale_factor > 0.0 && self.scale_factor < 2.0) {
            return Err(UnfoldError::InvalidConfig(format!(
                "scale_factor must lie in (0, 2), got {}",
                self.scale_factor
            )));
        }
        if self.max_iterations == 0 {
            return Err(UnfoldError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Builds the temporary (mutant) vector for `target` from three distinct
/// donors, none of them the target, clamped into `[0, b_i]`.
pub fn de_mutate<R: Rng + ?Sized>(
    population: &[Individual],
    target: usize,
    config: &DeaConfig,
    bounds: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if population.len() < 4 {
        return Err(UnfoldError::TooShort {
            what: "differential evolution population",
            needed: 4,
            found: population.len(),
        });
    }
    // draw from the population with the target removed, then shift back
    let picks = index::sample(rng, population.len() - 1, 3);
    let donor = |k: usize| {
        let i = picks.index(k);
        &population[if i >= target { i + 1 } else { i }].genes
    };
    Ok(mutant_vector(
        donor(0),
        donor(1),
        donor(2),
        config.scale_factor,
        config.mutation_sign,
        bounds,
    ))
}

/// `base + F·(d1 ∓ d2)` clamped into `[0, b_i]` per gene.
pub fn mutant_vector(
    base: &[f64],
    d1: &[f64],
    d2: &[f64],
    scale_factor: f64,
    sign: MutationSign,
    bounds: &[f64],
) -> Vec<f64> {
    base.iter()
        .zip(d1.iter().zip(d2))
        .zip(bounds)
        .map(|((b, (x, y)), &hi)| {
            let step = match sign {
                MutationSign::Difference => x - y,
                MutationSign::SumAsPrinted => x + y,
            };
            (b + scale_factor * step).clamp(0.0, hi)
        })
        .collect()
}

/// Binomial crossover: each gene comes from `temporary` when `u < pc`,
/// otherwise from `target`. With `forced_gene`, one uniformly chosen gene
/// always comes from `temporary`.
pub fn de_crossover<R: Rng + ?Sized>(
    target: &[f64],
    temporary: &[f64],
    pc: f64,
    forced_gene: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if target.len() != temporary.len() {
        return Err(UnfoldError::DimensionMismatch {
            what: "crossover vectors",
            expected: target.len(),
            found: temporary.len(),
        });
    }
    let forced = forced_gene.then(|| rng.random_range(0..target.len()));
    Ok(target
        .iter()
        .zip(temporary)
        .enumerate()
        .map(|(i, (&tar, &tem))| {
            let u: f64 = rng.random();
            if u < pc || forced == Some(i) {
                tem
            } else {
                tar
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Survivor {
    Target,
    Offspring,
}

/// The offspring replaces the target only with strictly higher fitness.
pub fn de_select(target_fitness: f64, offspring_fitness: f64) -> Survivor {
    if offspring_fitness > target_fitness {
        Survivor::Offspring
    } else {
        Survivor::Target
    }
}

pub fn run_dea(problem: &UnfoldProblem, fitness: &FitnessFunction, config: &DeaConfig) -> Result<RunTrace> {
    run_dea_with(problem, fitness, config, RunHooks::default())
}

pub fn run_dea_with(
    problem: &UnfoldProblem,
    fitness: &FitnessFunction,
    config: &DeaConfig,
    mut hooks: RunHooks<'_>,
) -> Result<RunTrace> {
    config.validate()?;
    let size = config.population_size;
    let bounds = problem.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval = Evaluator::new(problem, fitness);
    let mut history = HistoryBest::new(fitness.kind);

    let mut population = initialize_with(problem, size, &mut rng);
    eval.evaluate_pool(&mut population)?;
    history.offer_all(&population);
    let initial_population = population.iter().map(|i| i.genes.clone()).collect();

    let mut records = Vec::with_capacity(config.max_iterations);
    for iteration in 1..=config.max_iterations {
        let mut trials = Vec::with_capacity(size);
        for slot in 0..size {
            let temporary = de_mutate(&population, slot, config, bounds, &mut rng)?;
            let genes = de_crossover(
                &population[slot].genes,
                &temporary,
                config.crossover_prob,
                config.forced_gene,
                &mut rng,
            )?;
            trials.push(Individual::new(genes));
        }

        if fitness.needs_context() {
            // targets and trials are scored against one shared context
            let mut scores = Vec::with_capacity(2 * size);
            for ind in population.iter_mut().chain(trials.iter_mut()) {
                scores.push(eval.ensure_score(ind)?);
            }
            let ctx = PopulationContext::new(scores)?;
            eval.rescore_with_context(&mut population, &ctx)?;
            eval.rescore_with_context(&mut trials, &ctx)?;
        } else {
            eval.evaluate_pool(&mut trials)?;
        }
        history.offer_all(&trials);

        for (slot, trial) in trials.into_iter().enumerate() {
            if de_select(population[slot].fitness_or_nan(), trial.fitness_or_nan()) == Survivor::Offspring {
                population[slot] = trial;
            }
        }

        records.push(record(iteration, &population, &history, hooks.reference)?);
        if let Some(observer) = hooks.observer.as_deref_mut() {
            observer.observe(iteration, &population);
        }
    }

    let last_best = population[best_index(&population)].clone();
    Ok(RunTrace {
        algorithm: Algorithm::Dea,
        fitness: fitness.kind,
        seed: config.seed,
        records,
        initial_population,
        history_best: history.into_best(),
        last_best,
    })
}
