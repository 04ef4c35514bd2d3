//! Real-coded genetic algorithm: single-point mutation, whole arithmetic
//! crossover and roulette-wheel selection, with no elitism by default.
//!
//! One generation builds an offspring pool of parents + crossover children +
//! mutants, evaluates it, then spins the roulette wheel back down to the
//! population size.

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Open01};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    best_index, check_population_size, check_probability, initialize_with, record, Algorithm, Evaluator,
    HistoryBest, Individual, RunHooks, RunTrace,
};
use crate::error::{Result, UnfoldError};
use crate::fitness::FitnessFunction;
use crate::types::UnfoldProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_iterations: usize,
    /// Chance that each parent spawns a single-point mutant.
    pub mutation_prob: f64,
    /// Chance that each drawn parent pair produces two children.
    pub crossover_prob: f64,
    pub seed: u64,
    /// Copy the pool's best individual into the next population.
    pub elitism: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 200,
            max_iterations: 3000,
            mutation_prob: 0.1,
            crossover_prob: 0.9,
            seed: 0,
            elitism: false,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        check_population_size(self.population_size)?;
        check_probability("mutation_prob", self.mutation_prob)?;
        check_probability("crossover_prob", self.crossover_prob)?;
        if self.max_iterations == 0 {
            return Err(UnfoldError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Starting population exactly as [`run_ga`] draws it for `config.seed`.
pub fn initialize(problem: &UnfoldProblem, config: &GaConfig) -> Vec<Individual> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    initialize_with(problem, config.population_size, &mut rng)
}

/// Redraws one random locus uniformly inside `(0, b_i)`.
pub fn mutate<R: Rng + ?Sized>(individual: &Individual, bounds: &[f64], rng: &mut R) -> Individual {
    let mut out = individual.clone();
    let locus = rng.random_range(0..out.genes.len());
    out.genes[locus] = bounds[locus] * rng.sample::<f64, _>(Open01);
    out.invalidate();
    out
}

/// Whole arithmetic crossover with `u` drawn uniformly from `(0, 1)`.
pub fn crossover<R: Rng + ?Sized>(
    p1: &Individual,
    p2: &Individual,
    rng: &mut R,
) -> Result<(Individual, Individual)> {
    let u = rng.sample::<f64, _>(Open01);
    crossover_with_weight(p1, p2, u)
}

/// `o1 = u·p1 + (1−u)·p2`, `o2 = (1−u)·p1 + u·p2`.
pub fn crossover_with_weight(p1: &Individual, p2: &Individual, u: f64) -> Result<(Individual, Individual)> {
    if p1.genes.len() != p2.genes.len() {
        return Err(UnfoldError::DimensionMismatch {
            what: "crossover parents",
            expected: p1.genes.len(),
            found: p2.genes.len(),
        });
    }
    let (o1, o2) = p1
        .genes
        .iter()
        .zip(&p2.genes)
        .map(|(a, b)| (u * a + (1.0 - u) * b, (1.0 - u) * a + u * b))
        .unzip();
    Ok((Individual::new(o1), Individual::new(o2)))
}

/// Roulette-wheel weights `f − min + ε_sel` with `ε_sel = 1e-9·(max − min + 1)`,
/// so negative fitness values and flat populations are both well defined.
pub fn roulette_weights(population: &[Individual]) -> Result<Vec<f64>> {
    if population.is_empty() {
        return Err(UnfoldError::Empty("roulette population"));
    }
    let fitness: Vec<f64> = population
        .iter()
        .enumerate()
        .map(|(index, ind)| {
            ind.fitness.ok_or(UnfoldError::InvalidValue {
                what: "unevaluated individual in roulette",
                index,
                value: f64::NAN,
            })
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = fitness
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &f| (lo.min(f), hi.max(f)));
    let eps = 1e-9 * (hi - lo + 1.0);
    Ok(fitness.iter().map(|f| f - lo + eps).collect())
}

/// Samples `count` individuals with replacement, proportionally to shifted fitness.
pub fn roulette_select<R: Rng + ?Sized>(
    population: &[Individual],
    count: usize,
    rng: &mut R,
) -> Result<Vec<Individual>> {
    let weights = roulette_weights(population)?;
    let wheel = WeightedIndex::new(&weights).map_err(|e| UnfoldError::InvalidConfig(format!("roulette: {e}")))?;
    Ok((0..count).map(|_| population[wheel.sample(rng)].clone()).collect())
}

pub fn run_ga(problem: &UnfoldProblem, fitness: &FitnessFunction, config: &GaConfig) -> Result<RunTrace> {
    run_ga_with(problem, fitness, config, RunHooks::default())
}

pub fn run_ga_with(
    problem: &UnfoldProblem,
    fitness: &FitnessFunction,
    config: &GaConfig,
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
        let mut pool = population;
        for _ in 0..size / 2 {
            let pair = index::sample(&mut rng, size, 2);
            if rng.random::<f64>() < config.crossover_prob {
                let (o1, o2) = crossover(&pool[pair.index(0)], &pool[pair.index(1)], &mut rng)?;
                pool.push(o1);
                pool.push(o2);
            }
        }
        for i in 0..size {
            if rng.random::<f64>() < config.mutation_prob {
                let mutant = mutate(&pool[i], bounds, &mut rng);
                pool.push(mutant);
            }
        }

        eval.evaluate_pool(&mut pool)?;
        history.offer_all(&pool);

        let mut next = roulette_select(&pool, size, &mut rng)?;
        if config.elitism {
            next[0] = pool[best_index(&pool)].clone();
        }
        population = next;

        records.push(record(iteration, &population, &history, hooks.reference)?);
        if let Some(observer) = hooks.observer.as_deref_mut() {
            observer.observe(iteration, &population);
        }
    }

    let last_best = population[best_index(&population)].clone();
    Ok(RunTrace {
        algorithm: Algorithm::Ga,
        fitness: fitness.kind,
        seed: config.seed,
        records,
        initial_population,
        history_best: history.into_best(),
        last_best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::{FitnessKind, FitnessParams};
    use crate::forward::{make_problem, NoiseSpec};
    use crate::metrics::qs_default;
    use crate::types::{DetectorCounts, ResponseMatrix, Spectrum};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn identity_problem(n: usize) -> (UnfoldProblem, Spectrum) {
        let reference = Spectrum::on_default_grid((1..=n).map(|i| i as f64).collect()).unwrap();
        make_problem(&ResponseMatrix::identity(n), &reference, &NoiseSpec::noiseless()).unwrap()
    }

    #[test]
    fn mutation_single_gene_case() {
        let ind = Individual::evaluated(vec![0.5], 1.0);
        let out = mutate(&ind, &[1.0], &mut rng(1));
        assert_ne!(out.genes[0], 0.5);
        assert!(out.fitness.is_none());
    }

    #[test]
    fn mutation_touches_at_most_one_locus_inside_bounds() {
        let bounds = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut r = rng(3);
        let base = Individual::new(vec![0.5, 1.0, 1.5, 2.0, 2.5]);
        for _ in 0..10_000 {
            let out = mutate(&base, &bounds, &mut r);
            let changed: Vec<usize> = (0..5).filter(|&i| out.genes[i] != base.genes[i]).collect();
            assert!(changed.len() <= 1);
            for i in changed {
                assert!(out.genes[i] > 0.0 && out.genes[i] < bounds[i]);
            }
        }
    }

    #[test]
    fn crossover_examples() {
        let p1 = Individual::new(vec![0.0]);
        let p2 = Individual::new(vec![1.0]);
        let (o1, o2) = crossover_with_weight(&p1, &p2, 0.25).unwrap();
        assert_eq!(o1.genes, vec![0.75]);
        assert_eq!(o2.genes, vec![0.25]);

        let same = Individual::new(vec![0.3, 0.7]);
        let (a, b) = crossover(&same, &same, &mut rng(2)).unwrap();
        for (x, y) in a.genes.iter().zip(&same.genes) {
            assert!((x - y).abs() < 1e-15);
        }
        for (x, y) in b.genes.iter().zip(&same.genes) {
            assert!((x - y).abs() < 1e-15);
        }

        assert!(crossover(&p1, &same, &mut rng(2)).is_err());
    }

    #[test]
    fn crossover_preserves_parent_sum() {
        let mut r = rng(9);
        for _ in 0..1000 {
            let p1 = Individual::new((0..8).map(|_| r.random::<f64>() * 10.0).collect());
            let p2 = Individual::new((0..8).map(|_| r.random::<f64>() * 10.0).collect());
            let (o1, o2) = crossover(&p1, &p2, &mut r).unwrap();
            for i in 0..8 {
                let lhs = o1.genes[i] + o2.genes[i];
                let rhs = p1.genes[i] + p2.genes[i];
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            }
        }
    }

    #[test]
    fn roulette_flat_population_is_uniform() {
        let pop: Vec<Individual> = (0..4).map(|i| Individual::evaluated(vec![i as f64], -5.0)).collect();
        let weights = roulette_weights(&pop).unwrap();
        assert!(weights.windows(2).all(|w| w[0] == w[1]));
        let picks = roulette_select(&pop, 40_000, &mut rng(4)).unwrap();
        for k in 0..4 {
            let n = picks.iter().filter(|p| p.genes[0] == k as f64).count() as f64;
            assert!((n / 40_000.0 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn roulette_ratio_three_to_one() {
        // min fitness 0, so the first two carry shifted weights 3 and 1
        let pop = vec![
            Individual::evaluated(vec![0.0], 3.0),
            Individual::evaluated(vec![1.0], 1.0),
            Individual::evaluated(vec![2.0], 0.0),
        ];
        let picks = roulette_select(&pop, 100_000, &mut rng(8)).unwrap();
        let a = picks.iter().filter(|p| p.genes[0] == 0.0).count() as f64;
        let b = picks.iter().filter(|p| p.genes[0] == 1.0).count() as f64;
        let ratio = a / b;
        assert!((ratio / 3.0 - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn roulette_edge_cases() {
        let one = vec![Individual::evaluated(vec![7.0], 2.0)];
        let picks = roulette_select(&one, 10, &mut rng(1)).unwrap();
        assert!(picks.iter().all(|p| p.genes == vec![7.0]));
        assert!(roulette_select(&[], 1, &mut rng(1)).is_err());
        assert!(roulette_select(&[Individual::new(vec![1.0])], 1, &mut rng(1)).is_err());
    }

    #[test]
    fn single_iteration_single_record() {
        let (p, _) = identity_problem(5);
        let cfg = GaConfig {
            population_size: 10,
            max_iterations: 1,
            ..Default::default()
        };
        let trace = run_ga(&p, &FitnessFunction::with_defaults(FitnessKind::F2), &cfg).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.initial_population, initialize(&p, &cfg).iter().map(|i| i.genes.clone()).collect::<Vec<_>>());
    }

    #[test]
    fn ga_improves_identity_problem() {
        let (p, reference) = identity_problem(5);
        let cfg = GaConfig {
            population_size: 40,
            max_iterations: 500,
            seed: 11,
            ..Default::default()
        };
        let trace = run_ga(&p, &FitnessFunction::with_defaults(FitnessKind::F2), &cfg).unwrap();
        let initial_best = trace
            .initial_population
            .iter()
            .map(|g| qs_default(reference.fluence(), g).unwrap())
            .fold(f64::INFINITY, f64::min);
        let final_qs = qs_default(reference.fluence(), &trace.history_best.genes).unwrap();
        assert!(final_qs < initial_best, "{final_qs} vs {initial_best}");
    }

    #[test]
    fn ga_is_deterministic_and_stays_in_bounds() {
        let r = ResponseMatrix::from_rows(&[vec![1.0, 0.5, 0.2], vec![0.1, 0.6, 1.0]]).unwrap();
        let p = UnfoldProblem::new(r, DetectorCounts::new(vec![2.0, 3.0]).unwrap()).unwrap();
        let cfg = GaConfig {
            population_size: 12,
            max_iterations: 60,
            seed: 5,
            ..Default::default()
        };
        struct BoxCheck<'a>(&'a [f64]);
        impl super::super::GenerationObserver for BoxCheck<'_> {
            fn observe(&mut self, _: usize, population: &[Individual]) {
                for ind in population {
                    for (g, b) in ind.genes.iter().zip(self.0) {
                        assert!(*g >= 0.0 && *g <= *b);
                    }
                }
            }
        }
        for kind in FitnessKind::ALL {
            let f = FitnessFunction::new(kind, FitnessParams::default()).unwrap();
            let mut check = BoxCheck(p.bounds());
            let hooks = RunHooks {
                reference: None,
                observer: Some(&mut check),
            };
            let a = run_ga_with(&p, &f, &cfg, hooks).unwrap();
            let b = run_ga(&p, &f, &cfg).unwrap();
            assert_eq!(a, b, "{kind}");
            if kind != FitnessKind::F3 {
                assert!(a.records.windows(2).all(|w| w[1].history_best_fitness >= w[0].history_best_fitness));
                assert!(a.history_best.fitness.unwrap() >= a.last_best.fitness.unwrap());
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig { population_size: 3, ..Default::default() }.validate().is_err());
        assert!(GaConfig { mutation_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(GaConfig { max_iterations: 0, ..Default::default() }.validate().is_err());
        assert!(GaConfig::default().validate().is_ok());
    }
}
