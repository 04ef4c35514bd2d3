//! Rank-uniform sampling of a running population.

use serde::{Deserialize, Serialize};

use crate::metrics::qs_default;
use crate::solver::{GenerationObserver, Individual};

/// Fraction of each generation that is sampled, rounded up.
pub const SAMPLE_FRACTION_DENOMINATOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicSample {
    pub iteration: usize,
    /// 0 is the fittest individual.
    pub rank: usize,
    pub fitness: f64,
    pub qs: f64,
}

/// Ranks sampled from a population of `size`: `ceil(size/10)` ranks spread
/// evenly from best to worst, starting at the best.
pub fn sample_ranks(size: usize) -> Vec<usize> {
    let count = size.div_ceil(SAMPLE_FRACTION_DENOMINATOR);
    (0..count).map(|k| k * size / count).collect()
}

/// Observer that records `(fitness, Qs)` of rank-spread individuals after
/// every generation.
#[derive(Debug, Clone)]
pub struct DynamicSampler {
    reference: Vec<f64>,
    pub samples: Vec<DynamicSample>,
}

impl DynamicSampler {
    pub fn new(reference: &[f64]) -> Self {
        Self {
            reference: reference.to_vec(),
            samples: Vec::new(),
        }
    }

    /// CSV with columns `iteration,rank,fitness,qs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,rank,fitness,qs\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.iteration,
                s.rank,
                super::io::fmt_num(s.fitness),
                super::io::fmt_num(s.qs)
            ));
        }
        out
    }
}

impl GenerationObserver for DynamicSampler {
    fn observe(&mut self, iteration: usize, population: &[Individual]) {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| population[b].fitness_or_nan().total_cmp(&population[a].fitness_or_nan()));
        for rank in sample_ranks(population.len()) {
            let ind = &population[order[rank]];
            self.samples.push(DynamicSample {
                iteration,
                rank,
                fitness: ind.fitness_or_nan(),
                qs: qs_default(&self.reference, &ind.genes).unwrap_or(f64::NAN),
            });
        }
    }
}
