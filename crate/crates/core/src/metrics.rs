//! Solution quality (Qs), fitness normalization and cross-run statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UnfoldError};
use crate::fitness::{penalty_p1, FitnessKind};
use crate::solver::{Algorithm, RunTrace};
use crate::types::Spectrum;

/// Which spectrum normalizes the Qs distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QsVariant {
    /// `Σ φ_cal²` in the denominator.
    #[default]
    Calculated,
    /// `Σ φ_ref²` in the denominator.
    Reference,
}

/// Spectrum quality factor in percent; 0 for a perfect solution.
pub fn qs(reference: &[f64], calculated: &[f64], variant: QsVariant) -> Result<f64> {
    if reference.len() != calculated.len() {
        return Err(UnfoldError::DimensionMismatch {
            what: "qs spectra",
            expected: reference.len(),
            found: calculated.len(),
        });
    }
    let distance: f64 = reference
        .iter()
        .zip(calculated)
        .map(|(r, c)| (r - c).powi(2))
        .sum();
    let norm_of = match variant {
        QsVariant::Calculated => calculated,
        QsVariant::Reference => reference,
    };
    let norm: f64 = norm_of.iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return Err(UnfoldError::InvalidConfig(format!(
            "qs denominator is zero ({variant:?} spectrum is all zeros)"
        )));
    }
    Ok(100.0 * (distance / norm).sqrt())
}

/// [`qs`] with the default (calculated) denominator.
pub fn qs_default(reference: &[f64], calculated: &[f64]) -> Result<f64> {
    qs(reference, calculated, QsVariant::Calculated)
}

/// Min-max maps `values` onto `[0, 1]`; a constant input maps to 0.5.
pub fn normalize_fitness(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(UnfoldError::Empty("fitness values"));
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(UnfoldError::InvalidValue {
            what: "fitness value",
            index,
            value: values[index],
        });
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range == 0.0 {
        return Ok(vec![0.5; values.len()]);
    }
    Ok(values.iter().map(|v| ((v - lo) / range).clamp(0.0, 1.0)).collect())
}

/// Descriptive statistics of a sample; `stddev` divides by N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(UnfoldError::Empty("statistics sample"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stddev = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Ok(Self {
            mean,
            median,
            stddev,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Final-Qs record of one benchmark run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    /// Qs of the history-best individual.
    pub history_qs: f64,
    /// Qs of the best individual of the last generation.
    pub last_qs: f64,
    /// First-difference penalty of the history-best spectrum.
    pub history_p1: f64,
    /// Lowest Qs found in the initial random population.
    pub initial_min_qs: f64,
}

impl RunOutcome {
    pub fn from_trace(trace: &RunTrace, reference: &Spectrum) -> Result<Self> {
        let reference = reference.fluence();
        let initial_min_qs = trace
            .initial_population
            .iter()
            .map(|genes| qs_default(reference, genes))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .min_by(f64::total_cmp)
            .ok_or(UnfoldError::Empty("initial population"))?;
        Ok(Self {
            seed: trace.seed,
            history_qs: qs_default(reference, &trace.history_best.genes)?,
            last_qs: qs_default(reference, &trace.last_best.genes)?,
            history_p1: penalty_p1(&trace.history_best.genes).unwrap_or(0.0),
            initial_min_qs,
        })
    }
}

/// Statistics of one (algorithm, fitness, spectrum) benchmark cell. The run
/// list is the source of truth; every statistic is recomputed from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub fitness: FitnessKind,
    pub spectrum: String,
    pub runs: Vec<RunOutcome>,
    pub qs: Stats,
    pub last_qs: Stats,
    pub p1: Stats,
}

impl RunSummary {
    pub fn from_outcomes(
        algorithm: Algorithm,
        fitness: FitnessKind,
        spectrum: impl Into<String>,
        runs: Vec<RunOutcome>,
    ) -> Result<Self> {
        if runs.is_empty() {
            return Err(UnfoldError::Empty("run list"));
        }
        let column = |f: fn(&RunOutcome) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        Ok(Self {
            algorithm,
            fitness,
            spectrum: spectrum.into(),
            qs: Stats::of(&column(|r| r.history_qs))?,
            last_qs: Stats::of(&column(|r| r.last_qs))?,
            p1: Stats::of(&column(|r| r.history_p1))?,
            runs,
        })
    }

    pub fn qs_values(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.history_qs).collect()
    }
}

/// Scores every trace against `reference` and aggregates them.
pub fn summarize(
    algorithm: Algorithm,
    fitness: FitnessKind,
    spectrum: &str,
    runs: &[RunTrace],
    reference: &Spectrum,
) -> Result<RunSummary> {
    if runs.is_empty() {
        return Err(UnfoldError::Empty("run list"));
    }
    let outcomes = runs
        .iter()
        .map(|t| RunOutcome::from_trace(t, reference))
        .collect::<Result<Vec<_>>>()?;
    RunSummary::from_outcomes(algorithm, fitness, spectrum, outcomes)
}
