//! The eight unfolding fitness functions and their shared sub-expressions.
//!
//! Every function follows one contract: larger is fitter. With
//! `T_j = (R·φ)_j − C_j` the residual of detector `j`:
//!
//! | kind | value |
//! |------|-------|
//! | F1 | `Σ_j [β1 − (T_j / ((R·φ)_j + C_j))²]` |
//! | F2 | `1 / max(Σ_j T_j²/C_j², ε)` |
//! | F3 | `2 · max_k S_k − S`, `S = Σ_j T_j²/C_j²`, max over the current population |
//! | F4 | `1 / max(Σ_j T_j² + β4·p1, ε)` |
//! | F5 | `1 / max(σ_j((R·φ)_j / C_j), ε)`, σ the population standard deviation |
//! | F6 | `β6 − Σ_j (T_j/C_j)²` |
//! | F7 | `sqrt(Σ_j C_j² / max(Σ_j T_j², ε))` |
//! | F8 | `1 / max(Σ_j (T_j/C_j)² + 0.5·β8·(p1 + p2), ε)` |
//!
//! `p1` and `p2` are the sums of squared first and second differences of
//! the candidate spectrum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UnfoldError};
use crate::forward::convolve;
use crate::types::UnfoldProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessKind {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
}

impl FitnessKind {
    pub const ALL: [FitnessKind; 8] = [
        FitnessKind::F1,
        FitnessKind::F2,
        FitnessKind::F3,
        FitnessKind::F4,
        FitnessKind::F5,
        FitnessKind::F6,
        FitnessKind::F7,
        FitnessKind::F8,
    ];

    pub fn token(self) -> &'static str {
        match self {
            FitnessKind::F1 => "f1",
            FitnessKind::F2 => "f2",
            FitnessKind::F3 => "f3",
            FitnessKind::F4 => "f4",
            FitnessKind::F5 => "f5",
            FitnessKind::F6 => "f6",
            FitnessKind::F7 => "f7",
            FitnessKind::F8 => "f8",
        }
    }

    /// F3's value depends on the rest of the population.
    pub fn needs_context(self) -> bool {
        self == FitnessKind::F3
    }
}

impl fmt::Display for FitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FitnessKind {
    type Err = UnfoldError;

    fn from_str(s: &str) -> Result<Self> {
        FitnessKind::ALL
            .into_iter()
            .find(|k| k.token().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnfoldError::InvalidConfig(format!("unknown fitness function {s:?} (expected f1..f8)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessParams {
    pub beta1: f64,
    pub beta4: f64,
    pub beta6: f64,
    pub beta8: f64,
    /// Floor applied to every denominator that can reach zero.
    pub epsilon: f64,
}

impl Default for FitnessParams {
    fn default() -> Self {
        Self {
            beta1: 0.1,
            beta4: 100.0,
            beta6: 100.0,
            beta8: 100.0,
            epsilon: 1e-12,
        }
    }
}

impl FitnessParams {
    /// The other reading of the published constants: β1 = β6 = 100, β4 = 1000.
    pub fn alternate_betas() -> Self {
        Self {
            beta1: 100.0,
            beta4: 1000.0,
            beta6: 100.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let betas = [self.beta1, self.beta4, self.beta6, self.beta8];
        if betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(UnfoldError::InvalidConfig(format!("betas must be finite and >= 0, got {betas:?}")));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(UnfoldError::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Residual scores `S_k = Σ_j (T_j/C_j)²` of every member of the current
/// population. Only F3 reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationContext {
    residual_scores: Vec<f64>,
    max_score: f64,
}

impl PopulationContext {
    pub fn new(residual_scores: Vec<f64>) -> Result<Self> {
        if residual_scores.is_empty() {
            return Err(UnfoldError::Empty("population context"));
        }
        if let Some(index) = residual_scores.iter().position(|s| !s.is_finite() || *s < 0.0) {
            return Err(UnfoldError::InvalidValue {
                what: "residual score",
                index,
                value: residual_scores[index],
            });
        }
        let max_score = residual_scores.iter().copied().fold(f64::MIN, f64::max);
        Ok(Self {
            residual_scores,
            max_score,
        })
    }

    pub fn residual_scores(&self) -> &[f64] {
        &self.residual_scores
    }

    pub fn max_score(&self) -> f64 {
        self.max_score
    }
}

/// Smoothness penalties of a candidate spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Penalties {
    pub p1: f64,
    pub p2: f64,
}

impl Penalties {
    /// Computes only the penalties `kind` actually uses; the rest stay zero.
    pub fn for_kind(kind: FitnessKind, fluence: &[f64]) -> Result<Self> {
        match kind {
            FitnessKind::F4 => Ok(Self {
                p1: penalty_p1(fluence)?,
                p2: 0.0,
            }),
            FitnessKind::F8 => Ok(Self {
                p1: penalty_p1(fluence)?,
                p2: penalty_p2(fluence)?,
            }),
            _ => Ok(Self::default()),
        }
    }
}

/// `T_j = (R·φ)_j − C_j`.
pub fn residuals(problem: &UnfoldProblem, fluence: &[f64]) -> Result<Vec<f64>> {
    let mut t = convolve(problem.response(), fluence)?;
    for (t, c) in t.iter_mut().zip(problem.counts().values()) {
        *t -= c;
    }
    Ok(t)
}

/// `S = Σ_j ((R·φ)_j − C_j)² / C_j²` from already-folded counts.
pub fn relative_residual_score(counts: &[f64], reconstructed: &[f64]) -> f64 {
    counts
        .iter()
        .zip(reconstructed)
        .map(|(c, r)| ((r - c) / c).powi(2))
        .sum()
}

/// `S` for a candidate spectrum.
pub fn residual_score(problem: &UnfoldProblem, fluence: &[f64]) -> Result<f64> {
    let recon = convolve(problem.response(), fluence)?;
    Ok(relative_residual_score(problem.counts().values(), &recon))
}

/// Sum of squared first differences.
pub fn penalty_p1(fluence: &[f64]) -> Result<f64> {
    if fluence.len() < 2 {
        return Err(UnfoldError::TooShort {
            what: "first-difference penalty",
            needed: 2,
            found: fluence.len(),
        });
    }
    Ok(fluence.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum())
}

/// Sum of squared second differences.
pub fn penalty_p2(fluence: &[f64]) -> Result<f64> {
    if fluence.len() < 3 {
        return Err(UnfoldError::TooShort {
            what: "second-difference penalty",
            needed: 3,
            found: fluence.len(),
        });
    }
    Ok(fluence
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]).powi(2))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessFunction {
    pub kind: FitnessKind,
    pub params: FitnessParams,
}

impl FitnessFunction {
    pub fn new(kind: FitnessKind, params: FitnessParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { kind, params })
    }

    pub fn with_defaults(kind: FitnessKind) -> Self {
        Self {
            kind,
            params: FitnessParams::default(),
        }
    }

    pub fn needs_context(&self) -> bool {
        self.kind.needs_context()
    }

    /// Fitness of a candidate spectrum. `ctx` is required for F3 and ignored
    /// otherwise.
    pub fn evaluate(
        &self,
        problem: &UnfoldProblem,
        fluence: &[f64],
        ctx: Option<&PopulationContext>,
    ) -> Result<f64> {
        let recon = convolve(problem.response(), fluence)?;
        let penalties = Penalties::for_kind(self.kind, fluence)?;
        self.score(problem.counts().values(), &recon, penalties, ctx)
    }

    /// Fitness from measured counts, the candidate's folded counts and its
    /// penalties.
    pub fn score(
        &self,
        counts: &[f64],
        reconstructed: &[f64],
        penalties: Penalties,
        ctx: Option<&PopulationContext>,
    ) -> Result<f64> {
        if counts.len() != reconstructed.len() {
            return Err(UnfoldError::DimensionMismatch {
                what: "reconstructed counts",
                expected: counts.len(),
                found: reconstructed.len(),
            });
        }
        let p = &self.params;
        let eps = p.epsilon;
        let pairs = || counts.iter().zip(reconstructed);

        let value = match self.kind {
            FitnessKind::F1 => pairs()
                .map(|(c, r)| p.beta1 - ((r - c) / (r + c)).powi(2))
                .sum(),
            FitnessKind::F2 => {
                let s = finite("relative residual sum", relative_residual_score(counts, reconstructed))?;
                1.0 / s.max(eps)
            }
            FitnessKind::F3 => {
                let ctx = ctx.ok_or(UnfoldError::MissingContext("f3"))?;
                let s = finite("relative residual sum", relative_residual_score(counts, reconstructed))?;
                2.0 * ctx.max_score() - s
            }
            FitnessKind::F4 => {
                let t2 = finite("squared residual sum", squared_residual_sum(counts, reconstructed))?;
                1.0 / (t2 + p.beta4 * penalties.p1).max(eps)
            }
            FitnessKind::F5 => {
                let spread = finite("count ratio spread", ratio_spread(counts, reconstructed))?;
                1.0 / spread.max(eps)
            }
            FitnessKind::F6 => p.beta6 - relative_residual_score(counts, reconstructed),
            FitnessKind::F7 => {
                let t2 = finite("squared residual sum", squared_residual_sum(counts, reconstructed))?;
                let c2: f64 = counts.iter().map(|c| c * c).sum();
                (c2 / t2.max(eps)).sqrt()
            }
            FitnessKind::F8 => {
                let s = finite("relative residual sum", relative_residual_score(counts, reconstructed))?;
                1.0 / (s + 0.5 * p.beta8 * (penalties.p1 + penalties.p2)).max(eps)
            }
        };
        finite(self.kind.token(), value)
    }
}

fn squared_residual_sum(counts: &[f64], reconstructed: &[f64]) -> f64 {
    counts.iter().zip(reconstructed).map(|(c, r)| (r - c).powi(2)).sum()
}

/// Population standard deviation of the per-detector ratios `(R·φ)_j / C_j`.
fn ratio_spread(counts: &[f64], reconstructed: &[f64]) -> f64 {
    let m = counts.len() as f64;
    let ratios = || reconstructed.iter().zip(counts).map(|(r, c)| r / c);
    let mean = ratios().sum::<f64>() / m;
    (ratios().map(|x| (x - mean).powi(2)).sum::<f64>() / m).sqrt()
}

fn finite(term: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(UnfoldError::NonFinite { term, value })
    }
}
