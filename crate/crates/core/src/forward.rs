//! Forward model: folding a spectrum through the response matrix and
//! synthesizing noisy detector readings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, UnfoldError};
use crate::types::{DetectorCounts, ResponseMatrix, Spectrum, UnfoldProblem};

/// Fraction of the clean count that a non-positive noisy count is clamped to.
pub const NEGATIVE_COUNT_CLAMP: f64 = 0.01;

/// How the noise standard deviation is applied to the clean counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// `C_j = clean_j · (1 + g_j)`, `g_j ~ N(0, σ)`.
    #[default]
    Relative,
    /// `C_j = clean_j + g_j`, `g_j ~ N(0, σ · mean(clean))`: one absolute
    /// sigma shared by all detectors.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub relative_sigma: f64,
    pub seed: u64,
    pub mode: NoiseMode,
}

impl NoiseSpec {
    pub fn new(relative_sigma: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            relative_sigma,
            seed,
            mode: NoiseMode::Relative,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn noiseless() -> Self {
        Self {
            relative_sigma: 0.0,
            seed: 0,
            mode: NoiseMode::Relative,
        }
    }

    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.relative_sigma) {
            return Err(UnfoldError::InvalidConfig(format!(
                "relative_sigma must lie in [0, 1), got {}",
                self.relative_sigma
            )));
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            relative_sigma: 0.05,
            seed: 0,
            mode: NoiseMode::Relative,
        }
    }
}

/// Noise-free detector readings `out_j = Σ_i R_ji · φ_i`.
pub fn convolve(response: &ResponseMatrix, fluence: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; response.rows()];
    convolve_into(response, fluence, &mut out)?;
    Ok(out)
}

/// [`convolve`] writing into a caller-owned buffer.
pub fn convolve_into(response: &ResponseMatrix, fluence: &[f64], out: &mut [f64]) -> Result<()> {
    if fluence.len() != response.cols() {
        return Err(UnfoldError::DimensionMismatch {
            what: "spectrum length vs response columns",
            expected: response.cols(),
            found: fluence.len(),
        });
    }
    if out.len() != response.rows() {
        return Err(UnfoldError::DimensionMismatch {
            what: "output length vs response rows",
            expected: response.rows(),
            found: out.len(),
        });
    }
    for (o, row) in out.iter_mut().zip(response.row_iter()) {
        *o = row.iter().zip(fluence).map(|(r, f)| r * f).sum();
    }
    Ok(())
}

/// Perturbs clean counts with seeded Gaussian noise.
pub fn add_noise(clean: &[f64], noise: &NoiseSpec) -> Result<DetectorCounts> {
    noise.validate()?;
    if let Some(index) = clean.iter().position(|c| !c.is_finite() || *c <= 0.0) {
        return Err(UnfoldError::InvalidValue {
            what: "clean count",
            index,
            value: clean[index],
        });
    }
    if noise.relative_sigma == 0.0 {
        return DetectorCounts::new(clean.to_vec());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let sigma = match noise.mode {
        NoiseMode::Relative => noise.relative_sigma,
        NoiseMode::Absolute => noise.relative_sigma * clean.iter().sum::<f64>() / clean.len() as f64,
    };
    let gauss = Normal::new(0.0, sigma).map_err(|e| UnfoldError::InvalidConfig(e.to_string()))?;
    let noisy = clean
        .iter()
        .map(|&c| {
            let g = gauss.sample(&mut rng);
            let value = match noise.mode {
                NoiseMode::Relative => c * (1.0 + g),
                NoiseMode::Absolute => c + g,
            };
            if value <= 0.0 {
                c * NEGATIVE_COUNT_CLAMP
            } else {
                value
            }
        })
        .collect();
    DetectorCounts::new(noisy)
}

/// Folds `reference` through `response`, adds noise and assembles the problem.
///
/// The reference is handed back alongside so callers can score solutions.
pub fn make_problem(
    response: &ResponseMatrix,
    reference: &Spectrum,
    noise: &NoiseSpec,
) -> Result<(UnfoldProblem, Spectrum)> {
    let clean = convolve(response, reference.fluence())?;
    let counts = add_noise(&clean, noise)?;
    let problem = UnfoldProblem::new(response.clone(), counts)?;
    Ok((problem, reference.clone()))
}
