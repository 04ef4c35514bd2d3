//! Synthetic stand-ins for measured response matrices and reference spectra.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UnfoldError};
use crate::fitness::penalty_p1;
use crate::types::{EnergyGrid, ResponseMatrix, Spectrum};

/// Reference spectrum families, all smooth in `ln E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticShape {
    /// One broad bell centred in the fast region.
    SingleGaussian,
    /// Separated thermal and fast peaks.
    DoublePeak,
    /// Constant fluence; its first-difference penalty is zero.
    Flat,
    /// Thermal bump, a 1/E slowing-down plateau and an evaporation peak.
    ThermalPlusFast,
}

impl SyntheticShape {
    pub const ALL: [SyntheticShape; 4] = [
        SyntheticShape::SingleGaussian,
        SyntheticShape::DoublePeak,
        SyntheticShape::Flat,
        SyntheticShape::ThermalPlusFast,
    ];

    pub fn token(self) -> &'static str {
        match self {
            SyntheticShape::SingleGaussian => "single-gaussian",
            SyntheticShape::DoublePeak => "double-peak",
            SyntheticShape::Flat => "flat",
            SyntheticShape::ThermalPlusFast => "thermal-plus-fast",
        }
    }
}

impl fmt::Display for SyntheticShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SyntheticShape {
    type Err = UnfoldError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| UnfoldError::InvalidConfig(format!("unknown spectrum shape {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub shape: SyntheticShape,
    /// Desired first-difference penalty of the generated spectrum.
    pub target_p1: f64,
    pub seed: u64,
}

fn bell(u: f64, center: f64, width: f64) -> f64 {
    (-0.5 * ((u - center) / width).powi(2)).exp()
}

fn logistic(u: f64, center: f64, width: f64) -> f64 {
    1.0 / (1.0 + (-(u - center) / width).exp())
}

/// Unscaled shape on the log axis; `jitter` perturbs positions and widths.
fn raw_shape(shape: SyntheticShape, u: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut jitter = |scale: f64| scale * (rng.random::<f64>() - 0.5);
    let thermal = (2.5e-8f64).ln();
    let fast = (1.0f64).ln();
    match shape {
        SyntheticShape::Flat => vec![1.0; u.len()],
        SyntheticShape::SingleGaussian => {
            let (c, w) = ((0.5f64).ln() + jitter(1.0), 3.0 + jitter(0.6));
            u.iter().map(|&x| bell(x, c, w)).collect()
        }
        SyntheticShape::DoublePeak => {
            let (c1, c2) = (thermal + jitter(0.8), fast + jitter(0.8));
            let (w1, w2) = (1.2 + jitter(0.2), 1.4 + jitter(0.2));
            let a2 = 1.5 + jitter(0.4);
            u.iter().map(|&x| bell(x, c1, w1) + a2 * bell(x, c2, w2)).collect()
        }
        SyntheticShape::ThermalPlusFast => {
            let (c1, c2) = (thermal + jitter(0.6), fast + jitter(0.6));
            let plateau = 0.25 + jitter(0.1);
            u.iter()
                .map(|&x| {
                    let slowing = plateau * logistic(x, c1 + 2.0, 0.6) * logistic(-x, -(c2 - 1.0), 0.6);
                    bell(x, c1, 1.0) + slowing + 1.2 * bell(x, c2, 1.1)
                })
                .collect()
        }
    }
}

/// Generates a nonnegative spectrum of the requested shape, scaled so that
/// its first-difference penalty equals `target_p1`.
pub fn generate_synthetic(spec: &SyntheticSpec, grid: &EnergyGrid) -> Result<Spectrum> {
    if !spec.target_p1.is_finite() || spec.target_p1 < 0.0 {
        return Err(UnfoldError::InvalidConfig(format!(
            "target p1 must be finite and nonnegative, got {}",
            spec.target_p1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw = raw_shape(spec.shape, &grid.log_centers(), &mut rng);
    let fluence = match spec.shape {
        SyntheticShape::Flat if spec.target_p1 == 0.0 => raw,
        SyntheticShape::Flat => {
            return Err(UnfoldError::InvalidConfig(format!(
                "a flat spectrum has p1 = 0 and cannot reach target {}",
                spec.target_p1
            )))
        }
        _ if spec.target_p1 == 0.0 => {
            return Err(UnfoldError::InvalidConfig(format!(
                "only a flat spectrum has p1 = 0; {} needs a positive target",
                spec.shape
            )))
        }
        _ => {
            let p1 = penalty_p1(&raw)?;
            let scale = (spec.target_p1 / p1).sqrt();
            raw.into_iter().map(|v| v * scale).collect()
        }
    };
    Spectrum::new(std::sync::Arc::new(grid.clone()), fluence)
}

/// Response of `m` moderated detectors over `n` log-spaced groups on the
/// default energy span.
///
/// Row `j` is a bell in `ln E` whose centre moves from epithermal to fast
/// energies and whose width grows with `j`, mimicking spheres of increasing
/// moderator thickness. A small floor keeps every entry positive.
pub fn generate_synthetic_response(m: usize, n: usize, seed: u64) -> Result<ResponseMatrix> {
    if m == 0 || n < 2 {
        return Err(UnfoldError::InvalidConfig(format!(
            "synthetic response needs m >= 1 and n >= 2, got {m}x{n}"
        )));
    }
    let u = EnergyGrid::with_groups(n).log_centers();
    let (lo, hi) = (u[0], u[n - 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(m * n);
    for j in 0..m {
        let t = if m == 1 { 0.5 } else { j as f64 / (m - 1) as f64 };
        let center = lo + (hi - lo) * (0.1 + 0.85 * t) + rng.random_range(-0.3..0.3);
        let width = 2.0 + 3.0 * t + rng.random_range(-0.2..0.2);
        let gain = rng.random_range(0.8..1.2);
        values.extend(u.iter().map(|&x| gain * (bell(x, center, width) + 1e-3)));
    }
    ResponseMatrix::new(m, n, values)
}
