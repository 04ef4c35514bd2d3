//! Static fitness landscapes: fitness against Qs over random candidates.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UnfoldError};
use crate::fitness::{relative_residual_score, FitnessFunction, FitnessKind, FitnessParams, Penalties, PopulationContext};
use crate::forward::convolve_into;
use crate::metrics::{normalize_fitness, qs_default};
use crate::types::{Spectrum, UnfoldProblem};

/// How candidate genes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Each gene uniform in `(0, b_i)`.
    #[default]
    UniformBox,
    /// Each gene uniform in `[max(0, φ_i − r·b_i), min(b_i, φ_i + r·b_i)]`
    /// around the reference fluence `φ`.
    Centered { radius: f64 },
}

/// One random candidate scored by every requested function. `raw` and
/// `normalized` follow the order of [`Landscape::kinds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSample {
    pub qs: f64,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub kinds: Vec<FitnessKind>,
    pub samples: Vec<LandscapeSample>,
}

impl Landscape {
    /// Raw fitness column of `kind`.
    pub fn raw_column(&self, kind: FitnessKind) -> Option<Vec<f64>> {
        let k = self.kinds.iter().position(|x| *x == kind)?;
        Some(self.samples.iter().map(|s| s.raw[k]).collect())
    }

    pub fn qs_column(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.qs).collect()
    }

    /// CSV with columns `qs`, raw fitness per kind, then `<kind>_norm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("qs");
        for k in &self.kinds {
            out.push(',');
            out.push_str(k.token());
        }
        for k in &self.kinds {
            out.push_str(&format!(",{}_norm", k.token()));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&super::io::fmt_num(s.qs));
            for v in s.raw.iter().chain(&s.normalized) {
                out.push(',');
                out.push_str(&super::io::fmt_num(*v));
            }
            out.push('\n');
        }
        out
    }
}

fn draw<R: Rng>(rng: &mut R, bounds: &[f64], reference: &[f64], mode: SamplingMode, out: &mut [f64]) {
    for ((g, &b), &phi) in out.iter_mut().zip(bounds).zip(reference) {
        let u: f64 = rng.sample(Open01);
        *g = match mode {
            SamplingMode::UniformBox => b * u,
            SamplingMode::Centered { radius } => {
                let lo = (phi - radius * b).max(0.0);
                let hi = (phi + radius * b).min(b).max(lo);
                lo + (hi - lo) * u
            }
        };
    }
}

/// Draws `sample_count` candidates, scores each with every kind in `kinds`
/// and min-max normalizes each function over the batch. F3's population
/// maximum is taken over the whole batch.
pub fn static_landscape(
    problem: &UnfoldProblem,
    reference: &Spectrum,
    sample_count: usize,
    kinds: &[FitnessKind],
    params: FitnessParams,
    seed: u64,
    mode: SamplingMode,
) -> Result<Landscape> {
    if sample_count == 0 {
        return Err(UnfoldError::InvalidConfig("sample_count must be at least 1".into()));
    }
    if kinds.is_empty() {
        return Err(UnfoldError::Empty("fitness kinds"));
    }
    if reference.len() != problem.groups() {
        return Err(UnfoldError::DimensionMismatch {
            what: "reference spectrum",
            expected: problem.groups(),
            found: reference.len(),
        });
    }
    if let SamplingMode::Centered { radius } = mode {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(UnfoldError::InvalidConfig(format!("centered radius must be positive, got {radius}")));
        }
    }
    let functions = kinds
        .iter()
        .map(|&k| FitnessFunction::new(k, params))
        .collect::<Result<Vec<_>>>()?;
    let counts = problem.counts().values();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut genes = vec![0.0; problem.groups()];
    let mut folded = vec![0.0; problem.detectors()];

    let mut qs = Vec::with_capacity(sample_count);
    let mut scores = Vec::with_capacity(sample_count);
    let mut raw: Vec<Vec<f64>> = vec![Vec::with_capacity(sample_count); kinds.len()];
    for _ in 0..sample_count {
        draw(&mut rng, problem.bounds(), reference.fluence(), mode, &mut genes);
        convolve_into(problem.response(), &genes, &mut folded)?;
        qs.push(qs_default(reference.fluence(), &genes)?);
        scores.push(relative_residual_score(counts, &folded));
        for (f, column) in functions.iter().zip(raw.iter_mut()) {
            // F3 is filled in once the batch maximum is known
            let value = if f.needs_context() {
                0.0
            } else {
                f.score(counts, &folded, Penalties::for_kind(f.kind, &genes)?, None)?
            };
            column.push(value);
        }
    }
    if functions.iter().any(FitnessFunction::needs_context) {
        let ctx = PopulationContext::new(scores.clone())?;
        for (f, column) in functions.iter().zip(raw.iter_mut()) {
            if f.needs_context() {
                *column = scores.iter().map(|s| 2.0 * ctx.max_score() - s).collect();
            }
        }
    }
    let normalized = raw.iter().map(|c| normalize_fitness(c)).collect::<Result<Vec<_>>>()?;

    let samples = (0..sample_count)
        .map(|i| LandscapeSample {
            qs: qs[i],
            raw: raw.iter().map(|c| c[i]).collect(),
            normalized: normalized.iter().map(|c| c[i]).collect(),
        })
        .collect();
    Ok(Landscape {
        kinds: kinds.to_vec(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{make_problem, NoiseSpec};
    use crate::types::ResponseMatrix;

    fn identity_setup() -> (UnfoldProblem, Spectrum) {
        let reference = Spectrum::on_default_grid(vec![1.0, 2.0, 3.0, 2.0, 1.0]).unwrap();
        let (p, r) = make_problem(&ResponseMatrix::identity(5), &reference, &NoiseSpec::noiseless()).unwrap();
        (p, r)
    }

    #[test]
    fn single_sample_normalizes_to_half() {
        let (p, r) = identity_setup();
        let l = static_landscape(&p, &r, 1, &FitnessKind::ALL, FitnessParams::default(), 1, SamplingMode::UniformBox).unwrap();
        assert_eq!(l.samples.len(), 1);
        assert!(l.samples[0].normalized.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn normalized_columns_span_unit_interval() {
        let (p, r) = identity_setup();
        let l = static_landscape(&p, &r, 300, &FitnessKind::ALL, FitnessParams::default(), 2, SamplingMode::UniformBox).unwrap();
        for k in 0..FitnessKind::ALL.len() {
            let col: Vec<f64> = l.samples.iter().map(|s| s.normalized[k]).collect();
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!((lo, hi), (0.0, 1.0), "{}", FitnessKind::ALL[k]);
        }
    }

    #[test]
    fn f3_uses_batch_maximum() {
        let (p, r) = identity_setup();
        let l = static_landscape(&p, &r, 50, &[FitnessKind::F3, FitnessKind::F6], FitnessParams::default(), 3, SamplingMode::UniformBox)
            .unwrap();
        let f3 = l.raw_column(FitnessKind::F3).unwrap();
        let f6 = l.raw_column(FitnessKind::F6).unwrap();
        // F6 = β6 − S, so S is recoverable
        let s: Vec<f64> = f6.iter().map(|v| 100.0 - v).collect();
        let max_s = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (a, si) in f3.iter().zip(&s) {
            assert!((a - (2.0 * max_s - si)).abs() < 1e-9);
        }
    }

    #[test]
    fn centered_mode_stays_in_window() {
        let (p, r) = identity_setup();
        let l = static_landscape(
            &p,
            &r,
            200,
            &[FitnessKind::F2],
            FitnessParams::default(),
            4,
            SamplingMode::Centered { radius: 0.1 },
        )
        .unwrap();
        // every gene is within 0.1·b_i of the reference, so Qs is bounded
        assert!(l.qs_column().iter().all(|q| *q < 40.0));
        assert!(static_landscape(&p, &r, 2, &[FitnessKind::F2], FitnessParams::default(), 4, SamplingMode::Centered { radius: 0.0 })
            .is_err());
    }

    #[test]
    fn deterministic_and_csv_shape() {
        let (p, r) = identity_setup();
        let a = static_landscape(&p, &r, 10, &FitnessKind::ALL, FitnessParams::default(), 9, SamplingMode::UniformBox).unwrap();
        let b = static_landscape(&p, &r, 10, &FitnessKind::ALL, FitnessParams::default(), 9, SamplingMode::UniformBox).unwrap();
        assert_eq!(a, b);
        let csv = a.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "qs,f1,f2,f3,f4,f5,f6,f7,f8,f1_norm,f2_norm,f3_norm,f4_norm,f5_norm,f6_norm,f7_norm,f8_norm"
        );
        assert_eq!(lines.count(), 10);
        assert!(static_landscape(&p, &r, 0, &FitnessKind::ALL, FitnessParams::default(), 9, SamplingMode::UniformBox).is_err());
    }
}
