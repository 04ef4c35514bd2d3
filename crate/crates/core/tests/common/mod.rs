//! Random problem instances and straight-from-the-formula fitness oracles.
#![allow(dead_code)]

use rand::Rng;
use spectrum_unfold::fitness::FitnessParams;
use spectrum_unfold::{DetectorCounts, FitnessKind, ResponseMatrix, UnfoldProblem};

pub struct Instance {
    pub response: ResponseMatrix,
    pub problem: UnfoldProblem,
    pub truth: Vec<f64>,
    /// A point inside the search box.
    pub candidate: Vec<f64>,
    /// Candidates forming an F3 context; `candidate` is the first.
    pub population: Vec<Vec<f64>>,
}

/// Sparse-ish nonnegative response (every row and column has a positive
/// entry), a positive true spectrum and exact counts.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let m = rng.random_range(2..=6);
    let n = rng.random_range(3..=10);
    let mut values = vec![0.0; m * n];
    for v in values.iter_mut() {
        if rng.random_bool(0.7) {
            *v = rng.random_range(0.01..1.0);
        }
    }
    for j in 0..m {
        let i = rng.random_range(0..n);
        values[j * n + i] = rng.random_range(0.1..1.0);
    }
    for i in 0..n {
        let j = rng.random_range(0..m);
        values[j * n + i] = rng.random_range(0.1..1.0);
    }
    let response = ResponseMatrix::new(m, n, values).unwrap();
    let truth: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
    let counts: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| response.get(j, i) * truth[i]).sum())
        .collect();
    let problem = UnfoldProblem::new(response.clone(), DetectorCounts::new(counts).unwrap()).unwrap();
    let population: Vec<Vec<f64>> = (0..5)
        .map(|_| problem.bounds().iter().map(|b| b * rng.random_range(0.001..1.0)).collect())
        .collect();
    Instance {
        response,
        problem,
        truth,
        candidate: population[0].clone(),
        population,
    }
}

fn fold(response: &ResponseMatrix, phi: &[f64]) -> Vec<f64> {
    (0..response.rows())
        .map(|j| (0..response.cols()).map(|i| response.get(j, i) * phi[i]).sum())
        .collect()
}

pub fn brute_residual_score(response: &ResponseMatrix, counts: &[f64], phi: &[f64]) -> f64 {
    let r = fold(response, phi);
    let mut s = 0.0;
    for j in 0..counts.len() {
        let t = r[j] - counts[j];
        s += t * t / (counts[j] * counts[j]);
    }
    s
}

/// Fitness written term by term from the published table; `max_s` is the
/// population maximum of Σ (T_j/C_j)² used by F3.
pub fn brute_fitness(
    kind: FitnessKind,
    p: &FitnessParams,
    response: &ResponseMatrix,
    counts: &[f64],
    phi: &[f64],
    max_s: f64,
) -> f64 {
    let r = fold(response, phi);
    let m = counts.len();
    let n = phi.len();
    let t: Vec<f64> = (0..m).map(|j| r[j] - counts[j]).collect();
    let s = brute_residual_score(response, counts, phi);
    let mut p1 = 0.0;
    for i in 1..n {
        p1 += (phi[i] - phi[i - 1]) * (phi[i] - phi[i - 1]);
    }
    let mut p2 = 0.0;
    for i in 1..n - 1 {
        let d = phi[i - 1] - 2.0 * phi[i] + phi[i + 1];
        p2 += d * d;
    }
    let sum_t2: f64 = t.iter().map(|x| x * x).sum();
    match kind {
        FitnessKind::F1 => {
            let mut f = 0.0;
            for j in 0..m {
                let q = t[j] / (r[j] + counts[j]);
                f += p.beta1 - q * q;
            }
            f
        }
        FitnessKind::F2 => 1.0 / s.max(p.epsilon),
        FitnessKind::F3 => 2.0 * max_s - s,
        FitnessKind::F4 => 1.0 / (sum_t2 + p.beta4 * p1).max(p.epsilon),
        FitnessKind::F5 => {
            let ratios: Vec<f64> = (0..m).map(|j| r[j] / counts[j]).collect();
            let mean = ratios.iter().sum::<f64>() / m as f64;
            let var = ratios.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m as f64;
            1.0 / var.sqrt().max(p.epsilon)
        }
        FitnessKind::F6 => {
            let mut f = p.beta6;
            for j in 0..m {
                f += -(t[j] / counts[j]) * (t[j] / counts[j]);
            }
            f
        }
        FitnessKind::F7 => {
            let c2: f64 = counts.iter().map(|c| c * c).sum();
            (c2 / sum_t2.max(p.epsilon)).sqrt()
        }
        FitnessKind::F8 => 1.0 / (s + 0.5 * p.beta8 * (p1 + p2)).max(p.epsilon),
    }
}
