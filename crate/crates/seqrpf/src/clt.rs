//! Monte Carlo harness for the central limit theorem of Birkhoff sums.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use seqrpf_core::systems::{SymbolWeights, TowerSpec};

use crate::error::RunError;

/// Systems with an exact or float-orbit sampler.
#[derive(Debug, Clone)]
pub enum CltSystem {
    /// i.i.d. symbols; `u` indexed by the current first symbol.
    Shift { probabilities: Vec<f64>, u: Vec<f64> },
    /// Float orbit of the Gauss map started from `initial`; `u(x)`.
    Gauss { u: fn(f64, &[f64]) -> f64, params: Vec<f64>, stationary: bool },
    /// Level/column chain of a tower; `u = level_values[l] + column_values[j]`.
    Tower { spec: TowerSpec, level_values: Vec<f64>, column_values: Vec<f64> },
}

/// `u(x) = c ln x`
pub fn log_potential(x: f64, p: &[f64]) -> f64 {
    p[0] * x.ln()
}

/// `u(x) = Σ c_k x^k`
pub fn polynomial_potential(x: f64, p: &[f64]) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CltReport {
    pub trials: usize,
    pub n: usize,
    pub seed: u64,
    /// Centering and scaling used for the standardized sums.
    pub mean: f64,
    pub variance: f64,
    pub ks: f64,
    /// Sample mean of `S_n / n`.
    pub empirical_mean: f64,
    /// Sample variance of `S_n / √n`.
    pub empirical_variance: f64,
    pub standard_error: f64,
    /// Gauss trials restarted after an orbit hit 0.
    pub restarts: usize,
    #[serde(skip)]
    pub standardized: Vec<f64>,
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    p.iter()
        .scan(0.0, |s, x| {
            *s += x / total;
            Some(*s)
        })
        .collect()
}

fn trial(system: &CltSystem, n: usize, rng: &mut ChaCha8Rng) -> (f64, usize) {
    match system {
        CltSystem::Shift { probabilities, u } => {
            let cum = cumulative(probabilities);
            let s = (0..n).map(|_| u.get(pick(&cum, rng.random::<f64>())).copied().unwrap_or(0.0)).sum();
            (s, 0)
        }
        CltSystem::Gauss { u, params, stationary } => {
            let mut restarts = 0;
            'outer: loop {
                let v: f64 = rng.random();
                let mut x = if *stationary { 2f64.powf(v) - 1.0 } else { v };
                let mut s = 0.0;
                for _ in 0..n {
                    if !(x > 0.0) {
                        restarts += 1;
                        continue 'outer;
                    }
                    s += u(x, params);
                    x = (1.0 / x).fract();
                }
                return (s, restarts);
            }
        }
        CltSystem::Tower { spec, level_values, column_values } => {
            let cum = cumulative(&spec.masses);
            let occupancy: Vec<f64> = spec.masses.iter().zip(&spec.return_times).map(|(m, r)| m * *r as f64).collect();
            let occ = cumulative(&occupancy);
            let mut j = pick(&occ, rng.random::<f64>());
            let mut l = rng.random_range(0..spec.return_times[j]);
            let mut s = 0.0;
            for _ in 0..n {
                s += level_values.get(l).copied().unwrap_or(0.0) + column_values.get(j).copied().unwrap_or(0.0);
                if l + 1 < spec.return_times[j] {
                    l += 1;
                } else {
                    j = match &spec.transition {
                        Some(t) => pick(&cumulative(&t[j]), rng.random::<f64>()),
                        None => pick(&cum, rng.random::<f64>()),
                    };
                    l = 0;
                }
            }
            (s, 0)
        }
    }
}

/// Kolmogorov–Smirnov distance of the sample to the standard normal.
pub fn ks_distance(sample: &mut [f64]) -> f64 {
    let normal = Normal::standard();
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Standardized sums `(S_n − n mean)/√(n variance)` over independent
/// trials. Trial `i` draws from stream `i` of a ChaCha generator keyed by
/// `seed`, so results do not depend on the thread count.
pub fn monte_carlo_clt(system: &CltSystem, n: usize, trials: usize, seed: u64, mean: f64, variance: f64) -> Result<CltReport, RunError> {
    if n == 0 || trials == 0 {
        return Err(RunError::validation("need n, trials >= 1"));
    }
    if !(variance > 1e-12) {
        return Err(RunError::runtime(format!(
            "degenerate CLT: variance {variance:e} is numerically zero (u may be cohomologous to a constant)"
        )));
    }
    let sums: Vec<(f64, usize)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            trial(system, n, &mut rng)
        })
        .collect();
    let nf = n as f64;
    let restarts = sums.iter().map(|s| s.1).sum();
    let raw: Vec<f64> = sums.iter().map(|s| s.0).collect();
    let tf = trials as f64;
    let empirical_mean = raw.iter().sum::<f64>() / (tf * nf);
    let scaled_mean = raw.iter().map(|s| s / nf.sqrt()).sum::<f64>() / tf;
    let empirical_variance = raw.iter().map(|s| (s / nf.sqrt() - scaled_mean).powi(2)).sum::<f64>() / (tf - 1.0).max(1.0);
    let mut standardized: Vec<f64> = raw.iter().map(|s| (s - nf * mean) / (nf * variance).sqrt()).collect();
    let mut sorted = standardized.clone();
    let ks = ks_distance(&mut sorted);
    let standard_error = (empirical_variance / (nf * tf)).sqrt();
    standardized.shrink_to_fit();
    Ok(CltReport { trials, n, seed, mean, variance, ks, empirical_mean, empirical_variance, standard_error, restarts, standardized })
}

/// Sampler for a shift stage with finitely many symbols.
pub fn shift_system(weights: &SymbolWeights, u: &[f64]) -> Result<CltSystem, RunError> {
    match weights {
        SymbolWeights::Finite(p) => Ok(CltSystem::Shift { probabilities: p.clone(), u: u.to_vec() }),
        _ => Err(RunError::validation("Monte Carlo needs finitely many symbols")),
    }
}
