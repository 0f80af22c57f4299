//! Free-energy functional of an OU ensemble and its comparison with the
//! learned potential.

mod entropy;

pub use entropy::{entropy_offset, kl_entropy, knn_distances, log_unit_ball, MIN_DISTANCE};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MlpModel;
use crate::sampling::Buffer;
use crate::seed;
use crate::stats;

pub const DEFAULT_K: usize = 3;

/// Positions of every trajectory at each time step.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEnsemble {
    pub dim: usize,
    /// `slices[t]` holds one row-major point per trajectory.
    pub slices: Vec<Vec<f64>>,
}

impl DensityEnsemble {
    pub fn from_buffer(buffer: &Buffer) -> Self {
        let slices = (0..=buffer.length)
            .map(|t| {
                buffer
                    .trajectories
                    .iter()
                    .flat_map(|tr| tr.state(t).iter().copied())
                    .collect()
            })
            .collect();
        Self {
            dim: buffer.dim,
            slices,
        }
    }

    pub fn steps(&self) -> usize {
        self.slices.len()
    }

    pub fn samples(&self) -> usize {
        self.slices.first().map_or(0, |s| s.len() / self.dim)
    }
}

pub fn energy_estimate(points: &[f64], dim: usize, psi: impl Fn(&[f64]) -> f64) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = points.len() / dim;
    Ok(points.chunks_exact(dim).map(psi).sum::<f64>() / n as f64)
}

/// `F = E − β⁻¹·S`.
pub fn free_energy(
    points: &[f64],
    dim: usize,
    psi: impl Fn(&[f64]) -> f64,
    beta_inv: f64,
    k: usize,
) -> Result<f64> {
    let e = energy_estimate(points, dim, psi)?;
    if beta_inv == 0.0 {
        return Ok(e);
    }
    Ok(e - beta_inv * kl_entropy(points, dim, k)?)
}

/// `H = −E[h(x)]`.
pub fn h_functional(model: &MlpModel, points: &[f64]) -> Result<f64> {
    let h = model.forward(points)?;
    if h.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(-stats::mean(&h))
}

/// Least squares `F ≈ w·H + b` with `w` constrained non-negative.
pub fn fit_linear(h: &[f64], f: &[f64]) -> Result<(f64, f64)> {
    if h.len() != f.len() {
        return Err(Error::Dimension {
            expected: h.len(),
            got: f.len(),
        });
    }
    if h.len() < 2 {
        return Err(Error::TooFewSamples { n: h.len(), k: 1 });
    }
    let (mh, mf) = (stats::mean(h), stats::mean(f));
    let var: f64 = h.iter().map(|x| (x - mh).powi(2)).sum();
    let cov: f64 = h.iter().zip(f).map(|(x, y)| (x - mh) * (y - mf)).sum();
    let w = if var > 0.0 { (cov / var).max(0.0) } else { 0.0 };
    Ok((w, mf - w * mh))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSeries {
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
    pub free_energy: Vec<f64>,
    pub h: Vec<f64>,
    pub w: f64,
    pub b: f64,
}

impl FunctionalSeries {
    pub fn fitted(&self) -> Vec<f64> {
        self.h.iter().map(|x| self.w * x + self.b).collect()
    }

    /// Pearson correlation between `w·H + b` and `F`.
    pub fn pearson(&self) -> f64 {
        stats::pearson(&self.fitted(), &self.free_energy)
    }
}

/// Per-point summands of `F` at one time step: `Ψ(x_i) − β⁻¹·d·log r_i`.
/// Their mean plus `−β⁻¹·offset` is `F`.
fn free_energy_terms(
    points: &[f64],
    dim: usize,
    psi: &dyn Fn(&[f64]) -> f64,
    beta_inv: f64,
    k: usize,
) -> Result<Vec<f64>> {
    let r = knn_distances(points, dim, k)?;
    Ok(points
        .chunks_exact(dim)
        .zip(r)
        .map(|(x, r)| psi(x) - beta_inv * dim as f64 * r.max(MIN_DISTANCE).ln())
        .collect())
}

/// All functionals over the ensemble plus the non-negative linear fit of
/// `F` against `H`.
pub fn functional_series(
    ensemble: &DensityEnsemble,
    model: &MlpModel,
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    beta_inv: f64,
    k: usize,
) -> Result<FunctionalSeries> {
    use rayon::prelude::*;
    let rows = ensemble
        .slices
        .par_iter()
        .map(|pts| {
            let e = energy_estimate(pts, ensemble.dim, psi)?;
            let s = kl_entropy(pts, ensemble.dim, k)?;
            let h = h_functional(model, pts)?;
            Ok((e, s, e - beta_inv * s, h))
        })
        .collect::<Result<Vec<_>>>()?;
    let energy: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let entropy: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let free_energy: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let h: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let (w, b) = fit_linear(&h, &free_energy)?;
    Ok(FunctionalSeries {
        energy,
        entropy,
        free_energy,
        h,
        w,
        b,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// `F[t+1] − F[t]` for each step.
    pub increments: Vec<f64>,
    /// Bootstrap standard error of each increment.
    pub std_errors: Vec<f64>,
    /// Steps where `F[t+1] > F[t] + sigmas·SE`.
    pub violations: Vec<usize>,
}

impl MonotonicityReport {
    pub fn violation_fraction(&self) -> f64 {
        self.violations.len() as f64 / self.increments.len().max(1) as f64
    }
}

/// Check that `F` decreases along the ensemble.
///
/// Standard errors come from a paired bootstrap over trajectories of the
/// per-point summands of `F`, with the neighbour distances held at their
/// full-sample values.
pub fn check_free_energy_monotone(
    ensemble: &DensityEnsemble,
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    beta_inv: f64,
    k: usize,
    resamples: usize,
    sigmas: f64,
    seed_value: u64,
) -> Result<MonotonicityReport> {
    use rayon::prelude::*;
    let terms = ensemble
        .slices
        .par_iter()
        .map(|pts| free_energy_terms(pts, ensemble.dim, psi, beta_inv, k))
        .collect::<Result<Vec<_>>>()?;
    let n = ensemble.samples();
    let offset = -beta_inv * entropy_offset(n, ensemble.dim, k);
    let f: Vec<f64> = terms.iter().map(|t| stats::mean(t) + offset).collect();
    let steps = f.len().saturating_sub(1);
    let (increments, std_errors): (Vec<f64>, Vec<f64>) = (0..steps)
        .into_par_iter()
        .map(|t| {
            let diff: Vec<f64> = terms[t + 1].iter().zip(&terms[t]).map(|(a, b)| a - b).collect();
            let mut rng = seed::stream(seed_value, t as u64);
            let boots: Vec<f64> = (0..resamples)
                .map(|_| (0..n).map(|_| diff[rng.random_range(0..n)]).sum::<f64>() / n as f64)
                .collect();
            (f[t + 1] - f[t], stats::std_dev(&boots))
        })
        .unzip();
    let violations = (0..steps)
        .filter(|&t| increments[t] > sigmas * std_errors[t])
        .collect();
    Ok(MonotonicityReport {
        increments,
        std_errors,
        violations,
    })
}
