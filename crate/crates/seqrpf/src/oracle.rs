//! Dense linear-algebra and quadrature oracles, independent of the
//! iterative solvers in the core crate.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use seqrpf_core::grid::Grid;
use seqrpf_core::systems::gauss_stage;
use seqrpf_core::transfer::{AssembledOperator, Mode, Potential, TransferStage};
use seqrpf_core::C64;

use crate::error::RunError;

fn dense(op: &AssembledOperator) -> DMatrix<Complex64> {
    let d = op.matrix.to_dense();
    let n = op.matrix.n_rows();
    DMatrix::from_fn(n, n, |i, j| d[i * n + j])
}

/// All eigenvalues of the collocation matrix, largest modulus first.
pub fn dense_spectrum(op: &AssembledOperator) -> Vec<Complex64> {
    let m = dense(op);
    let mut ev: Vec<Complex64> = if m.iter().all(|v| v.im == 0.0) {
        m.map(|v| v.re).complex_eigenvalues().iter().copied().collect()
    } else {
        m.eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
    };
    ev.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Null vector of `A − λI` from the smallest singular value.
pub fn eigenvector(op: &AssembledOperator, lambda: f64) -> Vec<f64> {
    let a = dense(op).map(|v| v.re);
    let n = a.nrows();
    let shifted = a - DMatrix::<f64>::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let k = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).map(|(i, _)| i).unwrap_or(0);
    vt.row(k).iter().copied().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenEntry {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub nodes: usize,
    pub truncation: usize,
    pub eigenvalues: Vec<EigenEntry>,
    pub leading: f64,
    /// Signed real part of the subleading eigenvalue.
    pub second: f64,
    pub second_modulus: f64,
    /// Sup distance between the `λ = 1` eigenvector and the Gauss density,
    /// after matching their integrals.
    pub density_error: f64,
}

/// Spectrum of the collocated Gauss operator `Σ 1/(x+n)² f(1/(x+n))`.
pub fn gauss_spectrum_oracle(nodes: usize, truncation: usize) -> Result<SpectrumReport, RunError> {
    if nodes < 16 {
        return Err(RunError::validation("spectrum oracle needs at least 16 nodes"));
    }
    let grid = Arc::new(Grid::chebyshev(nodes).map_err(RunError::setup)?);
    let stage = TransferStage::new(gauss_stage(), grid.clone(), Mode::Plain, truncation).map_err(RunError::setup)?;
    let op = stage.assemble(&Potential::zero(), C64::new(0.0, 0.0))?;
    let ev = dense_spectrum(&op);
    let v = eigenvector(&op, 1.0);
    let w = grid.reference_weights();
    let mass: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    let nodes_x = &grid.interval().expect("interval grid").nodes;
    let density_error = v
        .iter()
        .zip(nodes_x)
        .map(|(h, x)| (h / mass - 1.0 / (std::f64::consts::LN_2 * (1.0 + x))).abs())
        .fold(0.0, f64::max);
    let eigenvalues: Vec<EigenEntry> = ev.iter().take(10).map(|z| EigenEntry { re: z.re, im: z.im, modulus: z.norm() }).collect();
    Ok(SpectrumReport {
        nodes,
        truncation,
        leading: ev[0].re,
        second: ev[1].re,
        second_modulus: ev[1].norm(),
        eigenvalues,
        density_error,
    })
}

/// `∫₀¹ u(x) dx / (ln 2 (1 + x))` by composite Simpson in `x = e^{−t}`,
/// which tames a logarithmic singularity at 0.
pub fn gauss_expectation(u: impl Fn(f64) -> f64, intervals: usize) -> f64 {
    let (a, b) = (0.0, 60.0);
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let g = |t: f64| {
        let x = (-t).exp();
        u(x) * x / (std::f64::consts::LN_2 * (1.0 + x))
    };
    let mut s = g(a) + g(b);
    for k in 1..n {
        s += g(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_quadrature() {
        let m = gauss_expectation(|x| -2.0 * x.ln(), 20_000);
        let exact = std::f64::consts::PI.powi(2) / (6.0 * std::f64::consts::LN_2);
        assert!((m - exact).abs() < 1e-10, "{m} vs {exact}");
        assert!((gauss_expectation(|_| 1.0, 20_000) - 1.0).abs() < 1e-10);
    }
}
