//! Sequential RPF triplets `(λ_j, h_j, ν_j)` by forward power iteration on
//! functions and backward iteration on covectors.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::function::DiscreteFunction;
use crate::grid::Grid;
use crate::transfer::{AssembledOperator, TransferStage, TwistWindow, Potential, Mode};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Boundary {
    /// The window repeats forever.
    Periodic,
    /// Finite window; `warmup` stages are discarded at each end.
    Truncated { warmup: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// `ν_j(1) = 1`, `ν_j(h_j) = 1`.
    Covering,
    /// `ν_j(h) = 1`, `ν_j(h_j) = 1` with `h` the untwisted density.
    Tower { h: DiscreteFunction },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub boundary: Boundary,
    pub lambda_floor: f64,
    /// Radius within which `z` is considered validated.
    pub radius: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-13, max_iters: 2000, boundary: Boundary::Periodic, lambda_floor: 1e-8, radius: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpfTriplet {
    pub z: C64,
    /// Window index of `lambda[0]`, `h[0]`, `nu[0]`.
    pub first: usize,
    pub lambda: Vec<C64>,
    /// One more entry than `lambda`.
    pub h: Vec<DiscreteFunction>,
    /// Covector weights: `ν(g) = Σ ν_i g_i`.
    pub nu: Vec<Vec<C64>>,
    pub normalization: Normalization,
    pub periodic: bool,
    pub iterations: usize,
    pub outside_validated_radius: bool,
}

impl RpfTriplet {
    /// `λ_{first, n}` (periodic windows wrap around).
    pub fn lambda_product(&self, n: usize) -> C64 {
        (0..n).map(|k| self.lambda[k % self.lambda.len()]).product()
    }

    fn reference_values(&self) -> Vec<C64> {
        match &self.normalization {
            Normalization::Covering => vec![C64::new(1.0, 0.0); self.h[0].len()],
            Normalization::Tower { h } => h.values.clone(),
        }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn renormalize(v: &mut [C64], s: C64) -> Result<()> {
    if !(s.norm() > 1e-300) || !s.re.is_finite() || !s.im.is_finite() {
        bail!(Degenerate, "reference functional vanished during iteration");
    }
    let inv = 1.0 / s;
    v.iter_mut().for_each(|x| *x *= inv);
    Ok(())
}

/// Density `h` of the untwisted weighted tower operator, `∫ h dm = 1`.
pub fn tower_density(stage: &TransferStage, tol: f64, max_iters: usize) -> Result<DiscreteFunction> {
    if stage.mode != Mode::Weighted {
        bail!(Precondition, "tower density needs the weighted operator");
    }
    let op = stage.assemble(&Potential::zero(), C64::new(0.0, 0.0))?;
    let m: Vec<C64> = stage.grid.reference_weights().iter().map(|&w| C64::new(w, 0.0)).collect();
    let mut g = vec![C64::new(1.0, 0.0); stage.grid.len()];
    let s = dot(&m, &g);
    renormalize(&mut g, s)?;
    let mut trace = Vec::new();
    for it in 0..max_iters {
        let mut next = op.apply_values(&g);
        let s = dot(&m, &next);
        renormalize(&mut next, s)?;
        let d = sup_diff(&next, &g) / sup(&next);
        g = next;
        trace.push(d);
        if d < tol && it > 2 {
            return DiscreteFunction::new(stage.grid.clone(), g);
        }
    }
    Err(crate::Error::Convergence { iterations: max_iters, last: *trace.last().unwrap_or(&f64::NAN), trace })
}

pub fn solve_rpf(window: &TwistWindow, normalization: Normalization, config: &SolverConfig) -> Result<RpfTriplet> {
    let grid = match window.grid() {
        Some(g) => g.clone(),
        None => bail!(Precondition, "empty window"),
    };
    let ops = window.assemble()?;
    solve_rpf_assembled(&ops, grid, window.z, normalization, config)
}

pub fn solve_rpf_assembled(
    ops: &[AssembledOperator],
    grid: Arc<Grid>,
    z: C64,
    normalization: Normalization,
    config: &SolverConfig,
) -> Result<RpfTriplet> {
    let p = ops.len();
    let n = grid.len();
    if p == 0 {
        bail!(Precondition, "empty window");
    }
    let e: Vec<C64> = match &normalization {
        Normalization::Covering => vec![C64::new(1.0, 0.0); n],
        Normalization::Tower { h } => {
            if h.len() != n {
                bail!(Type, "reference density does not match the grid");
            }
            h.values.clone()
        }
    };
    let refw: Vec<C64> = grid.reference_weights().iter().map(|&w| C64::new(w, 0.0)).collect();
    let outside = config.radius.is_some_and(|r| z.norm() > r);

    let (first, hs, nus, iterations) = match config.boundary {
        Boundary::Periodic => {
            let mut g = e.clone();
            let mut trace = Vec::new();
            let mut iters = 0;
            let mut converged = false;
            while iters < config.max_iters {
                let prev = g.clone();
                for op in ops {
                    g = op.apply_values(&g);
                    let s = dot(&refw, &g);
                    renormalize(&mut g, s)?;
                }
                iters += 1;
                let d = sup_diff(&g, &prev) / sup(&g);
                trace.push(d);
                if d < config.tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(crate::Error::Convergence { iterations: iters, last: *trace.last().unwrap(), trace });
            }
            let mut hs = vec![g.clone()];
            for op in &ops[..p - 1] {
                let mut next = op.apply_values(hs.last().unwrap());
                let s = dot(&refw, &next);
                renormalize(&mut next, s)?;
                hs.push(next);
            }
            hs.push(g);

            let mut nu = refw.clone();
            let mut trace = Vec::new();
            let mut biters = 0;
            converged = false;
            while biters < config.max_iters {
                let prev = nu.clone();
                for op in ops.iter().rev() {
                    nu = op.apply_adjoint(&nu);
                    let s = dot(&nu, &e);
                    renormalize(&mut nu, s)?;
                }
                biters += 1;
                let d = sup_diff(&nu, &prev) / sup(&nu);
                trace.push(d);
                if d < config.tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(crate::Error::Convergence { iterations: biters, last: *trace.last().unwrap(), trace });
            }
            let mut nus = vec![nu.clone(); p + 1];
            for k in (1..p).rev() {
                let mut prev = ops[k].apply_adjoint(&nus[k + 1]);
                let s = dot(&prev, &e);
                renormalize(&mut prev, s)?;
                nus[k] = prev;
            }
            (0, hs, nus, iters.max(biters))
        }
        Boundary::Truncated { warmup } => {
            let w = warmup.unwrap_or_else(|| libm::ceil(libm::log(config.tol) / libm::log(0.5)) as usize);
            if p < 2 * w + 1 {
                bail!(Precondition, "window of {p} stages is too short for warmup {w} at both ends");
            }
            let mut fwd = vec![e.clone()];
            for op in ops {
                let mut g = op.apply_values(fwd.last().unwrap());
                let s = dot(&refw, &g);
                renormalize(&mut g, s)?;
                fwd.push(g);
            }
            let mut bwd = vec![refw.clone(); p + 1];
            for k in (0..p).rev() {
                let mut nu = ops[k].apply_adjoint(&bwd[k + 1]);
                let s = dot(&nu, &e);
                renormalize(&mut nu, s)?;
                bwd[k] = nu;
            }
            (w, fwd[w..=p - w].to_vec(), bwd[w..=p - w].to_vec(), 1)
        }
    };

    let m = hs.len() - 1;
    let mut nu_n = Vec::with_capacity(m + 1);
    for nu in nus {
        let s = dot(&nu, &e);
        let mut nu = nu;
        renormalize(&mut nu, s)?;
        nu_n.push(nu);
    }
    let mut h_n = Vec::with_capacity(m + 1);
    for (k, h) in hs.into_iter().enumerate() {
        let s = dot(&nu_n[k], &h);
        let mut h = h;
        renormalize(&mut h, s)?;
        h_n.push(DiscreteFunction { grid: grid.clone(), values: h });
    }
    let mut lambda = Vec::with_capacity(m);
    for k in 0..m {
        let l = dot(&nu_n[k + 1], &ops[(first + k) % p].apply_values(&e));
        if l.norm() < config.lambda_floor {
            bail!(Degenerate, "|lambda_{}| = {:e} is below the floor", first + k, l.norm());
        }
        lambda.push(l);
    }
    Ok(RpfTriplet {
        z,
        first,
        lambda,
        h: h_n,
        nu: nu_n,
        normalization,
        periodic: matches!(config.boundary, Boundary::Periodic),
        iterations,
        outside_validated_radius: outside,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageResidual {
    pub index: usize,
    /// `‖L h_j − λ_j h_{j+1}‖∞`
    pub eigen: f64,
    /// `‖L* ν_{j+1} − λ_j ν_j‖₁`, the sup over `‖g‖∞ ≤ 1`.
    pub dual: f64,
    /// `max(|ν_j(h_j) − 1|, |ν_j(e) − 1|)`
    pub normalization: f64,
}

impl StageResidual {
    pub fn max(&self) -> f64 {
        self.eigen.max(self.dual).max(self.normalization)
    }
}

pub fn rpf_residuals(t: &RpfTriplet, ops: &[AssembledOperator]) -> Vec<StageResidual> {
    let e = t.reference_values();
    (0..t.lambda.len())
        .map(|k| {
            let op = &ops[(t.first + k) % ops.len()];
            let lam = t.lambda[k];
            let lh = op.apply_values(&t.h[k].values);
            let eigen = lh.iter().zip(&t.h[k + 1].values).map(|(a, b)| (a - lam * b).norm()).fold(0.0, f64::max);
            let lnu = op.apply_adjoint(&t.nu[k + 1]);
            let dual = lnu.iter().zip(&t.nu[k]).map(|(a, b)| (a - lam * b).norm()).sum();
            let normalization = (dot(&t.nu[k], &t.h[k].values) - 1.0).norm().max((dot(&t.nu[k], &e) - 1.0).norm());
            StageResidual { index: t.first + k, eigen, dual, normalization }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceReport {
    /// Residual for `n = 1, 2, …`
    pub residuals: Vec<f64>,
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    /// Number of leading residuals used in the fit (the rest hit the noise floor).
    pub fitted: usize,
    pub noise_floor: f64,
}

/// Residuals `‖L^{j,n} g / λ_{j,n} − ν_j(g) h_{j+n}‖∞` and a log-linear fit.
pub fn convergence_rate(ops: &[AssembledOperator], g: &DiscreteFunction, t: &RpfTriplet, n_max: usize) -> Result<ConvergenceReport> {
    if !t.periodic && n_max > t.lambda.len() {
        bail!(Precondition, "truncated triplet covers only {} steps", t.lambda.len());
    }
    let nu_g = dot(&t.nu[0], &g.values);
    let mut v = g.values.clone();
    let mut lam = C64::new(1.0, 0.0);
    let mut residuals = Vec::with_capacity(n_max);
    let period = t.lambda.len();
    for n in 1..=n_max {
        let k = n - 1;
        v = ops[(t.first + k) % ops.len()].apply_values(&v);
        lam *= t.lambda[k % period];
        let h = &t.h[if t.periodic { n % period } else { n }].values;
        let r = v.iter().zip(h).map(|(a, b)| (a / lam - nu_g * b).norm()).fold(0.0, f64::max);
        residuals.push(r);
    }
    let scale = g.sup_norm().max(t.h.iter().map(|h| h.sup_norm()).fold(0.0, f64::max)).max(1.0);
    let noise_floor = 1e-13 * scale;
    let fitted = residuals.iter().position(|&r| !(r > noise_floor)).unwrap_or(residuals.len());
    let (rate, prefactor, r_squared) = if fitted >= 2 {
        let xs: Vec<f64> = (1..=fitted).map(|n| n as f64).collect();
        let ys: Vec<f64> = residuals[..fitted].iter().map(|r| libm::log(*r)).collect();
        let (slope, icpt, r2) = linear_fit(&xs, &ys);
        (libm::exp(slope), libm::exp(icpt), r2)
    } else {
        (0.0, 0.0, 1.0)
    };
    Ok(ConvergenceReport { residuals, rate, prefactor, r_squared, fitted, noise_floor })
}

/// Least squares `y = a x + b`; returns `(a, b, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{FullShift, SystemStage};

    #[test]
    fn bernoulli_closed_form() {
        let g = Arc::new(Grid::cylinder(2, 2, 0.5).unwrap());
        let st = TransferStage::new(SystemStage::FullShift(FullShift::bernoulli(2)), g.clone(), Mode::Plain, 2).unwrap();
        let z = C64::new(0.1, 0.2);
        let w = TwistWindow::stationary(st, Potential::Symbol(vec![0.0, 1.0]), 1, z);
        let t = solve_rpf(&w, Normalization::Covering, &SolverConfig::default()).unwrap();
        let want = (1.0 + z.exp()) / 2.0;
        assert!((t.lambda[0] - want).norm() < 1e-14);
        let ops = w.assemble().unwrap();
        for r in rpf_residuals(&t, &ops) {
            assert!(r.max() < 1e-12, "{r:?}");
        }
        let mut bad = t.clone();
        bad.h[1] = bad.h[1].scale(C64::new(1.01, 0.0));
        let r = rpf_residuals(&bad, &ops)[0];
        assert!(r.eigen > 0.005);
    }

    #[test]
    fn fit_recovers_slope() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0];
        let (a, b, r2) = linear_fit(&x, &y);
        assert!((a - 2.0).abs() < 1e-15 && (b + 1.0).abs() < 1e-15 && (r2 - 1.0).abs() < 1e-15);
    }
}
