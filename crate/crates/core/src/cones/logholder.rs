use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{bail, Result};
use crate::function::DiscreteFunction;
use crate::grid::Grid;
use crate::metrics::{hilbert_from_values, FunctionalFamily, Label, LinearFunctional};
use crate::transfer::AssembledOperator;
use crate::{C64, TOL_CONE};

/// `C_s = {g ≥ 0 : g(x) ≤ e^{sQd^α(x,x')} g(x') for d(x,x') < ξ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogHolderConeParams {
    pub s: f64,
    pub q: f64,
    pub alpha: f64,
    pub xi: f64,
    pub gamma: f64,
    /// `s/γ + 1`
    pub s_prime: f64,
}

impl LogHolderConeParams {
    pub fn new(s: f64, q: f64, alpha: f64, xi: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            bail!(Config, "expansion gamma = {gamma} must exceed 1");
        }
        if !(q > 0.0) || !(alpha > 0.0 && alpha <= 1.0) || !(xi > 0.0) {
            bail!(Config, "need Q > 0, alpha in (0, 1] and xi > 0");
        }
        let s_min = 1.0 / (1.0 - 1.0 / gamma);
        if s < s_min * (1.0 - 1e-12) {
            bail!(Config, "s = {s} is below 1/(1 - 1/gamma) = {s_min}");
        }
        Ok(LogHolderConeParams { s, q, alpha, xi, gamma, s_prime: s / gamma + 1.0 })
    }

    /// Same cone with `s` replaced.
    pub fn with_s(&self, s: f64) -> Result<Self> {
        Self::new(s, self.q, self.alpha, self.xi, self.gamma)
    }

    pub fn improves(&self) -> bool {
        self.s_prime < self.s
    }

    fn pair_bound(&self, d: f64) -> f64 {
        libm::exp(self.s * self.q * libm::pow(d, self.alpha))
    }
}

fn close_pairs(grid: &Grid, xi: f64) -> Vec<(usize, usize, f64)> {
    let n = grid.len();
    let mut out = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if x != y && grid.comparable(x, y) {
                let d = grid.distance(x, y);
                if d > 0.0 && d < xi {
                    out.push((x, y, d));
                }
            }
        }
    }
    out
}

/// Point evaluations and `f ↦ e^{sQd^α} f(x') − f(x)` over ordered pairs.
pub fn logholder_family(params: &LogHolderConeParams, grid: &Arc<Grid>) -> FunctionalFamily {
    let mut fs: Vec<LinearFunctional> = (0..grid.len()).map(LinearFunctional::point).collect();
    for (x, y, d) in close_pairs(grid, params.xi) {
        fs.push(LinearFunctional {
            label: Label::GammaPair(x, y),
            mass: 0.0,
            terms: alloc::vec![(y, C64::new(params.pair_bound(d), 0.0)), (x, C64::new(-1.0, 0.0))],
        });
    }
    FunctionalFamily::new(grid.clone(), fs)
}

pub fn logholder_membership(params: &LogHolderConeParams, f: &DiscreteFunction) -> (bool, FunctionalFamily) {
    let family = logholder_family(params, &f.grid);
    let inside = f.is_real(TOL_CONE) && family.real_cone_contains(f).unwrap_or(false);
    (inside, family)
}

/// Smallest `s` with `g ∈ C_s`, i.e. `max ln(g(x)/g(x')) / (Q d^α)`.
pub fn required_s(params: &LogHolderConeParams, g: &[C64], grid: &Grid) -> f64 {
    if g.iter().any(|v| !(v.re > 0.0)) {
        return f64::INFINITY;
    }
    let mut s = 0.0f64;
    for (x, y, d) in close_pairs(grid, params.xi) {
        s = s.max(libm::log(g[x].re / g[y].re) / (params.q * libm::pow(d, params.alpha)));
    }
    s
}

/// Random members `c·exp(φ)` with the discrete Hölder constant of `φ` at
/// most a random fraction of `sQ`.
pub fn sample_logholder<R: Rng + ?Sized>(grid: &Arc<Grid>, params: &LogHolderConeParams, count: usize, rng: &mut R) -> Vec<DiscreteFunction> {
    let pairs = close_pairs(grid, params.xi);
    let n = grid.len();
    (0..count)
        .map(|_| {
            let phi: Vec<f64> = match grid.interval() {
                Some(iv) => {
                    let modes: Vec<(f64, f64)> = (1..=4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..core::f64::consts::TAU))).collect();
                    iv.nodes
                        .iter()
                        .map(|&x| {
                            modes.iter().enumerate().map(|(k, (a, p))| a * libm::sin((k + 1) as f64 * core::f64::consts::PI * x + p) / (k + 1) as f64).sum()
                        })
                        .collect()
                }
                None => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            };
            let mut h = 0.0f64;
            for &(x, y, d) in &pairs {
                h = h.max((phi[x] - phi[y]).abs() / libm::pow(d, params.alpha));
            }
            let target = rng.random_range(0.05..0.95) * params.s * params.q;
            let k = if h > 0.0 { target / h } else { 0.0 };
            let c = libm::exp(rng.random_range(-1.0..1.0));
            let values = phi.iter().map(|p| C64::new(c * libm::exp(k * p), 0.0)).collect();
            DiscreteFunction { grid: grid.clone(), values }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogHolderInvariance {
    pub s: f64,
    pub s_prime: f64,
    /// Largest `s` needed by an image.
    pub worst_s: f64,
    pub violations: Vec<usize>,
    /// `max sup g / inf g` over the images.
    pub ratio: f64,
    /// `2 ln((s + s')/(s − s') · ratio)`
    pub d0_target: f64,
    /// Hilbert diameter of the images in `C_s`.
    pub diameter: f64,
}

impl LogHolderInvariance {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.diameter <= self.d0_target * (1.0 + 1e-9)
    }
}

/// Pushes each sample through `ops` and checks the images against `C_{s'}`.
pub fn logholder_invariance(params: &LogHolderConeParams, ops: &[AssembledOperator], sample: &[DiscreteFunction]) -> Result<LogHolderInvariance> {
    let grid = match sample.first() {
        Some(f) => f.grid.clone(),
        None => bail!(Precondition, "empty sample"),
    };
    let mut images = Vec::with_capacity(sample.len());
    for f in sample {
        let mut g = f.values.clone();
        for op in ops {
            g = op.apply_values(&g);
        }
        images.push(g);
    }
    let mut worst_s = 0.0f64;
    let mut violations = Vec::new();
    let mut ratio = 1.0f64;
    for (i, g) in images.iter().enumerate() {
        let s = required_s(params, g, &grid);
        worst_s = worst_s.max(s);
        if s > params.s_prime * (1.0 + 1e-9) {
            violations.push(i);
        }
        let hi = g.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
        let lo = g.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        ratio = ratio.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
    }
    let d0_target = if params.improves() {
        2.0 * libm::log((params.s + params.s_prime) / (params.s - params.s_prime) * ratio)
    } else {
        f64::INFINITY
    };
    let family = logholder_family(params, &grid);
    let vals: Vec<Vec<f64>> = images.iter().map(|g| family.evaluate_unchecked(g).iter().map(|v| v.re).collect()).collect();
    let mut diameter = 0.0f64;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            diameter = diameter.max(hilbert_from_values(&vals[i], &vals[j]));
        }
    }
    Ok(LogHolderInvariance { s: params.s, s_prime: params.s_prime, worst_s, violations, ratio, d0_target, diameter })
}

/// `c = C^{−m₀} e^{−m₀‖f‖∞}`, the lower bound on `ν_j(B(x₀, ξ))` when `m₀`
/// steps map every `ξ`-ball onto the space.
pub fn lower_mass_bound(ratio_bound: f64, m0: usize, potential_sup: f64) -> f64 {
    libm::pow(ratio_bound, -(m0 as f64)) * libm::exp(-(m0 as f64) * potential_sup)
}
