use alloc::vec::Vec;

use rand::Rng;

use super::{sample_cone, sample_cone_axes, sample_cone_boundary};
use crate::error::{bail, Result};
use crate::function::DiscreteFunction;
use crate::metrics::{hilbert_from_values, FunctionalFamily, Label, LinearFunctional};
use crate::transfer::AssembledOperator;
use crate::{C64, TOL_CONE};

/// Parameters of the tower cone. `P₁` is the list of singleton cells on
/// levels below `s`, `P₂` the nodes on levels `≥ s`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TowerConeParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eps0: f64,
    /// First level of `P₂`.
    pub s: usize,
    pub p1: Vec<usize>,
    pub p2: Vec<usize>,
    pub p2_mass: f64,
    pub gamma_s: f64,
    pub c1: f64,
    pub c2: f64,
    /// `max_P m(P)/μ(P)`
    pub d: f64,
    pub h_sup: f64,
    pub h_lip: f64,
    /// `1/h` at each node, used by `Υ_P`.
    inv_h: Vec<f64>,
}

impl TowerConeParams {
    /// Partition from the level masses of `m`, with `h` the `m`-normalized
    /// density of the invariant measure.
    pub fn new(h: &DiscreteFunction, a: f64, b: f64, c: f64, eps0: f64) -> Result<Self> {
        let layout = match h.grid.tower_layout() {
            Some(l) => l,
            None => bail!(Type, "tower cone needs a tower grid, got {}", h.grid.describe()),
        };
        if !(eps0 > 0.0) {
            bail!(Config, "eps0 must be positive");
        }
        if !h.is_real(TOL_CONE) || h.values.iter().any(|v| !(v.re > 0.0)) {
            bail!(Precondition, "density must be real and positive");
        }
        let m = layout.mass();
        let levels = layout.level_weight.len().max(1 + (0..h.len()).map(|i| layout.level(i)).max().unwrap_or(0));
        let mut level_mass = alloc::vec![0.0; levels + 1];
        for (i, w) in m.iter().enumerate() {
            level_mass[layout.level(i)] += w;
        }
        // smallest s whose upper part is lighter than eps0
        let mut s = levels;
        let mut above = 0.0;
        for l in (0..levels).rev() {
            if above + level_mass[l] >= eps0 {
                break;
            }
            above += level_mass[l];
            s = l;
        }
        let (p1, p2): (Vec<usize>, Vec<usize>) = (0..h.len()).partition(|&i| layout.level(i) < s);
        let p2_mass = p2.iter().map(|&i| m[i]).sum();
        let inv_h: Vec<f64> = h.values.iter().map(|v| 1.0 / v.re).collect();
        let d = p1.iter().map(|&i| inv_h[i]).fold(0.0, f64::max);
        let h_lip = h.norm_tower()?.seminorm;
        let h_sup = h.sup_norm();
        let mut p = TowerConeParams { a, b, c, eps0, s, p1, p2, p2_mass, gamma_s: 0.0, c1: 0.0, c2: 0.0, d, h_sup, h_lip, inv_h };
        p.set_abc(a, b, c);
        Ok(p)
    }

    fn set_abc(&mut self, a: f64, b: f64, c: f64) {
        self.a = a;
        self.b = b;
        self.c = c;
        self.c1 = a * self.h_sup + b * self.gamma_s;
        self.c2 = c.max(self.c1);
    }

    pub fn with_abc(&self, a: f64, b: f64, c: f64) -> Self {
        let mut p = self.clone();
        p.set_abc(a, b, c);
        p
    }

    /// Scaled copy `(σa, σb, σc)`.
    pub fn scaled(&self, sigma: f64) -> Self {
        self.with_abc(sigma * self.a, sigma * self.b, sigma * self.c)
    }

    /// Checks `m(P₂) < ε₀`, `a > max(D, 1)`, `b > L(h)`, `c > max(1, ‖h‖∞)`.
    pub fn validate(&self) -> Result<()> {
        if !(self.p2_mass < self.eps0) {
            bail!(Config, "m(P2) = {} is not below eps0 = {}", self.p2_mass, self.eps0);
        }
        if !(self.a > self.d.max(1.0)) {
            bail!(Config, "a = {} must exceed max(D, 1) = {}", self.a, self.d.max(1.0));
        }
        if !(self.b > self.h_lip) {
            bail!(Config, "b = {} must exceed L(h) = {}", self.b, self.h_lip);
        }
        if !(self.c > self.h_sup.max(1.0)) {
            bail!(Config, "c = {} must exceed max(1, |h|) = {}", self.c, self.h_sup.max(1.0));
        }
        Ok(())
    }
}

/// `Υ_P`, `Γ_P` on the cells of `P₁`, `Γ_{x,y}` on all ordered same-floor
/// pairs and `Γ_{x,±}` on `P₂`.
pub fn tower_functional_family(params: &TowerConeParams, grid: &alloc::sync::Arc<crate::grid::Grid>) -> Result<FunctionalFamily> {
    let layout = match grid.tower_layout() {
        Some(l) => l,
        None => bail!(Type, "tower cone needs a tower grid, got {}", grid.describe()),
    };
    if params.inv_h.len() != grid.len() {
        bail!(Type, "cone parameters were built for {} nodes, grid has {}", params.inv_h.len(), grid.len());
    }
    let one = C64::new(1.0, 0.0);
    let mut fs = Vec::new();
    for &x in &params.p1 {
        let w = C64::new(params.inv_h[x], 0.0);
        fs.push(LinearFunctional { label: Label::Upsilon(x), mass: 0.0, terms: alloc::vec![(x, w)] });
        fs.push(LinearFunctional { label: Label::GammaCell(x), mass: params.a, terms: alloc::vec![(x, -w)] });
    }
    let n = grid.len();
    let mut by_level: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let l = layout.level(i);
        if by_level.len() <= l {
            by_level.resize(l + 1, Vec::new());
        }
        by_level[l].push(i);
    }
    for nodes in &by_level {
        for &x in nodes {
            for &y in nodes {
                if x == y {
                    continue;
                }
                let d = grid.distance(x, y);
                if d > 0.0 {
                    let k = C64::new(1.0 / d, 0.0);
                    fs.push(LinearFunctional { label: Label::GammaPair(x, y), mass: params.b, terms: alloc::vec![(x, -k), (y, k)] });
                }
            }
        }
    }
    for &x in &params.p2 {
        fs.push(LinearFunctional { label: Label::GammaPlus(x), mass: params.c, terms: alloc::vec![(x, one)] });
        fs.push(LinearFunctional { label: Label::GammaMinus(x), mass: params.c, terms: alloc::vec![(x, -one)] });
    }
    if fs.is_empty() {
        bail!(Config, "tower cone family is empty");
    }
    Ok(FunctionalFamily::new(grid.clone(), fs))
}

fn max_slope(f: &[f64], grid: &crate::grid::Grid) -> f64 {
    let n = f.len();
    let mut best = f64::NEG_INFINITY;
    for x in 0..n {
        for y in 0..n {
            if x != y && grid.comparable(x, y) {
                let d = grid.distance(x, y);
                if d > 0.0 {
                    best = best.max((f[x] - f[y]) / d);
                }
            }
        }
    }
    best
}

fn shift_real(params: &TowerConeParams, f: &[f64], m: &[f64], grid: &crate::grid::Grid) -> Result<f64> {
    let (a, b, c) = (params.a, params.b, params.c);
    let (da, db, dc) = (a - 1.0, b - params.h_lip, c - params.h_sup);
    if !(da > 0.0 && db > 0.0 && dc > 0.0) {
        bail!(Config, "need a > 1, b > L(h) and c > |h| for the reproducing shift");
    }
    let mf: f64 = f.iter().zip(m).map(|(x, w)| x * w).sum();
    let ups = params.p1.iter().map(|&x| f[x] * params.inv_h[x]);
    let ups_max = ups.clone().fold(f64::NEG_INFINITY, f64::max);
    let ups_min = ups.fold(f64::INFINITY, f64::min);
    let sup = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut r = 0.0f64;
    if !params.p1.is_empty() {
        r = r.max((ups_max - a * mf) / da).max(-ups_min);
    }
    let slope = max_slope(f, grid);
    if slope.is_finite() {
        r = r.max((slope - b * mf) / db);
    }
    // the sup-norm condition reads (|f| - c m(f)) / (c - |h|)
    r = r.max((sup - c * mf) / dc);
    Ok(if r > 0.0 { r * (1.0 + 1e-9) } else { 0.0 })
}

/// `R(f)` with `f + R(f) h` in the complex cone; `R(f₁) + i R(f₂)` for
/// `f = f₁ + i f₂`.
pub fn reproducing_shift(params: &TowerConeParams, f: &DiscreteFunction, h: &DiscreteFunction) -> Result<C64> {
    if !f.same_grid(h) || params.inv_h.len() != f.len() {
        bail!(Type, "f, h and the cone parameters must share a grid");
    }
    let m = f.grid.reference_weights();
    let re: Vec<f64> = f.values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = f.values.iter().map(|v| v.im).collect();
    let r1 = shift_real(params, &re, &m, &f.grid)?;
    let r2 = if im.iter().any(|v| *v != 0.0) { shift_real(params, &im, &m, &f.grid)? } else { 0.0 };
    Ok(C64::new(r1, r2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationStep {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TowerCalibration {
    pub params: TowerConeParams,
    pub family: FunctionalFamily,
    /// Iterate count `k₀` at which the contraction was observed.
    pub k: usize,
    /// Worst `σ` with `L^k C ⊂ C_{σa,σb,σc}` over the sample.
    pub sigma: f64,
    /// Hilbert diameter of the sample images in the input cone.
    pub diameter: f64,
    pub worst: Option<Label>,
    pub attempts: Vec<CalibrationStep>,
}

/// Smallest `σ` such that every image lies in the cone scaled by `σ`, for
/// a family whose mass coefficients are the unscaled `a`, `b`, `c`.
pub fn sigma_needed(family: &FunctionalFamily, images: &[Vec<C64>]) -> (f64, Option<Label>) {
    let mut worst = (0.0f64, None);
    for g in images {
        let vals = family.evaluate_unchecked(g);
        let m: f64 = family.reference.iter().zip(g).map(|(w, v)| w * v.re).sum();
        for (s, v) in family.functionals.iter().zip(&vals) {
            let need = if s.mass == 0.0 {
                if v.re >= -TOL_CONE * v.norm().max(1.0) { 0.0 } else { f64::INFINITY }
            } else {
                let km = s.mass * m;
                if km > 0.0 { (km - v.re) / km } else { f64::INFINITY }
            };
            if need > worst.0 {
                worst = (need, Some(s.label.clone()));
            }
        }
    }
    worst
}

/// Iterates `L₀` cyclically over `ops`.
pub fn iterate(ops: &[AssembledOperator], v: &[C64], k: usize) -> Vec<C64> {
    let mut g = v.to_vec();
    for i in 0..k {
        g = ops[i % ops.len()].apply_values(&g);
    }
    g
}

/// Max pairwise Hilbert distance between cone elements.
pub fn hilbert_diameter(family: &FunctionalFamily, elements: &[Vec<C64>]) -> f64 {
    let vals: Vec<Vec<f64>> = elements.iter().map(|g| family.evaluate_unchecked(g).iter().map(|v| v.re).collect()).collect();
    let mut d = 0.0f64;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            d = d.max(hilbert_from_values(&vals[i], &vals[j]));
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationConfig {
    pub eps0: f64,
    /// Random samples, half of them on the cone boundary.
    pub samples: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub doublings: usize,
    /// Also push the node spikes of [`sample_cone_axes`].
    pub axes: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig { eps0: 0.05, samples: 40, k_min: 1, k_max: 60, doublings: 6, axes: true }
    }
}

fn strictly_inside(family: &FunctionalFamily, g: &[C64]) -> bool {
    let vals = family.evaluate_unchecked(g);
    let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    vals.iter().all(|v| v.re > TOL_CONE * scale)
}

/// Searches `k_min ≤ k ≤ k_max` and doubles `(a, b, c)` from the default
/// start until the sampled images of `L₀^k` land in the cone scaled by
/// `σ ≤ 0.9` and have a finite Hilbert diameter.
pub fn calibrate_tower_cone<R: Rng + ?Sized>(
    ops: &[AssembledOperator],
    h: &DiscreteFunction,
    cfg: &CalibrationConfig,
    rng: &mut R,
) -> Result<TowerCalibration> {
    if ops.is_empty() {
        bail!(Precondition, "empty window");
    }
    let base = TowerConeParams::new(h, 1.0, 1.0, 1.0, cfg.eps0)?;
    let (mut a, mut b, mut c) = (10.0 * base.d.max(1.0), 10.0 * base.h_lip.max(1.0), 10.0 * base.h_sup.max(1.0));
    let mut attempts = Vec::new();
    for _ in 0..=cfg.doublings {
        let params = base.with_abc(a, b, c);
        params.validate()?;
        let family = tower_functional_family(&params, &h.grid)?;
        let mut sample = sample_cone(&family, h, cfg.samples.div_ceil(2), rng)?;
        sample.extend(sample_cone_boundary(&family, h, cfg.samples / 2, rng)?);
        if cfg.axes {
            sample.extend(sample_cone_axes(&family, h)?);
        }
        let mut images: Vec<Vec<C64>> = sample.iter().map(|f| f.values.clone()).collect();
        for k in 1..=cfg.k_max {
            for g in images.iter_mut() {
                *g = ops[(k - 1) % ops.len()].apply_values(g);
            }
            if k < cfg.k_min {
                continue;
            }
            let (sigma, worst) = sigma_needed(&family, &images);
            attempts.push(CalibrationStep { a, b, c, k, sigma });
            if sigma <= 0.9 && images.iter().all(|g| strictly_inside(&family, g)) {
                let diameter = hilbert_diameter(&family, &images);
                return Ok(TowerCalibration { params, family, k, sigma, diameter, worst, attempts });
            }
        }
        a *= 2.0;
        b *= 2.0;
        c *= 2.0;
    }
    Err(crate::Error::Convergence {
        iterations: attempts.len(),
        last: attempts.last().map(|s| s.sigma).unwrap_or(f64::NAN),
        trace: attempts.iter().map(|s| s.sigma).collect(),
    })
}
