//! Cones given by finitely many linear functionals: membership, the real
//! Hilbert metric `d_C`, the complex gauge `δ_C` through the exclusion set
//! `E(x, y) = {z : z x − y ∉ C}`, and aperture/contraction helpers.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use crate::error::{bail, Result};
use crate::function::DiscreteFunction;
use crate::grid::Grid;
use crate::{C64, TOL_CONE};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    /// Point evaluation at a node.
    Node(usize),
    Upsilon(usize),
    GammaCell(usize),
    GammaPair(usize, usize),
    GammaPlus(usize),
    GammaMinus(usize),
    Named(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Node(i) => write!(f, "node[{i}]"),
            Label::Upsilon(p) => write!(f, "upsilon[{p}]"),
            Label::GammaCell(p) => write!(f, "gamma_cell[{p}]"),
            Label::GammaPair(x, y) => write!(f, "gamma[{x},{y}]"),
            Label::GammaPlus(x) => write!(f, "gamma[{x},+]"),
            Label::GammaMinus(x) => write!(f, "gamma[{x},-]"),
            Label::Named(s) => f.write_str(s),
        }
    }
}

/// `s(f) = mass · ∫ f dref + Σ c_k f(x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional {
    pub label: Label,
    pub mass: f64,
    pub terms: Vec<(usize, C64)>,
}

impl LinearFunctional {
    pub fn point(i: usize) -> Self {
        LinearFunctional { label: Label::Node(i), mass: 0.0, terms: alloc::vec![(i, C64::new(1.0, 0.0))] }
    }

    pub fn dense(label: Label, coeffs: &[C64]) -> Self {
        let terms = coeffs.iter().copied().enumerate().filter(|(_, c)| *c != C64::new(0.0, 0.0)).collect();
        LinearFunctional { label, mass: 0.0, terms }
    }
}

/// Defining functionals of a real cone `C = {f : s(f) ≥ 0 ∀ s ∈ S}` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalFamily {
    pub grid: Arc<Grid>,
    /// Weights of the mass term shared by all functionals.
    pub reference: Vec<f64>,
    pub functionals: Vec<LinearFunctional>,
}

/// One nonempty component of the exclusion set, for a pair of functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Region {
    /// `|z − center| < radius`
    Disc { center: C64, radius: f64 },
    /// `|z − center| > radius`
    DiscComplement { center: C64, radius: f64 },
    /// `Re(z · normal) > offset`
    HalfPlane { normal: C64, offset: f64 },
    Plane,
}

impl Region {
    pub fn contains(&self, z: C64) -> bool {
        match *self {
            Region::Disc { center, radius } => (z - center).norm() < radius,
            Region::DiscComplement { center, radius } => (z - center).norm() > radius,
            Region::HalfPlane { normal, offset } => (z * normal).re > offset,
            Region::Plane => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairRegion {
    pub mu: usize,
    pub nu: usize,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExclusionBounds {
    /// `inf |E|`
    pub a: f64,
    /// `sup |E|`
    pub b: f64,
    pub collinear: bool,
    pub witnesses: Vec<PairRegion>,
}

impl ExclusionBounds {
    pub fn delta(&self) -> f64 {
        delta_from_bounds(self.collinear, self.a, self.b)
    }
}

fn delta_from_bounds(collinear: bool, a: f64, b: f64) -> f64 {
    if collinear || a > b {
        // a > b only when no pair produced a region (numerically empty E)
        0.0
    } else if a == 0.0 || b == f64::INFINITY {
        f64::INFINITY
    } else {
        libm::log(b / a)
    }
}

impl FunctionalFamily {
    pub fn new(grid: Arc<Grid>, functionals: Vec<LinearFunctional>) -> Self {
        let reference = grid.reference_weights();
        FunctionalFamily { grid, reference, functionals }
    }

    /// Cone of functions with nonnegative node values.
    pub fn positive_orthant(grid: Arc<Grid>) -> Self {
        let fs = (0..grid.len()).map(LinearFunctional::point).collect();
        Self::new(grid, fs)
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    fn check(&self, f: &DiscreteFunction) -> Result<()> {
        if !(Arc::ptr_eq(&self.grid, &f.grid) || *self.grid == *f.grid) {
            bail!(Type, "function grid {} does not match the cone grid {}", f.grid.describe(), self.grid.describe());
        }
        if f.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            bail!(NonFinite, "function has non-finite node values");
        }
        Ok(())
    }

    /// All functional values `s(f)`.
    pub fn evaluate(&self, f: &DiscreteFunction) -> Result<Vec<C64>> {
        self.check(f)?;
        Ok(self.evaluate_unchecked(&f.values))
    }

    pub(crate) fn evaluate_unchecked(&self, v: &[C64]) -> Vec<C64> {
        let needs_mass = self.functionals.iter().any(|s| s.mass != 0.0);
        let m: C64 = if needs_mass { self.reference.iter().zip(v).map(|(w, x)| x * w).sum() } else { C64::new(0.0, 0.0) };
        self.functionals
            .iter()
            .map(|s| s.terms.iter().fold(m * s.mass, |acc, &(k, c)| acc + c * v[k]))
            .collect()
    }

    /// Dual sup-norm `Σ_i |coefficient_i|` of a functional on this grid.
    pub fn dual_norm(&self, s: &LinearFunctional) -> f64 {
        let mut dense: Vec<C64> = self.reference.iter().map(|w| C64::new(w * s.mass, 0.0)).collect();
        for &(k, c) in &s.terms {
            dense[k] += c;
        }
        dense.iter().map(|c| c.norm()).sum()
    }

    pub fn real_cone_contains(&self, f: &DiscreteFunction) -> Result<bool> {
        self.check(f)?;
        if !f.is_real(TOL_CONE) {
            return Ok(false);
        }
        let vals = self.evaluate_unchecked(&f.values);
        Ok(real_values_in_cone(&vals))
    }

    /// Membership in the canonical complexification: all values `s(f)` fit
    /// in a closed quarter-plane sector. Decided from the largest angular
    /// gap after sorting, which is equivalent to the pairwise test
    /// `Re(conj(s(f)) t(f)) ≥ 0`.
    pub fn complex_cone_contains(&self, f: &DiscreteFunction) -> Result<bool> {
        self.check(f)?;
        Ok(complex_values_in_cone(&self.evaluate_unchecked(&f.values)))
    }

    /// Real Hilbert metric `ln(β(f, g) β(g, f))`.
    pub fn hilbert_distance(&self, f: &DiscreteFunction, g: &DiscreteFunction) -> Result<f64> {
        if !self.real_cone_contains(f)? || !self.real_cone_contains(g)? {
            bail!(Precondition, "hilbert_distance needs both functions in the real cone");
        }
        let fv: Vec<f64> = self.evaluate_unchecked(&f.values).iter().map(|v| v.re).collect();
        let gv: Vec<f64> = self.evaluate_unchecked(&g.values).iter().map(|v| v.re).collect();
        Ok(hilbert_from_values(&fv, &gv))
    }

    /// Bounds on the exclusion set with every nonempty pair region as a
    /// witness. Quadratic in the family size; prefer [`Self::delta_distance`]
    /// when only the distance is needed.
    pub fn exclusion_set_bounds(&self, x: &DiscreteFunction, y: &DiscreteFunction) -> Result<ExclusionBounds> {
        self.delta_preconditions(x, y)?;
        if collinear(&x.values, &y.values) {
            return Ok(ExclusionBounds { a: 0.0, b: f64::INFINITY, collinear: true, witnesses: Vec::new() });
        }
        let xs = self.evaluate_unchecked(&x.values);
        let ys = self.evaluate_unchecked(&y.values);
        let mut a = f64::INFINITY;
        let mut b = 0.0f64;
        let mut witnesses = Vec::new();
        for mu in 0..xs.len() {
            for nu in mu + 1..xs.len() {
                if let Some((region, lo, hi)) = pair_region(xs[mu], ys[mu], xs[nu], ys[nu]) {
                    a = a.min(lo);
                    b = b.max(hi);
                    witnesses.push(PairRegion { mu, nu, region });
                }
            }
        }
        Ok(ExclusionBounds { a, b, collinear: false, witnesses })
    }

    /// `δ_C(x, y) = ln(b / a)`; zero for collinear inputs, `+∞` when the
    /// exclusion set touches the origin or is unbounded.
    pub fn delta_distance(&self, x: &DiscreteFunction, y: &DiscreteFunction) -> Result<f64> {
        self.delta_preconditions(x, y)?;
        if collinear(&x.values, &y.values) {
            return Ok(0.0);
        }
        let xs = self.evaluate_unchecked(&x.values);
        let ys = self.evaluate_unchecked(&y.values);
        let (a, b) = exclusion_extent(&xs, &ys);
        Ok(delta_from_bounds(false, a, b))
    }

    fn delta_preconditions(&self, x: &DiscreteFunction, y: &DiscreteFunction) -> Result<()> {
        for (name, f) in [("x", x), ("y", y)] {
            if f.sup_norm() == 0.0 {
                bail!(Precondition, "{name} is the zero vector");
            }
            if !self.complex_cone_contains(f)? {
                bail!(Precondition, "{name} is not in the complex cone");
            }
        }
        Ok(())
    }

    /// Smallest `K` with `‖f‖∞ ‖μ‖ ≤ K μ(f)` over the sample; also returns
    /// the certified bound `2√2 K` for the complexified cone.
    pub fn aperture_constant(&self, mu: &LinearFunctional, sample: &[DiscreteFunction]) -> Result<(f64, f64)> {
        let norm_mu = self.dual_norm(mu);
        let one = FunctionalFamily { grid: self.grid.clone(), reference: self.reference.clone(), functionals: alloc::vec![mu.clone()] };
        let mut k = 0.0f64;
        for f in sample {
            self.check(f)?;
            let sup = f.sup_norm();
            if sup == 0.0 {
                continue;
            }
            let m = one.evaluate_unchecked(&f.values)[0];
            if !(m.re > 0.0) || m.im.abs() > TOL_CONE * m.norm().max(1.0) {
                bail!(Aperture, "functional {} is not positive on a sample member (value {m})", mu.label);
            }
            k = k.max(sup * norm_mu / m.re);
        }
        Ok((k, 2.0 * core::f64::consts::SQRT_2 * k))
    }
}

pub(crate) fn real_values_in_cone(vals: &[C64]) -> bool {
    let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    vals.iter().all(|v| v.re >= -TOL_CONE * scale)
}

pub(crate) fn complex_values_in_cone(vals: &[C64]) -> bool {
    let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return true;
    }
    let mut ang: Vec<f64> = vals.iter().filter(|v| v.norm() > TOL_CONE * scale).map(|v| v.arg()).collect();
    if ang.len() < 2 {
        return true;
    }
    ang.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut gap = ang[0] + 2.0 * PI - ang[ang.len() - 1];
    for w in ang.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    2.0 * PI - gap <= FRAC_PI_2 + 1e-10
}

/// Pairwise form of the complex membership test, kept for cross-checks.
pub fn complex_values_in_cone_pairwise(vals: &[C64]) -> bool {
    for (i, a) in vals.iter().enumerate() {
        for b in &vals[i + 1..] {
            if (a.conj() * b).re < -1e-10 * a.norm() * b.norm() {
                return false;
            }
        }
    }
    true
}

pub(crate) fn hilbert_from_values(f: &[f64], g: &[f64]) -> f64 {
    let beta = |f: &[f64], g: &[f64]| -> f64 {
        let sf = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let sg = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut best = 0.0f64;
        for (a, b) in f.iter().zip(g) {
            if *a > TOL_CONE * sf {
                best = best.max(b / a);
            } else if *b > TOL_CONE * sg {
                return f64::INFINITY;
            }
        }
        best
    };
    let p = beta(f, g) * beta(g, f);
    if p.is_infinite() {
        f64::INFINITY
    } else {
        libm::log(p).max(0.0)
    }
}

fn collinear(x: &[C64], y: &[C64]) -> bool {
    let xx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    if xx == 0.0 {
        return true;
    }
    let xy: C64 = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    let c = xy / xx;
    let ys = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let r = x.iter().zip(y).map(|(a, b)| (b - c * a).norm()).fold(0.0, f64::max);
    r <= 1e-12 * ys
}

/// Failure region of `Re(conj(zA − B)(zC − D)) < 0` with its inf and sup
/// modulus. `A, B` are one functional on `x, y`; `C, D` another.
pub fn pair_region(ax: C64, by: C64, cx: C64, dy: C64) -> Option<(Region, f64, f64)> {
    let alpha = (ax.conj() * cx).re;
    let w = by.conj() * cx + ax * dy.conj();
    let c0 = (by.conj() * dy).re;
    let w2 = w.norm_sqr();
    let small = 1e-13 * ax.norm() * cx.norm();
    if alpha.abs() <= small {
        if w2 > 0.0 {
            let wn = libm::sqrt(w2);
            // Re(z w) > c0
            return Some((Region::HalfPlane { normal: w, offset: c0 }, c0.max(0.0) / wn, f64::INFINITY));
        }
        return if c0 < 0.0 { Some((Region::Plane, 0.0, f64::INFINITY)) } else { None };
    }
    let num = w2 - 4.0 * alpha * c0;
    let center = w.conj() / (2.0 * alpha);
    let cn = center.norm();
    if alpha > 0.0 {
        if num <= 0.0 {
            return None;
        }
        let r = libm::sqrt(num) / (2.0 * alpha);
        Some((Region::Disc { center, radius: r }, (cn - r).max(0.0), cn + r))
    } else {
        if num < 0.0 {
            return Some((Region::Plane, 0.0, f64::INFINITY));
        }
        let r = libm::sqrt(num) / (2.0 * alpha.abs());
        let lo = if cn < r { r - cn } else { 0.0 };
        Some((Region::DiscComplement { center, radius: r }, lo, f64::INFINITY))
    }
}

/// `(inf |E|, sup |E|)` over all functional pairs, without allocating.
/// Stops early once the answer is known to be `+∞`.
pub(crate) fn exclusion_extent(xs: &[C64], ys: &[C64]) -> (f64, f64) {
    let n = xs.len();
    let (xr, xi): (Vec<f64>, Vec<f64>) = xs.iter().map(|v| (v.re, v.im)).unzip();
    let (yr, yi): (Vec<f64>, Vec<f64>) = ys.iter().map(|v| (v.re, v.im)).unzip();
    let xn: Vec<f64> = xs.iter().map(|v| v.norm()).collect();
    let mut a = f64::INFINITY;
    let mut b = 0.0f64;
    for mu in 0..n {
        let (ar, ai, br, bi) = (xr[mu], xi[mu], yr[mu], yi[mu]);
        let an = xn[mu];
        for nu in mu + 1..n {
            let (cr, ci, dr, di) = (xr[nu], xi[nu], yr[nu], yi[nu]);
            let alpha = ar * cr + ai * ci;
            // w = conj(B) C + A conj(D)
            let wr = br * cr + bi * ci + ar * dr + ai * di;
            let wi = br * ci - bi * cr + ai * dr - ar * di;
            let c0 = br * dr + bi * di;
            let w2 = wr * wr + wi * wi;
            let num = w2 - 4.0 * alpha * c0;
            if alpha > 0.0 && num <= 0.0 && alpha > 1e-13 * an * xn[nu] {
                continue;
            }
            if let Some((_, lo, hi)) = pair_region(xs[mu], ys[mu], xs[nu], ys[nu]) {
                a = a.min(lo);
                b = b.max(hi);
            }
        }
        if a == 0.0 || b == f64::INFINITY {
            return (a, b);
        }
    }
    (a, b)
}

/// Birkhoff contraction factor `tanh(D / 4)`, equal to 1 for `D = ∞`.
pub fn birkhoff_bound(diameter: f64) -> f64 {
    if diameter.is_infinite() {
        1.0
    } else {
        libm::tanh(diameter / 4.0)
    }
}

pub fn describe_region(r: &Region) -> String {
    format!("{r:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn quadrant() -> (FunctionalFamily, Arc<Grid>) {
        let g = Arc::new(Grid::piecewise_linear(vec![0.25, 0.75]).unwrap());
        (FunctionalFamily::positive_orthant(g.clone()), g)
    }

    fn f(g: &Arc<Grid>, v: [f64; 2]) -> DiscreteFunction {
        DiscreteFunction::from_real(g.clone(), &v).unwrap()
    }

    #[test]
    fn quadrant_examples() {
        let (s, g) = quadrant();
        assert!((s.hilbert_distance(&f(&g, [1.0, 1.0]), &f(&g, [2.0, 1.0])).unwrap() - libm::log(2.0)).abs() < 1e-15);
        assert_eq!(s.hilbert_distance(&f(&g, [1.0, 1.0]), &f(&g, [1.0, 0.0])).unwrap(), f64::INFINITY);
        let e = s.exclusion_set_bounds(&f(&g, [1.0, 1.0]), &f(&g, [2.0, 1.0])).unwrap();
        assert!((e.a - 1.0).abs() < 1e-15 && (e.b - 2.0).abs() < 1e-15);
        assert_eq!(e.witnesses.len(), 1);
        assert!(matches!(e.witnesses[0].region, Region::Disc { .. }));
        assert!((e.delta() - libm::log(2.0)).abs() < 1e-15);
        let e = s.exclusion_set_bounds(&f(&g, [1.0, 1.0]), &f(&g, [1.0, 0.0])).unwrap();
        assert_eq!((e.a, e.b), (0.0, 1.0));
        assert_eq!(s.delta_distance(&f(&g, [1.0, 1.0]), &f(&g, [1.0, 0.0])).unwrap(), f64::INFINITY);
        assert_eq!(s.delta_distance(&f(&g, [1.0, 2.0]), &f(&g, [2.0, 4.0])).unwrap(), 0.0);
    }

    #[test]
    fn membership_examples() {
        let (s, g) = quadrant();
        let c = DiscreteFunction::new(g.clone(), vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        assert!(s.complex_cone_contains(&c).unwrap());
        assert!(!s.complex_cone_contains(&f(&g, [1.0, -1.0])).unwrap());
        assert!(!s.real_cone_contains(&f(&g, [1.0, -1.0])).unwrap());
        assert!(s.real_cone_contains(&f(&g, [0.0, 3.0])).unwrap());
        let r = s.hilbert_distance(&f(&g, [1.0, -1.0]), &f(&g, [1.0, 1.0]));
        assert!(matches!(r, Err(crate::Error::Precondition(_))));
    }

    #[test]
    fn pair_region_disc_matches_direct_test() {
        let (ax, by, cx, dy) = (C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let (r, lo, hi) = pair_region(ax, by, cx, dy).unwrap();
        assert_eq!((lo, hi), (1.0, 2.0));
        for z in [C64::new(1.5, 0.0), C64::new(1.5, 0.4), C64::new(1.1, 0.0), C64::new(0.9, 0.0), C64::new(1.5, 0.6)] {
            let q = ((z * ax - by).conj() * (z * cx - dy)).re;
            assert_eq!(r.contains(z), q < 0.0, "z = {z}");
        }
    }

    #[test]
    fn birkhoff_bound_limits() {
        assert_eq!(birkhoff_bound(f64::INFINITY), 1.0);
        assert_eq!(birkhoff_bound(0.0), 0.0);
    }

    #[test]
    fn aperture_of_quadrant() {
        let (s, g) = quadrant();
        let mu = LinearFunctional::dense(Label::Named("sum".into()), &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let (k, kc) = s.aperture_constant(&mu, &[f(&g, [1.0, 1.0]), f(&g, [1.0, 0.0])]).unwrap();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((kc - 4.0 * core::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(matches!(s.aperture_constant(&mu, &[f(&g, [1.0, -1.0])]), Err(crate::Error::Aperture(_))));
    }
}
