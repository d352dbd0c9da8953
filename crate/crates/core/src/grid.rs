//! Finite node sets standing in for the phase space of each stage.
//!
//! Three shapes are supported: nodes in `[0, 1]` (Chebyshev-Lobatto with
//! barycentric interpolation, or arbitrary increasing nodes with linear
//! interpolation), depth-`K` cylinders of a full shift, and the floors of a
//! truncated Young tower.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{bail, Result};
use crate::C64;

/// A point of some stage's phase space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Point {
    Real(f64),
    /// One-sided symbol sequence, truncated to finitely many symbols.
    Word(Vec<usize>),
    /// Tower point: level and the itinerary of its base projection.
    /// `word[0]` is the column.
    Tower { level: usize, word: Vec<usize> },
}

impl Point {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Point::Real(x) => Some(*x),
            _ => None,
        }
    }
}

/// Metadata carried in grid documents.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridParams {
    pub alpha: f64,
    pub xi: f64,
    pub beta: f64,
    pub r_max: usize,
    pub k_depth: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { alpha: 1.0, xi: f64::INFINITY, beta: 0.5, r_max: 0, k_depth: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Interpolation {
    /// Barycentric weights for Chebyshev-Lobatto nodes.
    Barycentric(Vec<f64>),
    PiecewiseLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalNodes {
    pub nodes: Vec<f64>,
    pub interpolation: Interpolation,
    pub quadrature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderNodes {
    pub alphabet: usize,
    pub depth: usize,
}

/// Node layout of a truncated tower. Node order is column-major: for each
/// column, each level, then base words in radix order.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerLayout {
    pub return_times: Vec<usize>,
    pub depth: usize,
    /// Base measure `m0` of each node (sums to one).
    pub mass0: Vec<f64>,
    /// Level weight `v_l = exp(l p / 2)`.
    pub level_weight: Vec<f64>,
    pub(crate) labels: Vec<(usize, usize, Vec<usize>)>,
    pub(crate) block_offset: Vec<Vec<usize>>,
}

impl TowerLayout {
    pub fn alphabet(&self) -> usize {
        self.return_times.len()
    }

    pub fn label(&self, i: usize) -> (usize, usize, &[usize]) {
        let (c, l, ref w) = self.labels[i];
        (c, l, w)
    }

    pub fn level(&self, i: usize) -> usize {
        self.labels[i].1
    }

    pub fn column(&self, i: usize) -> usize {
        self.labels[i].0
    }

    /// Weighted measure `m = v m0` of each node.
    pub fn mass(&self) -> Vec<f64> {
        (0..self.labels.len()).map(|i| self.mass0[i] * self.level_weight[self.level(i)]).collect()
    }

    fn index(&self, level: usize, word: &[usize]) -> Option<usize> {
        let j = s_first(word)?;
        if j >= self.alphabet() || level >= self.return_times[j] || word.len() < self.depth {
            return None;
        }
        let mut r = 0usize;
        for &s in &word[1..self.depth] {
            if s >= self.alphabet() {
                return None;
            }
            r = r * self.alphabet() + s;
        }
        Some(self.block_offset[j][level] + r)
    }
}

fn s_first(w: &[usize]) -> Option<usize> {
    w.first().copied()
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    Interval(IntervalNodes),
    Cylinder(CylinderNodes),
    Tower(TowerLayout),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    kind: GridKind,
    params: GridParams,
}

/// First index where two words differ, `None` if one is a prefix of the other.
pub fn separation_time(a: &[usize], b: &[usize]) -> Option<usize> {
    a.iter().zip(b).position(|(x, y)| x != y)
}

fn radix(word: &[usize], base: usize) -> usize {
    word.iter().fold(0, |acc, &s| acc * base + s)
}

fn unradix(mut i: usize, base: usize, len: usize) -> Vec<usize> {
    let mut w = vec![0; len];
    for k in (0..len).rev() {
        w[k] = i % base;
        i /= base;
    }
    w
}

/// Clenshaw-Curtis weights for `n` Lobatto points, mapped to `[0, 1]`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let big_n = n - 1;
    let nf = big_n as f64;
    let mut w = vec![0.0; n];
    if big_n == 0 {
        w[0] = 1.0;
        return w;
    }
    let theta = |k: usize| PI * k as f64 / nf;
    let mut v = vec![1.0; big_n.saturating_sub(1)];
    if big_n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        for k in 1..big_n / 2 {
            let kf = k as f64;
            for (ii, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * libm::cos(2.0 * kf * theta(ii + 1)) / (4.0 * kf * kf - 1.0);
            }
        }
        for (ii, vi) in v.iter_mut().enumerate() {
            *vi -= libm::cos(nf * theta(ii + 1)) / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        for k in 1..=(big_n - 1) / 2 {
            let kf = k as f64;
            for (ii, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * libm::cos(2.0 * kf * theta(ii + 1)) / (4.0 * kf * kf - 1.0);
            }
        }
    }
    w[big_n] = w[0];
    for (ii, vi) in v.iter().enumerate() {
        w[ii + 1] = 2.0 * vi / nf;
    }
    w.iter().map(|x| 0.5 * x).collect()
}

impl Grid {
    /// `n` Chebyshev-Lobatto nodes on `[0, 1]`, endpoints included, ascending.
    pub fn chebyshev(n: usize) -> Result<Grid> {
        if n < 2 {
            bail!(Construction, "a Chebyshev grid needs at least 2 nodes, got {n}");
        }
        let m = (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|k| {
                // sin form keeps the small nodes accurate
                let s = libm::sin(PI * k as f64 / (2.0 * m));
                s * s
            })
            .collect();
        let bary = (0..n)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Ok(Grid {
            kind: GridKind::Interval(IntervalNodes {
                nodes,
                interpolation: Interpolation::Barycentric(bary),
                quadrature: clenshaw_curtis(n),
            }),
            params: GridParams { xi: f64::INFINITY, ..GridParams::default() },
        })
    }

    /// Arbitrary strictly increasing nodes in `[0, 1]`, linear interpolation,
    /// constant continuation outside the node hull.
    pub fn piecewise_linear(nodes: Vec<f64>) -> Result<Grid> {
        if nodes.is_empty() {
            bail!(Construction, "empty node list");
        }
        if nodes.iter().any(|x| !(0.0..=1.0).contains(x)) {
            bail!(Domain, "nodes must lie in [0, 1]");
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            bail!(Construction, "nodes must be strictly increasing");
        }
        let n = nodes.len();
        let mut q = vec![0.0; n];
        for k in 0..n.saturating_sub(1) {
            let h = nodes[k + 1] - nodes[k];
            q[k] += 0.5 * h;
            q[k + 1] += 0.5 * h;
        }
        q[0] += nodes[0];
        q[n - 1] += 1.0 - nodes[n - 1];
        Ok(Grid {
            kind: GridKind::Interval(IntervalNodes {
                nodes,
                interpolation: Interpolation::PiecewiseLinear,
                quadrature: q,
            }),
            params: GridParams::default(),
        })
    }

    /// All words of length `depth` over `alphabet` symbols, with
    /// `d(x, y) = beta^{s(x, y)}`.
    pub fn cylinder(alphabet: usize, depth: usize, beta: f64) -> Result<Grid> {
        if alphabet < 1 || depth < 1 {
            bail!(Construction, "cylinder grid needs alphabet >= 1 and depth >= 1");
        }
        if !(beta > 0.0 && beta < 1.0) {
            bail!(Construction, "beta must lie in (0, 1), got {beta}");
        }
        let total = alphabet.checked_pow(depth as u32).filter(|t| *t <= 1 << 24);
        if total.is_none() {
            bail!(Construction, "{alphabet}^{depth} cylinders is too many nodes");
        }
        Ok(Grid {
            kind: GridKind::Cylinder(CylinderNodes { alphabet, depth }),
            params: GridParams { beta, k_depth: depth, ..GridParams::default() },
        })
    }

    /// Tower grid from per-column return times, base cylinder masses and
    /// level weights. `base_mass(word)` gives the base measure of a depth-`K`
    /// cylinder; it is divided by the mean return time.
    pub fn tower(
        return_times: Vec<usize>,
        depth: usize,
        beta: f64,
        level_weight: Vec<f64>,
        base_mass: impl Fn(&[usize]) -> f64,
    ) -> Result<Grid> {
        let alphabet = return_times.len();
        if alphabet == 0 || depth == 0 {
            bail!(Construction, "tower grid needs at least one column and depth >= 1");
        }
        let r_max = *return_times.iter().max().unwrap();
        if level_weight.len() < r_max {
            bail!(Construction, "need {r_max} level weights, got {}", level_weight.len());
        }
        let per_block = alphabet.pow(depth as u32 - 1);
        let mut labels = Vec::new();
        let mut block_offset = Vec::with_capacity(alphabet);
        let mut raw = Vec::new();
        for (j, &r) in return_times.iter().enumerate() {
            let mut offs = Vec::with_capacity(r);
            for l in 0..r {
                offs.push(labels.len());
                for t in 0..per_block {
                    let mut w = vec![j];
                    w.extend(unradix(t, alphabet, depth - 1));
                    raw.push(base_mass(&w));
                    labels.push((j, l, w));
                }
            }
            block_offset.push(offs);
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            bail!(Construction, "tower masses must be positive and finite");
        }
        let mass0 = raw.iter().map(|m| m / total).collect();
        Ok(Grid {
            kind: GridKind::Tower(TowerLayout {
                return_times,
                depth,
                mass0,
                level_weight,
                labels,
                block_offset,
            }),
            params: GridParams { beta, r_max, k_depth: depth, ..GridParams::default() },
        })
    }

    pub fn kind(&self) -> &GridKind {
        &self.kind
    }

    pub fn params(&self) -> GridParams {
        self.params
    }

    pub fn with_params(mut self, alpha: f64, xi: f64) -> Self {
        self.params.alpha = alpha;
        self.params.xi = xi;
        self
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            GridKind::Interval(iv) => iv.nodes.len(),
            GridKind::Cylinder(c) => c.alphabet.pow(c.depth as u32),
            GridKind::Tower(t) => t.labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn interval(&self) -> Option<&IntervalNodes> {
        match &self.kind {
            GridKind::Interval(iv) => Some(iv),
            _ => None,
        }
    }

    pub fn tower_layout(&self) -> Option<&TowerLayout> {
        match &self.kind {
            GridKind::Tower(t) => Some(t),
            _ => None,
        }
    }

    pub fn node_point(&self, i: usize) -> Point {
        match &self.kind {
            GridKind::Interval(iv) => Point::Real(iv.nodes[i]),
            GridKind::Cylinder(c) => Point::Word(unradix(i, c.alphabet, c.depth)),
            GridKind::Tower(t) => {
                let (_, l, w) = t.label(i);
                Point::Tower { level: l, word: w.to_vec() }
            }
        }
    }

    /// Node index of a symbolic point (its depth-`K` cylinder).
    pub fn locate(&self, p: &Point) -> Result<usize> {
        match (&self.kind, p) {
            (GridKind::Cylinder(c), Point::Word(w)) => {
                if w.len() < c.depth || w[..c.depth].iter().any(|&s| s >= c.alphabet) {
                    bail!(Domain, "word {w:?} does not determine a depth-{} cylinder", c.depth);
                }
                Ok(radix(&w[..c.depth], c.alphabet))
            }
            (GridKind::Tower(t), Point::Tower { level, word }) => match t.index(*level, word) {
                Some(i) => Ok(i),
                None => bail!(Domain, "tower point (level {level}, word {word:?}) not on the grid"),
            },
            (GridKind::Interval(_), Point::Real(_)) => {
                bail!(Type, "interval points are interpolated, not located")
            }
            _ => bail!(Type, "point {p:?} does not belong to this kind of grid"),
        }
    }

    /// Interpolation row of an interval point: `f(x) = Σ w_k f(x_k)`.
    pub fn interval_row(&self, x: f64, out: &mut Vec<(usize, f64)>) -> Result<()> {
        out.clear();
        let iv = match &self.kind {
            GridKind::Interval(iv) => iv,
            _ => bail!(Type, "interval interpolation on a symbolic grid"),
        };
        if !(0.0..=1.0).contains(&x) {
            bail!(Domain, "x = {x} is outside [0, 1]");
        }
        let nodes = &iv.nodes;
        match &iv.interpolation {
            Interpolation::Barycentric(w) => {
                let mut den = 0.0;
                for (k, (&xk, &wk)) in nodes.iter().zip(w).enumerate() {
                    let d = x - xk;
                    if d == 0.0 {
                        out.clear();
                        out.push((k, 1.0));
                        return Ok(());
                    }
                    let t = wk / d;
                    den += t;
                    out.push((k, t));
                }
                for e in out.iter_mut() {
                    e.1 /= den;
                }
            }
            Interpolation::PiecewiseLinear => {
                let n = nodes.len();
                if x <= nodes[0] {
                    out.push((0, 1.0));
                } else if x >= nodes[n - 1] {
                    out.push((n - 1, 1.0));
                } else {
                    let k = nodes.partition_point(|&v| v <= x) - 1;
                    let t = (x - nodes[k]) / (nodes[k + 1] - nodes[k]);
                    out.push((k, 1.0 - t));
                    if t > 0.0 {
                        out.push((k + 1, t));
                    }
                }
            }
        }
        Ok(())
    }

    /// `row += c · (interpolation row of x)`, without an intermediate buffer.
    pub fn accumulate_row(&self, x: f64, c: C64, row: &mut [C64], buf: &mut Vec<(usize, f64)>) -> Result<()> {
        if let GridKind::Interval(IntervalNodes { nodes, interpolation: Interpolation::Barycentric(w), .. }) = &self.kind {
            if (0.0..=1.0).contains(&x) && nodes.iter().all(|&xk| x != xk) {
                buf.clear();
                let mut den = 0.0;
                for (k, (&xk, &wk)) in nodes.iter().zip(w).enumerate() {
                    let t = wk / (x - xk);
                    den += t;
                    buf.push((k, t));
                }
                let s = c / den;
                for (r, &(_, t)) in row.iter_mut().zip(buf.iter()) {
                    *r += s * t;
                }
                return Ok(());
            }
        }
        self.interval_row(x, buf)?;
        for &(k, v) in buf.iter() {
            row[k] += c * v;
        }
        Ok(())
    }

    /// Distance between nodes. Tower nodes on different floors get 1.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.kind {
            GridKind::Interval(iv) => libm::fabs(iv.nodes[i] - iv.nodes[j]),
            GridKind::Cylinder(c) => {
                let s = first_radix_difference(i, j, c.alphabet, c.depth);
                libm::pow(self.params.beta, s as f64)
            }
            GridKind::Tower(t) => {
                let (_, li, wi) = t.label(i);
                let (_, lj, wj) = t.label(j);
                if li != lj {
                    return 1.0;
                }
                match separation_time(wi, wj) {
                    Some(s) => libm::pow(self.params.beta, s as f64),
                    None => 0.0,
                }
            }
        }
    }

    /// Whether two nodes may be compared by the Hölder/Lipschitz seminorm.
    pub fn comparable(&self, i: usize, j: usize) -> bool {
        match &self.kind {
            GridKind::Tower(t) => t.level(i) == t.level(j),
            _ => true,
        }
    }

    /// Probability weights used as the default reference functional:
    /// Clenshaw-Curtis or trapezoid weights on intervals, uniform weights on
    /// cylinders, and the weighted measure `m = v m0` on towers.
    pub fn reference_weights(&self) -> Vec<f64> {
        match &self.kind {
            GridKind::Interval(iv) => iv.quadrature.clone(),
            GridKind::Cylinder(_) => {
                let n = self.len();
                vec![1.0 / n as f64; n]
            }
            GridKind::Tower(t) => t.mass(),
        }
    }

    pub fn describe(&self) -> alloc::string::String {
        match &self.kind {
            GridKind::Interval(iv) => match iv.interpolation {
                Interpolation::Barycentric(_) => format!("chebyshev({})", iv.nodes.len()),
                Interpolation::PiecewiseLinear => format!("linear({})", iv.nodes.len()),
            },
            GridKind::Cylinder(c) => format!("cylinder({}^{})", c.alphabet, c.depth),
            GridKind::Tower(t) => format!("tower({} nodes, K = {})", t.labels.len(), t.depth),
        }
    }
}

fn first_radix_difference(i: usize, j: usize, base: usize, len: usize) -> usize {
    let (wi, wj) = (unradix(i, base, len), unradix(j, base, len));
    separation_time(&wi, &wj).unwrap_or(len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_nodes_and_quadrature() {
        let g = Grid::chebyshev(9).unwrap();
        let iv = g.interval().unwrap();
        assert_eq!(iv.nodes[0], 0.0);
        assert!((iv.nodes[8] - 1.0).abs() < 1e-15);
        assert!((iv.nodes[4] - 0.5).abs() < 1e-15);
        let s: f64 = iv.quadrature.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        // exact for x^6 on 9 points
        let m6: f64 = iv.nodes.iter().zip(&iv.quadrature).map(|(x, w)| w * x.powi(6)).sum();
        assert!((m6 - 1.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn barycentric_reproduces_polynomials() {
        let g = Grid::chebyshev(6).unwrap();
        let nodes = g.interval().unwrap().nodes.clone();
        let mut row = Vec::new();
        for &x in &[0.0, 0.13, 0.5, 0.77, 1.0] {
            g.interval_row(x, &mut row).unwrap();
            let v: f64 = row.iter().map(|&(k, w)| w * nodes[k].powi(3)).sum();
            assert!((v - x * x * x).abs() < 1e-14);
        }
        assert!(g.interval_row(1.5, &mut row).is_err());
    }

    #[test]
    fn cylinder_distance_uses_first_difference() {
        let g = Grid::cylinder(2, 3, 0.5).unwrap();
        let a = g.locate(&Point::Word(vec![0, 1, 1, 0])).unwrap();
        let b = g.locate(&Point::Word(vec![0, 1, 0])).unwrap();
        let c = g.locate(&Point::Word(vec![1, 1, 0])).unwrap();
        assert_eq!(g.distance(a, b), 0.25);
        assert_eq!(g.distance(b, c), 1.0);
        assert_eq!(g.node_point(a), Point::Word(vec![0, 1, 1]));
    }
}
