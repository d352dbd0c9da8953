//! Nodal functions on a [`Grid`] and their Hölder/Lipschitz norms.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::grid::{Grid, GridKind, Point};
use crate::C64;

/// Complex nodal values on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    pub grid: Arc<Grid>,
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormReport {
    pub sup: f64,
    pub seminorm: f64,
    pub total: f64,
}

impl DiscreteFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            bail!(Type, "{} values for a grid of {} nodes", values.len(), grid.len());
        }
        Ok(DiscreteFunction { grid, values })
    }

    pub fn from_real(grid: Arc<Grid>, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn constant(grid: Arc<Grid>, c: C64) -> Self {
        let n = grid.len();
        DiscreteFunction { grid, values: alloc::vec![c; n] }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&Point) -> C64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node_point(i))).collect();
        DiscreteFunction { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &DiscreteFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let s = self.sup_norm().max(1.0);
        self.values.iter().all(|v| v.im.abs() <= tol * s)
    }

    pub fn scale(&self, c: C64) -> Self {
        DiscreteFunction { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: C64, other: &DiscreteFunction) -> Result<Self> {
        if !self.same_grid(other) {
            bail!(Type, "functions live on different grids");
        }
        Ok(DiscreteFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
        })
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        DiscreteFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn real_part(&self) -> Self {
        self.map(|v| C64::new(v.re, 0.0))
    }

    pub fn imag_part(&self) -> Self {
        self.map(|v| C64::new(v.im, 0.0))
    }

    /// Integral against the grid's reference weights.
    pub fn integrate(&self) -> C64 {
        self.grid.reference_weights().iter().zip(&self.values).map(|(w, v)| v * w).sum()
    }

    /// Value at an arbitrary point: interpolation on intervals, cylinder
    /// lookup on symbolic grids.
    pub fn evaluate(&self, p: &Point) -> Result<C64> {
        match (self.grid.kind(), p) {
            (GridKind::Interval(_), Point::Real(x)) => {
                let mut row = Vec::new();
                self.grid.interval_row(*x, &mut row)?;
                Ok(row.iter().map(|&(k, w)| self.values[k] * w).sum())
            }
            _ => Ok(self.values[self.grid.locate(p)?]),
        }
    }

    /// `‖f‖∞ + |f|_{α, ξ}` with the seminorm taken over node pairs at
    /// distance below `ξ`.
    pub fn norm_alpha(&self, alpha: f64, xi: f64) -> Result<NormReport> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            bail!(Precondition, "alpha must lie in (0, 1], got {alpha}");
        }
        if !(xi > 0.0) {
            bail!(Precondition, "xi must be positive, got {xi}");
        }
        let seminorm = self.pair_seminorm(|d| d < xi, |d| libm::pow(d, alpha));
        let sup = self.sup_norm();
        Ok(NormReport { sup, seminorm, total: sup + seminorm })
    }

    /// Tower norm: sup norm plus the same-floor Lipschitz constant for
    /// `d = beta^s`. The grid's own `beta` is used.
    pub fn norm_tower(&self) -> Result<NormReport> {
        if self.grid.tower_layout().is_none() {
            bail!(Type, "tower norm requested on a {} grid", self.grid.describe());
        }
        let seminorm = self.pair_seminorm(|_| true, |d| d);
        let sup = self.sup_norm();
        Ok(NormReport { sup, seminorm, total: sup + seminorm })
    }

    fn pair_seminorm(&self, keep: impl Fn(f64) -> bool, denom: impl Fn(f64) -> f64) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                if !self.grid.comparable(i, j) {
                    continue;
                }
                let d = self.grid.distance(i, j);
                if d > 0.0 && keep(d) {
                    best = best.max((self.values[i] - self.values[j]).norm() / denom(d));
                }
            }
        }
        best
    }
}
