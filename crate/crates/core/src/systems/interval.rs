use alloc::vec::Vec;

use super::{Branch, BranchSet};
use crate::error::{bail, Result};
use crate::grid::Point;

/// Full affine branch mapping `[lo, hi)` onto `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffineBranch {
    pub lo: f64,
    pub hi: f64,
    pub increasing: bool,
    pub log_weight: f64,
}

impl AffineBranch {
    /// Branch with the Lebesgue-conformal weight `−ln slope`.
    pub fn conformal(lo: f64, hi: f64, increasing: bool) -> Self {
        AffineBranch { lo, hi, increasing, log_weight: libm::log(hi - lo) }
    }

    fn inverse(&self, x: f64) -> f64 {
        let w = self.hi - self.lo;
        if self.increasing {
            self.lo + w * x
        } else {
            self.hi - w * x
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMap {
    branches: Vec<AffineBranch>,
}

impl IntervalMap {
    /// Branches must tile `[0, 1)` in order, each with expansion above 1.
    pub fn new(mut branches: Vec<AffineBranch>) -> Result<Self> {
        if branches.is_empty() {
            bail!(Construction, "an interval map needs at least one branch");
        }
        branches.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(core::cmp::Ordering::Equal));
        let tol = 1e-14;
        if libm::fabs(branches[0].lo) > tol {
            bail!(Construction, "coverage gap at 0: first branch starts at {}", branches[0].lo);
        }
        for b in &branches {
            if !(b.hi > b.lo) || !b.log_weight.is_finite() {
                bail!(Construction, "bad branch [{}, {})", b.lo, b.hi);
            }
        }
        for w in branches.windows(2) {
            if w[1].lo < w[0].hi - tol {
                bail!(Construction, "branches [{}, {}) and [{}, {}) overlap", w[0].lo, w[0].hi, w[1].lo, w[1].hi);
            }
            if w[1].lo > w[0].hi + tol {
                bail!(Construction, "coverage gap between {} and {}", w[0].hi, w[1].lo);
            }
        }
        let last = branches.last().unwrap().hi;
        if libm::fabs(last - 1.0) > tol {
            bail!(Construction, "coverage gap at 1: last branch ends at {last}");
        }
        let m = IntervalMap { branches };
        if !(m.gamma() > 1.0) {
            bail!(Construction, "branch expansion {} is not above 1", m.gamma());
        }
        Ok(m)
    }

    /// `x ↦ 2x mod 1` with conformal weights.
    pub fn doubling() -> Self {
        IntervalMap::new(alloc::vec![AffineBranch::conformal(0.0, 0.5, true), AffineBranch::conformal(0.5, 1.0, true)])
            .expect("doubling map is valid")
    }

    pub fn branch_list(&self) -> &[AffineBranch] {
        &self.branches
    }

    /// Smallest branch expansion.
    pub fn gamma(&self) -> f64 {
        self.branches.iter().map(|b| 1.0 / (b.hi - b.lo)).fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn branches(&self, x: f64) -> Result<BranchSet> {
        let branches = self
            .branches
            .iter()
            .enumerate()
            .map(|(k, b)| Branch { preimage: Point::Real(b.inverse(x)), log_weight: b.log_weight, index: k })
            .collect();
        Ok(BranchSet { branches, tail_bound: 0.0 })
    }

    pub(crate) fn forward(&self, x: f64) -> Option<f64> {
        if !(0.0..=1.0).contains(&x) {
            return None;
        }
        let k = self.branches.partition_point(|b| b.lo <= x).max(1) - 1;
        let b = &self.branches[k];
        let w = b.hi - b.lo;
        let y = if b.increasing { (x - b.lo) / w } else { (b.hi - x) / w };
        Some(y.clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{paired_preimages, trajectory, SystemStage};

    #[test]
    fn doubling_inverses_and_orbit() {
        let d = IntervalMap::doubling();
        let b = d.branches(0.5).unwrap();
        assert_eq!(b.branches[0].preimage, Point::Real(0.25));
        assert_eq!(b.branches[1].preimage, Point::Real(0.75));
        let s = [SystemStage::Interval(d)];
        let o = trajectory(&s, 0, &Point::Real(1.0 / 3.0), 4).unwrap();
        let v: Vec<f64> = o.iter().map(|p| p.as_real().unwrap()).collect();
        for (k, x) in v.iter().enumerate() {
            let want = if k % 2 == 0 { 1.0 / 3.0 } else { 2.0 / 3.0 };
            assert!((x - want).abs() < 1e-14);
        }
        let p = paired_preimages(&s, 0, &Point::Real(0.2), &Point::Real(0.6), 1, 0).unwrap();
        assert!(p.iter().all(|q| (q.distance / 0.4 - 0.5).abs() < 1e-12 && q.within_bound));
    }

    #[test]
    fn overlap_and_gap_are_rejected() {
        let a = AffineBranch::conformal(0.0, 0.6, true);
        let b = AffineBranch::conformal(0.5, 1.0, true);
        assert!(matches!(IntervalMap::new(alloc::vec![a, b]), Err(crate::Error::Construction(_))));
        let c = AffineBranch::conformal(0.7, 1.0, true);
        let d = AffineBranch::conformal(0.0, 0.5, true);
        assert!(matches!(IntervalMap::new(alloc::vec![d, c]), Err(crate::Error::Construction(_))));
        assert!(IntervalMap::new(alloc::vec![AffineBranch::conformal(0.0, 1.0, true)]).is_err());
    }
}
