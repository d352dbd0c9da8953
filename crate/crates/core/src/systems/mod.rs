//! Concrete stages: the Gauss map, full-branch affine interval maps,
//! nonstationary full shifts and truncated Young towers.
//!
//! A sequence of stages is given as a slice and extended periodically, so
//! stage `j` is `stages[j % stages.len()]`.

mod interval;
mod shift;
mod tower;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::grid::{separation_time, Point};

pub use interval::{AffineBranch, IntervalMap};
pub use shift::{FullShift, SymbolWeights};
pub use tower::{Tower, TowerSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub preimage: Point,
    /// `f_j(y)` (covering maps) or `−ln JF(y)` (towers).
    pub log_weight: f64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSet {
    pub branches: Vec<Branch>,
    /// Bound on the total weight of the branches left out by truncation.
    pub tail_bound: f64,
}

/// Constants of the covering/pairing assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoveringMeta {
    pub xi: f64,
    pub gamma: f64,
    pub n0: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemStage {
    Gauss,
    Interval(IntervalMap),
    FullShift(FullShift),
    Tower(Tower),
}

pub fn gauss_stage() -> SystemStage {
    SystemStage::Gauss
}

/// Gauss map `x ↦ 1/x mod 1`.
pub(crate) fn gauss_forward(x: f64) -> Option<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return None;
    }
    let y = 1.0 / x;
    let r = y - libm::floor(y);
    Some(if r >= 1.0 { 0.0 } else { r })
}

impl SystemStage {
    pub fn name(&self) -> &'static str {
        match self {
            SystemStage::Gauss => "gauss",
            SystemStage::Interval(_) => "interval",
            SystemStage::FullShift(_) => "full-shift",
            SystemStage::Tower(_) => "tower",
        }
    }

    /// Pairing constants; `None` for towers, which are handled through cones.
    pub fn covering(&self) -> Option<CoveringMeta> {
        match self {
            SystemStage::Gauss => Some(CoveringMeta { xi: 2.0, gamma: 9.0 / 4.0, n0: 2 }),
            SystemStage::Interval(m) => Some(CoveringMeta { xi: 2.0, gamma: m.gamma(), n0: 1 }),
            SystemStage::FullShift(_) => Some(CoveringMeta { xi: 2.0, gamma: 2.0, n0: 1 }),
            SystemStage::Tower(_) => None,
        }
    }

    /// Inverse branches at `x`, truncated to `truncation` branches where the
    /// branch set is countable.
    pub fn branches(&self, x: &Point, truncation: usize) -> Result<BranchSet> {
        match self {
            SystemStage::Gauss => {
                let x = real_in_unit(x)?;
                if truncation == 0 {
                    bail!(Precondition, "branch truncation must be positive");
                }
                let branches = (1..=truncation)
                    .map(|n| {
                        let d = x + n as f64;
                        Branch { preimage: Point::Real(1.0 / d), log_weight: -2.0 * libm::log(d), index: n - 1 }
                    })
                    .collect();
                Ok(BranchSet { branches, tail_bound: 1.0 / truncation as f64 })
            }
            SystemStage::Interval(m) => m.branches(real_in_unit(x)?),
            SystemStage::FullShift(s) => s.branches(x, truncation),
            SystemStage::Tower(t) => t.branches(x),
        }
    }

    pub fn forward(&self, x: &Point) -> Option<Point> {
        match self {
            SystemStage::Gauss => gauss_forward(x.as_real()?).map(Point::Real),
            SystemStage::Interval(m) => m.forward(x.as_real()?).map(Point::Real),
            SystemStage::FullShift(_) => match x {
                Point::Word(w) if w.len() > 1 => Some(Point::Word(w[1..].to_vec())),
                _ => None,
            },
            SystemStage::Tower(t) => t.forward(x),
        }
    }

    /// Distance in this stage's phase space.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        match (self, x, y) {
            (SystemStage::Gauss | SystemStage::Interval(_), Point::Real(a), Point::Real(b)) => Ok(libm::fabs(a - b)),
            (SystemStage::FullShift(_), Point::Word(a), Point::Word(b)) => Ok(word_distance(a, b, 0.5)),
            (SystemStage::Tower(t), Point::Tower { level: la, word: a }, Point::Tower { level: lb, word: b }) => {
                Ok(if la != lb { 1.0 } else { word_distance(a, b, t.spec.beta) })
            }
            _ => bail!(Type, "points {x:?} and {y:?} do not belong to a {} stage", self.name()),
        }
    }

    /// Branch pairs for two nearby points, aligned by branch index.
    pub fn pairing(&self, x: &Point, x2: &Point, truncation: usize) -> Result<Vec<(Branch, Branch)>> {
        let meta = match self.covering() {
            Some(m) => m,
            None => bail!(Precondition, "pairing is only defined for covering stages"),
        };
        let d = self.distance(x, x2)?;
        if !(d < meta.xi) {
            return Err(crate::Error::PairingUndefined { distance: d, xi: meta.xi });
        }
        let a = self.branches(x, truncation)?.branches;
        let b = self.branches(x2, truncation)?.branches;
        if a.len() != b.len() {
            bail!(Degenerate, "branch counts differ at paired points");
        }
        Ok(a.into_iter().zip(b).collect())
    }
}

fn real_in_unit(x: &Point) -> Result<f64> {
    match x {
        Point::Real(v) if (0.0..=1.0).contains(v) => Ok(*v),
        Point::Real(v) => bail!(Domain, "x = {v} is outside [0, 1]"),
        _ => bail!(Type, "expected a real point, got {x:?}"),
    }
}

pub(crate) fn word_distance(a: &[usize], b: &[usize], beta: f64) -> f64 {
    match separation_time(a, b) {
        Some(s) => libm::pow(beta, s as f64),
        None => 0.0,
    }
}

/// An `n`-step preimage pair with its contraction bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimagePair {
    pub y: Point,
    pub y2: Point,
    pub log_weight: (f64, f64),
    pub distance: f64,
    /// `γ^{−⌊n/n₀⌋} d(x, x′)`
    pub bound: f64,
    pub within_bound: bool,
}

/// Aligned `n`-step preimages of `x` and `x2` under `T_{j+n−1} ∘ ⋯ ∘ T_j`.
pub fn paired_preimages(
    stages: &[SystemStage],
    j: usize,
    x: &Point,
    x2: &Point,
    n: usize,
    truncation: usize,
) -> Result<Vec<PreimagePair>> {
    if stages.is_empty() {
        bail!(Precondition, "empty stage sequence");
    }
    let st = |k: usize| &stages[k % stages.len()];
    let last = st(j + n.max(1) - 1);
    let meta = match last.covering() {
        Some(m) => m,
        None => bail!(Precondition, "pairing is only defined for covering stages"),
    };
    let d0 = last.distance(x, x2)?;
    if !(d0 < meta.xi) {
        return Err(crate::Error::PairingUndefined { distance: d0, xi: meta.xi });
    }
    // weakest constants along the window
    let (mut gamma, mut n0) = (meta.gamma, meta.n0);
    for k in j..j + n {
        let m = st(k).covering().ok_or_else(|| crate::Error::Precondition("tower stage in a covering window".into()))?;
        gamma = gamma.min(m.gamma);
        n0 = n0.max(m.n0);
    }
    let bound = libm::pow(gamma, -((n / n0) as f64)) * d0;
    let mut frontier = vec![(x.clone(), x2.clone(), 0.0, 0.0)];
    for k in (j..j + n).rev() {
        let mut next = Vec::new();
        for (p, q, lp, lq) in frontier {
            for (a, b) in st(k).pairing(&p, &q, truncation)? {
                next.push((a.preimage, b.preimage, lp + a.log_weight, lq + b.log_weight));
            }
        }
        frontier = next;
    }
    let first = st(j);
    frontier
        .into_iter()
        .map(|(y, y2, lw, lw2)| {
            let distance = first.distance(&y, &y2)?;
            Ok(PreimagePair {
                y,
                y2,
                log_weight: (lw, lw2),
                distance,
                bound,
                within_bound: distance <= bound * (1.0 + 1e-12) + 1e-15,
            })
        })
        .collect()
}

/// Forward orbit `x₀, T_j x₀, …, T_j^n x₀`.
pub fn trajectory(stages: &[SystemStage], j: usize, x0: &Point, n: usize) -> Result<Vec<Point>> {
    if stages.is_empty() {
        bail!(Precondition, "empty stage sequence");
    }
    let mut orbit = Vec::with_capacity(n + 1);
    orbit.push(x0.clone());
    let mut x = x0.clone();
    for step in 0..n {
        let st = &stages[(j + step) % stages.len()];
        x = match st.forward(&x) {
            Some(y) => y,
            None => return Err(crate::Error::Orbit { step }),
        };
        orbit.push(x.clone());
    }
    Ok(orbit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_preimages_at_zero() {
        let b = gauss_stage().branches(&Point::Real(0.0), 5).unwrap();
        for (k, br) in b.branches.iter().enumerate() {
            let n = (k + 1) as f64;
            assert_eq!(br.preimage, Point::Real(1.0 / n));
            assert!((libm::exp(br.log_weight) - 1.0 / (n * n)).abs() < 1e-16);
        }
        assert_eq!(gauss_stage().branches(&Point::Real(0.3), 100).unwrap().tail_bound, 0.01);
    }

    #[test]
    fn gauss_one_step_pairing() {
        let p = paired_preimages(&[gauss_stage()], 0, &Point::Real(0.25), &Point::Real(0.5), 1, 3).unwrap();
        assert_eq!(p[0].y, Point::Real(0.8));
        assert!((p[0].distance - (0.8 - 1.0 / 1.5)).abs() < 1e-15);
        assert!(p.iter().all(|q| q.within_bound && q.bound == 0.25));
        // second branch, the stated 2/45
        assert!((p[1].distance - 2.0 / 45.0).abs() < 1e-15);
        assert!(p[1].distance <= 0.25 / 4.0);
    }

    #[test]
    fn gauss_two_step_contraction() {
        let p = paired_preimages(&[gauss_stage()], 0, &Point::Real(0.1), &Point::Real(0.9), 2, 20).unwrap();
        assert_eq!(p.len(), 400);
        assert!(p.iter().all(|q| q.distance <= 4.0 / 9.0 * 0.8 + 1e-15));
        let same = paired_preimages(&[gauss_stage()], 0, &Point::Real(0.4), &Point::Real(0.4), 2, 5).unwrap();
        assert!(same.iter().all(|q| q.distance == 0.0));
    }

    #[test]
    fn gauss_fixed_point_orbit() {
        let g = (libm::sqrt(5.0) - 1.0) / 2.0;
        let orbit = trajectory(&[gauss_stage()], 0, &Point::Real(g), 5).unwrap();
        for p in &orbit {
            assert!((p.as_real().unwrap() - g).abs() < 1e-12);
        }
        assert_eq!(trajectory(&[gauss_stage()], 0, &Point::Real(0.3), 0).unwrap(), vec![Point::Real(0.3)]);
        assert_eq!(trajectory(&[gauss_stage()], 0, &Point::Real(0.5), 3), Err(crate::Error::Orbit { step: 1 }));
    }
}
