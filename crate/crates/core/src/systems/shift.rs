use alloc::vec::Vec;

use super::{Branch, BranchSet};
use crate::error::{bail, Result};
use crate::grid::Point;

/// Weights `w_a` of the prepended symbol `a`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SymbolWeights {
    Finite(Vec<f64>),
    /// `w_a = scale · ratio^a`
    Geometric { scale: f64, ratio: f64 },
    /// `w_a = scale · (a + 1)^{−exponent}`
    Power { scale: f64, exponent: f64 },
}

impl SymbolWeights {
    pub fn weight(&self, a: usize) -> f64 {
        match self {
            SymbolWeights::Finite(w) => w.get(a).copied().unwrap_or(0.0),
            SymbolWeights::Geometric { scale, ratio } => scale * libm::pow(*ratio, a as f64),
            SymbolWeights::Power { scale, exponent } => scale * libm::pow(a as f64 + 1.0, -exponent),
        }
    }

    /// Bound on `Σ_{a ≥ n} w_a`.
    pub fn tail(&self, n: usize) -> f64 {
        match self {
            SymbolWeights::Finite(w) => w.iter().skip(n).sum(),
            SymbolWeights::Geometric { scale, ratio } => scale * libm::pow(*ratio, n as f64) / (1.0 - ratio),
            SymbolWeights::Power { scale, exponent } => {
                if n == 0 {
                    scale * (1.0 + 1.0 / (exponent - 1.0))
                } else {
                    scale * libm::pow(n as f64, 1.0 - exponent) / (exponent - 1.0)
                }
            }
        }
    }

    pub fn finite_len(&self) -> Option<usize> {
        match self {
            SymbolWeights::Finite(w) => Some(w.len()),
            _ => None,
        }
    }
}

/// One-sided full shift stage with symbol weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FullShift {
    pub weights: SymbolWeights,
}

impl FullShift {
    pub fn new(weights: SymbolWeights) -> Result<Self> {
        match &weights {
            SymbolWeights::Finite(w) => {
                if w.is_empty() || w.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                    bail!(Construction, "finite symbol weights must be positive and finite");
                }
            }
            SymbolWeights::Geometric { scale, ratio } => {
                if !(*scale > 0.0) || !(*ratio > 0.0) {
                    bail!(Construction, "geometric weights need positive scale and ratio");
                }
                if *ratio >= 1.0 {
                    return Err(crate::Error::NotSummable(alloc::format!("geometric ratio {ratio} >= 1")));
                }
            }
            SymbolWeights::Power { scale, exponent } => {
                if !(*scale > 0.0) {
                    bail!(Construction, "power weights need a positive scale");
                }
                if *exponent <= 1.0 {
                    return Err(crate::Error::NotSummable(alloc::format!("power exponent {exponent} <= 1")));
                }
            }
        }
        Ok(FullShift { weights })
    }

    /// Uniform Bernoulli weights `1/k` on `k` symbols.
    pub fn bernoulli(k: usize) -> Self {
        FullShift::new(SymbolWeights::Finite(alloc::vec![1.0 / k as f64; k])).expect("k > 0")
    }

    pub(crate) fn branches(&self, x: &Point, truncation: usize) -> Result<BranchSet> {
        let w = match x {
            Point::Word(w) => w,
            _ => bail!(Type, "expected a word, got {x:?}"),
        };
        let n = self.weights.finite_len().map_or(truncation, |k| k.min(truncation.max(1)));
        if n == 0 {
            bail!(Precondition, "branch truncation must be positive");
        }
        let branches = (0..n)
            .map(|a| {
                let mut y = Vec::with_capacity(w.len() + 1);
                y.push(a);
                y.extend_from_slice(w);
                Branch { preimage: Point::Word(y), log_weight: libm::log(self.weights.weight(a)), index: a }
            })
            .collect();
        Ok(BranchSet { branches, tail_bound: self.weights.tail(n) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{word_distance, SystemStage};

    #[test]
    fn metric_and_contraction() {
        assert_eq!(word_distance(&[0, 1, 1, 0, 1], &[0, 1, 1, 1, 1], 0.5), 0.125);
        let s = SystemStage::FullShift(FullShift::bernoulli(2));
        let x = Point::Word(alloc::vec![0, 1, 0]);
        let y = Point::Word(alloc::vec![0, 0, 0]);
        for (a, b) in s.pairing(&x, &y, 2).unwrap() {
            let d = s.distance(&a.preimage, &b.preimage).unwrap();
            assert_eq!(d, 0.5 * s.distance(&x, &y).unwrap());
        }
    }

    #[test]
    fn summability() {
        assert!(matches!(
            FullShift::new(SymbolWeights::Power { scale: 1.0, exponent: 1.0 }),
            Err(crate::Error::NotSummable(_))
        ));
        let g = SymbolWeights::Geometric { scale: 0.5, ratio: 0.5 };
        assert!((g.tail(0) - 1.0).abs() < 1e-15);
        assert!((g.tail(3) - 0.125).abs() < 1e-15);
        let p = SymbolWeights::Power { scale: 1.0, exponent: 2.0 };
        let exact: f64 = (10..200_000).map(|a| p.weight(a)).sum();
        assert!(exact <= p.tail(10));
    }
}
