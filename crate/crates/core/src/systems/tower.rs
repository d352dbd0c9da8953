use alloc::vec;
use alloc::vec::Vec;

use super::{Branch, BranchSet};
use crate::error::{bail, Result};
use crate::grid::{Grid, Point};

/// Truncated Young tower over a Markov (by default Bernoulli) base.
///
/// Column `j` sits over the base atom `j` with mass `masses[j]` and return
/// time `return_times[j]`. The return map acts on itineraries as the shift,
/// and `JF^R` on `[a b …]` equals `ρ_b / (ρ_a P_ab)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TowerSpec {
    pub masses: Vec<f64>,
    pub return_times: Vec<usize>,
    /// Row-stochastic transition of the base itinerary; `None` means
    /// `P_ab = ρ_b`.
    pub transition: Option<Vec<Vec<f64>>>,
    pub beta: f64,
    pub q: f64,
    pub p: f64,
    pub r_max: usize,
    pub k_depth: usize,
}

impl TowerSpec {
    /// Return times `1..=r_max` with `m₀{R > n} = θⁿ`; the last column
    /// carries the remaining mass. `q = 1`, `p = −ln θ`.
    pub fn geometric(r_max: usize, theta: f64, beta: f64, k_depth: usize) -> Self {
        let mut masses: Vec<f64> = (1..r_max).map(|r| libm::pow(theta, (r - 1) as f64) * (1.0 - theta)).collect();
        masses.push(libm::pow(theta, (r_max - 1) as f64));
        TowerSpec {
            masses,
            return_times: (1..=r_max).collect(),
            transition: None,
            beta,
            q: 1.0,
            p: -libm::log(theta),
            r_max,
            k_depth,
        }
    }

    fn p_ab(&self, a: usize, b: usize) -> f64 {
        match &self.transition {
            Some(t) => t[a][b],
            None => self.masses[b],
        }
    }

    /// `m₀{R > n}` on the base.
    pub fn tail_mass(&self, n: usize) -> f64 {
        self.masses.iter().zip(&self.return_times).filter(|(_, &r)| r > n).map(|(m, _)| m).sum()
    }

    pub fn level_weight(&self, level: usize) -> f64 {
        libm::exp(0.5 * level as f64 * self.p)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub spec: TowerSpec,
    /// Constant `C` of `|JF^R(x)/JF^R(y) − 1| ≤ C d(F^R x, F^R y)`.
    pub jacobian_constant: f64,
}

impl Tower {
    pub fn build(spec: TowerSpec) -> Result<Self> {
        let mut spec = spec;
        let k = spec.masses.len();
        if k == 0 || spec.return_times.len() != k {
            bail!(Construction, "need one return time per base atom");
        }
        if !(spec.beta > 0.0 && spec.beta < 1.0) || !(spec.q > 0.0) || !(spec.p > 0.0) {
            bail!(Construction, "need beta in (0, 1) and q, p > 0");
        }
        if spec.k_depth == 0 {
            bail!(Construction, "cylinder depth must be at least 1");
        }
        if spec.masses.iter().any(|m| !(*m > 0.0) || !m.is_finite()) || spec.return_times.contains(&0) {
            bail!(Construction, "masses must be positive and return times at least 1");
        }
        let total: f64 = spec.masses.iter().sum();
        if libm::fabs(total - 1.0) > 1e-12 {
            bail!(Construction, "base masses sum to {total}, not 1");
        }
        let uncovered: f64 = spec.masses.iter().zip(&spec.return_times).filter(|(_, &r)| r > spec.r_max).map(|(m, _)| m).sum();
        if uncovered > 1e-12 {
            return Err(crate::Error::Truncation { tail: uncovered, budget: 1e-12 });
        }
        if uncovered > 0.0 {
            if spec.transition.is_some() {
                bail!(Construction, "cannot drop columns above r_max from a Markov base");
            }
            let keep: Vec<usize> = (0..k).filter(|&j| spec.return_times[j] <= spec.r_max).collect();
            let kept: f64 = keep.iter().map(|&j| spec.masses[j]).sum();
            spec.masses = keep.iter().map(|&j| spec.masses[j] / kept).collect();
            spec.return_times = keep.iter().map(|&j| spec.return_times[j]).collect();
        }
        let g = spec.return_times.iter().fold(0, |acc, &r| gcd(acc, r));
        if g != 1 {
            bail!(Construction, "return times have gcd {g}, need 1");
        }
        for n in 0..=spec.r_max {
            let t = spec.tail_mass(n);
            let b = spec.q * libm::exp(-spec.p * n as f64);
            if t > b * (1.0 + 1e-9) {
                bail!(Construction, "tail m0(R > {n}) = {t} exceeds q exp(-pn) = {b}");
            }
        }
        let k = spec.masses.len();
        if let Some(t) = &spec.transition {
            if t.len() != k || t.iter().any(|r| r.len() != k) {
                bail!(Construction, "transition must be {k} x {k}");
            }
            for (a, row) in t.iter().enumerate() {
                if row.iter().any(|x| !(*x > 0.0)) || libm::fabs(row.iter().sum::<f64>() - 1.0) > 1e-12 {
                    bail!(Construction, "transition row {a} must be positive and sum to 1");
                }
            }
            // the base measure must be stationary for the itinerary chain
            for b in 0..k {
                let s: f64 = (0..k).map(|a| spec.masses[a] * t[a][b]).sum();
                if libm::fabs(s - spec.masses[b]) > 1e-10 {
                    bail!(Construction, "base masses are not stationary for the transition");
                }
            }
        }
        let mut c = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                for b2 in 0..k {
                    let ja = spec.masses[b] / (spec.masses[a] * spec.p_ab(a, b));
                    let jb = spec.masses[b2] / (spec.masses[a] * spec.p_ab(a, b2));
                    c = c.max(libm::fabs(ja / jb - 1.0));
                }
            }
        }
        Ok(Tower { spec, jacobian_constant: c })
    }

    /// `JF^R` at a base point with itinerary `word` (at least two symbols).
    pub fn jacobian(&self, word: &[usize]) -> Result<f64> {
        if word.len() < 2 {
            bail!(Domain, "need two symbols to evaluate the return Jacobian");
        }
        let (a, b) = (word[0], word[1]);
        Ok(self.spec.masses[b] / (self.spec.masses[a] * self.spec.p_ab(a, b)))
    }

    /// Nodes: (column, level < R, depth-`K` itinerary) with masses
    /// `m₀` and level weights `v_l = e^{lp/2}`.
    pub fn grid(&self) -> Result<Grid> {
        let s = &self.spec;
        let nodes: usize = s.return_times.iter().sum::<usize>() * s.masses.len().pow(s.k_depth as u32 - 1);
        if nodes > 1 << 22 {
            bail!(Construction, "tower grid would have {nodes} nodes");
        }
        let r_max = *s.return_times.iter().max().unwrap();
        let v = (0..r_max).map(|l| s.level_weight(l)).collect();
        Grid::tower(s.return_times.clone(), s.k_depth, s.beta, v, |w| {
            let mut m = s.masses[w[0]];
            for pair in w.windows(2) {
                m *= s.p_ab(pair[0], pair[1]);
            }
            m
        })
    }

    pub(crate) fn branches(&self, x: &Point) -> Result<BranchSet> {
        let (level, word) = match x {
            Point::Tower { level, word } => (*level, word),
            _ => bail!(Type, "expected a tower point, got {x:?}"),
        };
        let k = self.spec.masses.len();
        if word.is_empty() || word[0] >= k || level >= self.spec.return_times[word[0]] {
            bail!(Domain, "tower point (level {level}, word {word:?}) is not on the tower");
        }
        if level > 0 {
            let pre = Point::Tower { level: level - 1, word: word.clone() };
            return Ok(BranchSet { branches: vec![Branch { preimage: pre, log_weight: 0.0, index: 0 }], tail_bound: 0.0 });
        }
        let b = word[0];
        let branches = (0..k)
            .map(|a| {
                let mut w = Vec::with_capacity(word.len() + 1);
                w.push(a);
                w.extend_from_slice(word);
                let lw = libm::log(self.spec.masses[a] * self.spec.p_ab(a, b) / self.spec.masses[b]);
                Branch { preimage: Point::Tower { level: self.spec.return_times[a] - 1, word: w }, log_weight: lw, index: a }
            })
            .collect();
        Ok(BranchSet { branches, tail_bound: 0.0 })
    }

    pub(crate) fn forward(&self, x: &Point) -> Option<Point> {
        let (level, word) = match x {
            Point::Tower { level, word } => (*level, word),
            _ => return None,
        };
        let r = *self.spec.return_times.get(*word.first()?)?;
        if level + 1 < r {
            Some(Point::Tower { level: level + 1, word: word.clone() })
        } else if word.len() > 1 {
            Some(Point::Tower { level: 0, word: word[1..].to_vec() })
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_tower_tail_is_exact() {
        let s = TowerSpec::geometric(20, 0.5, 0.5, 1);
        assert!((s.p - core::f64::consts::LN_2).abs() < 1e-15);
        for n in 0..20 {
            assert!((s.tail_mass(n) - libm::pow(0.5, n as f64)).abs() < 1e-15);
        }
        assert!((s.level_weight(1) - core::f64::consts::SQRT_2).abs() < 1e-15);
        let t = Tower::build(s).unwrap();
        assert_eq!(t.grid().unwrap().len(), 210);
    }

    #[test]
    fn gcd_and_mass_checks() {
        let mut s = TowerSpec::geometric(3, 0.5, 0.5, 1);
        s.return_times = vec![2, 4, 6];
        s.r_max = 6;
        assert!(matches!(Tower::build(s), Err(crate::Error::Construction(_))));
        let mut s = TowerSpec::geometric(3, 0.5, 0.5, 1);
        s.masses[0] = 0.6;
        assert!(Tower::build(s).is_err());
        let mut s = TowerSpec::geometric(4, 0.5, 0.5, 1);
        s.r_max = 2;
        assert!(matches!(Tower::build(s), Err(crate::Error::Truncation { .. })));
    }

    #[test]
    fn markov_base_jacobian_regularity() {
        let spec = TowerSpec {
            masses: vec![0.5, 0.5],
            return_times: vec![1, 2],
            transition: Some(vec![vec![0.3, 0.7], vec![0.7, 0.3]]),
            beta: 0.5,
            q: 1.0,
            p: core::f64::consts::LN_2,
            r_max: 2,
            k_depth: 2,
        };
        let t = Tower::build(spec).unwrap();
        // compare x = [0 0 …] and y = [0 1 …]: d(F^R x, F^R y) = 1
        let r = t.jacobian(&[0, 0]).unwrap() / t.jacobian(&[0, 1]).unwrap();
        assert!((r - 1.0).abs() <= t.jacobian_constant + 1e-15);
        assert!(t.jacobian_constant > 0.0);
        // same second symbol: ratio exactly 1
        assert_eq!(t.jacobian(&[1, 0, 1]).unwrap() / t.jacobian(&[1, 0, 0]).unwrap(), 1.0);
    }
}
