//! Cone catalog: the tower cone `C_{a,b,c,ε₀,s}` and log-Hölder cones, with
//! samplers, invariance and domination checks and the perturbation radius.

mod logholder;
mod tower;

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{bail, Result};
use crate::function::DiscreteFunction;
use crate::metrics::{FunctionalFamily, Label};
use crate::transfer::{compose_assembled, AssembledOperator};
use crate::{C64, TOL_CONE};

pub use logholder::{
    logholder_family, logholder_invariance, logholder_membership, lower_mass_bound, required_s, sample_logholder, LogHolderConeParams,
    LogHolderInvariance,
};
pub use tower::{
    calibrate_tower_cone, hilbert_diameter, CalibrationConfig, iterate, reproducing_shift, sigma_needed, tower_functional_family, CalibrationStep, TowerCalibration,
    TowerConeParams,
};

/// Real cone elements `interior + t q` with a random direction `q` and `t`
/// uniform up to the largest admissible step along the ray.
pub fn sample_cone<R: Rng + ?Sized>(
    family: &FunctionalFamily,
    interior: &DiscreteFunction,
    count: usize,
    rng: &mut R,
) -> Result<Vec<DiscreteFunction>> {
    sample_rays(family, interior, count, false, rng)
}

/// Like [`sample_cone`] but stops on the boundary of the cone.
pub fn sample_cone_boundary<R: Rng + ?Sized>(
    family: &FunctionalFamily,
    interior: &DiscreteFunction,
    count: usize,
    rng: &mut R,
) -> Result<Vec<DiscreteFunction>> {
    sample_rays(family, interior, count, true, rng)
}

/// Deterministic boundary points `interior ± t e_x`, one pair per node,
/// with `t` the largest admissible step. These spikes reach far into the
/// cone and dominate measured image diameters.
pub fn sample_cone_axes(family: &FunctionalFamily, interior: &DiscreteFunction) -> Result<Vec<DiscreteFunction>> {
    let base = family.evaluate(interior)?;
    let n = interior.len();
    let mut cols: Vec<Vec<(usize, f64)>> = alloc::vec![Vec::new(); n];
    for (k, s) in family.functionals.iter().enumerate() {
        let mut dense: Vec<(usize, f64)> = s.terms.iter().map(|&(i, c)| (i, c.re)).collect();
        if s.mass != 0.0 {
            for (i, w) in family.reference.iter().enumerate() {
                dense.push((i, s.mass * w));
            }
        }
        for (i, c) in dense {
            cols[i].push((k, c));
        }
    }
    let mut out = Vec::with_capacity(2 * n);
    for (x, col) in cols.iter().enumerate() {
        // s(e_x) summed over repeated entries
        let mut acc: Vec<(usize, f64)> = col.clone();
        acc.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
        for (k, c) in acc {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => merged.push((k, c)),
            }
        }
        for sign in [-1.0, 1.0] {
            let mut t = f64::INFINITY;
            for &(k, c) in &merged {
                if sign * c < 0.0 {
                    t = t.min(base[k].re / -(sign * c));
                }
            }
            if t.is_finite() {
                let mut f = interior.clone();
                f.values[x] += C64::new(sign * t, 0.0);
                out.push(f);
            }
        }
    }
    Ok(out)
}

fn sample_rays<R: Rng + ?Sized>(
    family: &FunctionalFamily,
    interior: &DiscreteFunction,
    count: usize,
    boundary: bool,
    rng: &mut R,
) -> Result<Vec<DiscreteFunction>> {
    let base = family.evaluate(interior)?;
    if base.iter().any(|v| v.re < 0.0) {
        bail!(Precondition, "sampling needs an interior point of the cone");
    }
    let n = interior.len();
    let scale = interior.sup_norm().max(1e-300);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0) * scale, 0.0)).collect();
        let sq = family.evaluate_unchecked(&q);
        let mut tmax = f64::INFINITY;
        for (b, s) in base.iter().zip(&sq) {
            if s.re < 0.0 {
                tmax = tmax.min(b.re / -s.re);
            }
        }
        if !tmax.is_finite() {
            tmax = 1.0;
        }
        let t = if boundary { tmax } else { rng.random::<f64>() * tmax };
        let values = interior.values.iter().zip(&q).map(|(a, b)| a + b * t).collect();
        out.push(DiscreteFunction { grid: interior.grid.clone(), values });
    }
    Ok(out)
}

/// Complex cone elements `e^{iθ}((p+q)/2 + i(p−q)/2)` from real samples.
pub fn complexify_samples<R: Rng + ?Sized>(real: &[DiscreteFunction], count: usize, rng: &mut R) -> Vec<DiscreteFunction> {
    (0..count)
        .map(|_| {
            let p = &real[rng.random_range(0..real.len())];
            let q = &real[rng.random_range(0..real.len())];
            let phase = C64::from_polar(1.0, rng.random_range(0.0..core::f64::consts::TAU));
            let i = C64::new(0.0, 1.0);
            let values = p.values.iter().zip(&q.values).map(|(a, b)| phase * ((a + b) * 0.5 + i * (a - b) * 0.5)).collect();
            DiscreteFunction { grid: p.grid.clone(), values }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DominationReport {
    pub epsilon: f64,
    pub worst: Option<Label>,
    /// Largest relative deviation per functional.
    pub per_functional: Vec<f64>,
    /// `2ε(1 + cosh(d₀/2))`
    pub cosh_threshold: f64,
    pub admissible: bool,
}

/// Smallest `ε` with `|s(L_z f) − s(L₀ f)| ≤ ε s(L₀ f)` over sample × family.
pub fn domination_epsilon(
    family: &FunctionalFamily,
    ops_z: &[AssembledOperator],
    ops_0: &[AssembledOperator],
    sample: &[DiscreteFunction],
    d0: f64,
) -> Result<DominationReport> {
    if ops_z.len() != ops_0.len() {
        bail!(Precondition, "windows differ in length");
    }
    let mut per = alloc::vec![0.0f64; family.len()];
    for f in sample {
        if f.sup_norm() == 0.0 {
            continue;
        }
        let a = family.evaluate(&compose_assembled(ops_z, f)?.function)?;
        let b = family.evaluate(&compose_assembled(ops_0, f)?.function)?;
        let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (k, (x, y)) in a.iter().zip(&b).enumerate() {
            if !(y.re > TOL_CONE * scale) {
                bail!(Aperture, "functional {} vanishes on the image of a nonzero cone element", family.functionals[k].label);
            }
            per[k] = per[k].max((x - y).norm() / y.re);
        }
    }
    let (mut epsilon, mut worst) = (0.0, None);
    for (k, e) in per.iter().enumerate() {
        if *e > epsilon {
            epsilon = *e;
            worst = Some(family.functionals[k].label.clone());
        }
    }
    let cosh_threshold = 2.0 * epsilon * (1.0 + libm::cosh(d0 / 2.0));
    Ok(DominationReport { epsilon, worst, per_functional: per, cosh_threshold, admissible: cosh_threshold < 1.0 })
}

/// `|z| (2 ‖S u‖∞ + 3/(s − 1))`, the analytic covering-map domination bound.
pub fn covering_domination_bound(z_abs: f64, birkhoff_sup: f64, s: f64) -> f64 {
    z_abs * (2.0 * birkhoff_sup + 3.0 / (s - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbationRadius {
    pub r: f64,
    pub delta: f64,
    /// `d₀ + 6|ln(1 − δ)|`
    pub d1: f64,
}

/// `r = ½ / (2 C₀ (1 + cosh(d₀/2)))`, so that `δ_r = ½`.
pub fn perturbation_radius(c0: f64, d0: f64) -> Result<PerturbationRadius> {
    if !(c0 > 0.0) || !(d0 >= 0.0) || !d0.is_finite() {
        bail!(Precondition, "need C0 > 0 and finite d0 >= 0");
    }
    let margin = 0.5;
    let r = (1.0 - margin) / (2.0 * c0 * (1.0 + libm::cosh(d0 / 2.0)));
    let delta = 2.0 * c0 * r * (1.0 + libm::cosh(d0 / 2.0));
    Ok(PerturbationRadius { r, delta, d1: d0 + 6.0 * libm::fabs(libm::log(1.0 - delta)) })
}

/// `C₀` from `ε(z)/|z|` at the given moduli and `angles` directions each:
/// returns `(max ratio, least-squares slope through the origin)`.
pub fn estimate_c0(
    family: &FunctionalFamily,
    assemble: impl Fn(C64) -> Result<Vec<AssembledOperator>>,
    sample: &[DiscreteFunction],
    moduli: &[f64],
    angles: usize,
) -> Result<(f64, f64)> {
    let ops0 = assemble(C64::new(0.0, 0.0))?;
    let (mut ratio, mut sxy, mut sxx) = (0.0f64, 0.0, 0.0);
    for &m in moduli {
        let mut eps = 0.0f64;
        for a in 0..angles {
            let z = C64::from_polar(m, core::f64::consts::TAU * a as f64 / angles as f64);
            let opsz = assemble(z)?;
            eps = eps.max(domination_epsilon(family, &opsz, &ops0, sample, 0.0)?.epsilon);
        }
        ratio = ratio.max(eps / m);
        sxy += eps * m;
        sxx += m * m;
    }
    Ok((ratio, sxy / sxx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_examples() {
        let p = perturbation_radius(1.0, 0.0).unwrap();
        assert!((p.r - 0.125).abs() < 1e-15);
        assert!((p.delta - 0.5).abs() < 1e-15);
        assert!((p.d1 - 6.0 * core::f64::consts::LN_2).abs() < 1e-14);
        let mut last = p.r;
        for d in [1.0, 2.0, 5.0, 10.0] {
            let r = perturbation_radius(1.0, d).unwrap().r;
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn covering_bound_arithmetic() {
        assert!((covering_domination_bound(0.1, 2.0, 4.0) - 0.5).abs() < 1e-15);
    }
}
