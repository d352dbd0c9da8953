//! Windowed pressure `P(z) = n⁻¹ Σ log λ_j(z)` and its derivatives at 0.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{bail, Result};
use crate::rpf::{solve_rpf, Normalization, SolverConfig};
use crate::transfer::TwistWindow;
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PressureSample {
    pub z: C64,
    pub value: Option<C64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PressureCurve {
    pub rho: f64,
    pub window_len: usize,
    pub at_zero: C64,
    /// `K` equally spaced points `ρ e^{2πik/K}`.
    pub circle: Vec<PressureSample>,
    /// Real points `−2s, −s, s, 2s` with `s = ρ/8`.
    pub segment: Vec<PressureSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentEstimates {
    pub mean: f64,
    pub variance: f64,
    pub mean_cauchy: f64,
    pub variance_cauchy: f64,
    pub mean_fd: f64,
    pub variance_fd: f64,
    /// Combined error estimate for (mean, variance).
    pub error: (f64, f64),
}

/// Tracks `Σ_j log λ_j` by continuity from `z = 0` along a path.
struct LogTracker {
    logs: Vec<C64>,
    lambdas: Vec<C64>,
}

impl LogTracker {
    fn new(n: usize) -> Self {
        LogTracker { logs: alloc::vec![C64::new(0.0, 0.0); n], lambdas: alloc::vec![C64::new(1.0, 0.0); n] }
    }

    fn step(&mut self, lambdas: &[C64]) -> C64 {
        for (k, l) in lambdas.iter().enumerate() {
            self.logs[k] += (l / self.lambdas[k]).ln();
            self.lambdas[k] = *l;
        }
        self.logs.iter().sum::<C64>() / self.logs.len() as f64
    }
}

fn lambdas_at(window: &TwistWindow, z: C64, norm: &Normalization, cfg: &SolverConfig) -> Result<Vec<C64>> {
    Ok(solve_rpf(&window.with_z(z), norm.clone(), cfg)?.lambda)
}

/// Samples the pressure on `|z| = ρ` (`k` points) and on a short real
/// segment, with the logarithm continued from `λ(0) = 1`.
pub fn pressure_samples(
    window: &TwistWindow,
    normalization: &Normalization,
    cfg: &SolverConfig,
    rho: f64,
    k: usize,
) -> Result<PressureCurve> {
    if !(rho > 0.0) || k < 4 {
        bail!(Precondition, "need rho > 0 and at least 4 circle points");
    }
    let base = lambdas_at(window, C64::new(0.0, 0.0), normalization, cfg)?;
    let n = base.len();
    let at_zero = {
        let mut t = LogTracker::new(n);
        t.step(&base)
    };
    // walk out to ρ on the real axis, then around the circle
    let mut tr = LogTracker::new(n);
    tr.step(&base);
    let radial = 8;
    for s in 1..=radial {
        let z = C64::new(rho * s as f64 / radial as f64, 0.0);
        tr.step(&lambdas_at(window, z, normalization, cfg)?);
    }
    let mut circle = Vec::with_capacity(k);
    let mut broken = false;
    for i in 0..k {
        let z = C64::from_polar(rho, 2.0 * PI * i as f64 / k as f64);
        if broken {
            circle.push(PressureSample { z, value: None, failure: Some("continuation lost at an earlier point".into()) });
            continue;
        }
        match lambdas_at(window, z, normalization, cfg) {
            Ok(l) => circle.push(PressureSample { z, value: Some(tr.step(&l)), failure: None }),
            Err(e) => {
                broken = true;
                circle.push(PressureSample { z, value: None, failure: Some(e.to_string()) });
            }
        }
    }
    let h = rho / 8.0;
    let mut segment = Vec::with_capacity(4);
    for m in [-2.0, -1.0, 1.0, 2.0] {
        let z = C64::new(m * h, 0.0);
        let mut t = LogTracker::new(n);
        t.step(&base);
        let mut sample = PressureSample { z, value: None, failure: None };
        let steps = 4;
        for s in 1..=steps {
            match lambdas_at(window, z * (s as f64 / steps as f64), normalization, cfg) {
                Ok(l) => sample.value = Some(t.step(&l)),
                Err(e) => {
                    sample.value = None;
                    sample.failure = Some(e.to_string());
                    break;
                }
            }
        }
        segment.push(sample);
    }
    Ok(PressureCurve { rho, window_len: n, at_zero, circle, segment })
}

/// Mean and variance as `P'(0)`, `P''(0)` by the Cauchy integral on the
/// circle and by 5-point central differences with step `ρ/8`. Fails if the
/// two disagree by more than `tol` plus the combined error estimate.
pub fn lambda_derivatives(curve: &PressureCurve, tol: (f64, f64)) -> Result<MomentEstimates> {
    let mut vals = Vec::with_capacity(curve.circle.len());
    for s in &curve.circle {
        match s.value {
            Some(v) => vals.push((s.z, v)),
            None => bail!(Degenerate, "pressure missing at z = {}", s.z),
        }
    }
    let seg: Option<Vec<f64>> = curve.segment.iter().map(|s| s.value.map(|v| v.re)).collect();
    let seg = match seg {
        Some(s) if s.len() == 4 => s,
        _ => bail!(Degenerate, "pressure missing on the real segment"),
    };
    let k = vals.len() as f64;
    let rho = curve.rho;
    let cauchy = |m: i32| -> f64 {
        let fact = if m == 1 { 1.0 } else { 2.0 };
        let s: C64 = vals.iter().map(|(z, v)| v * (z / rho).powi(-m)).sum();
        (s * fact / (k * libm::pow(rho, m as f64))).re
    };
    let (mc, vc) = (cauchy(1), cauchy(2));
    let h = rho / 8.0;
    let (pm2, pm1, p1, p2) = (seg[0], seg[1], seg[2], seg[3]);
    let p0 = curve.at_zero.re;
    let mf = (-p2 + 8.0 * p1 - 8.0 * pm1 + pm2) / (12.0 * h);
    let vf = (-p2 + 16.0 * p1 - 30.0 * p0 + 16.0 * pm1 - pm2) / (12.0 * h * h);
    // 3-point differences bound the truncation error of the 5-point ones
    let m3 = (p1 - pm1) / (2.0 * h);
    let v3 = (p1 - 2.0 * p0 + pm1) / (h * h);
    let eps = 1e-13;
    let err_m = libm::fabs(mf - m3) * 0.1 + eps / h + eps / rho;
    let err_v = libm::fabs(vf - v3) * 0.1 + eps / (h * h) + 2.0 * eps / (rho * rho);
    if libm::fabs(mc - mf) > tol.0 + err_m {
        return Err(crate::Error::DerivativeMismatch { order: 1, cauchy: mc, finite_difference: mf });
    }
    if libm::fabs(vc - vf) > tol.1 + err_v {
        return Err(crate::Error::DerivativeMismatch { order: 2, cauchy: vc, finite_difference: vf });
    }
    Ok(MomentEstimates {
        mean: mc,
        variance: vc,
        mean_cauchy: mc,
        variance_cauchy: vc,
        mean_fd: mf,
        variance_fd: vf,
        error: (err_m, err_v),
    })
}
