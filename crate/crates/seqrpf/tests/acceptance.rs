//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqrpf::clt::{log_potential, monte_carlo_clt, CltSystem};
use seqrpf::oracle::{gauss_expectation, gauss_spectrum_oracle};
use seqrpf::pipeline::random_function;
use seqrpf_core::cones::{calibrate_tower_cone, estimate_c0, iterate, perturbation_radius, sample_cone, CalibrationConfig};
use seqrpf_core::function::DiscreteFunction;
use seqrpf_core::grid::Grid;
use seqrpf_core::metrics::FunctionalFamily;
use seqrpf_core::pressure::{lambda_derivatives, pressure_samples};
use seqrpf_core::rpf::{convergence_rate, rpf_residuals, solve_rpf, tower_density, Normalization, SolverConfig};
use seqrpf_core::systems::{gauss_stage, AffineBranch, FullShift, IntervalMap, SystemStage, Tower, TowerSpec};
use seqrpf_core::transfer::{apply_l0, lasota_yorke_report, AssembledOperator, LyParams, Mode, Potential, TransferStage, TwistWindow};
use seqrpf_core::C64;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn gauss_density(x: f64) -> f64 {
    1.0 / (std::f64::consts::LN_2 * (1.0 + x))
}

fn cheb(n: usize) -> Arc<Grid> {
    Arc::new(Grid::chebyshev(n).unwrap())
}

fn c1_gauss_density() -> Outcome {
    let g = cheb(64);
    let op = TransferStage::new(gauss_stage(), g.clone(), Mode::Plain, 10_000).map_err(err)?;
    let h = DiscreteFunction::from_fn(g, |p| C64::new(gauss_density(p.as_real().unwrap()), 0.0));
    let lh = apply_l0(&op, &h).map_err(err)?.function;
    let res = lh.axpy(C64::new(-1.0, 0.0), &h).map_err(err)?.sup_norm();
    check(res < 1e-10, format!("|L0 h - h| = {res:.3e}"))
}

fn c2_gkw() -> Outcome {
    let a = gauss_spectrum_oracle(64, 10_000).map_err(err)?;
    let b = gauss_spectrum_oracle(128, 10_000).map_err(err)?;
    let target = 0.3036630029;
    let (e, drift) = ((a.second_modulus - target).abs(), (a.second_modulus - b.second_modulus).abs());
    check(
        e < 1e-8 && drift < 1e-10 && (a.leading - 1.0).abs() < 1e-10,
        format!("|lambda_2| = {:.12}, error {e:.2e}, drift under doubling {drift:.2e}", a.second_modulus),
    )
}

fn mixed_window(z: C64) -> TwistWindow {
    let g = cheb(64);
    let gauss = TransferStage::new(gauss_stage(), g.clone(), Mode::Plain, 10_000).unwrap();
    let map = IntervalMap::new(vec![
        AffineBranch::conformal(0.0, 0.5, true),
        AffineBranch::conformal(0.5, 5.0 / 6.0, false),
        AffineBranch::conformal(5.0 / 6.0, 1.0, true),
    ])
    .unwrap();
    let three = TransferStage::new(SystemStage::Interval(map), g, Mode::Plain, 0).unwrap();
    TwistWindow::new(
        vec![gauss, three],
        vec![Potential::Polynomial(vec![0.0, 1.0]), Potential::Polynomial(vec![0.0, 0.0, 1.0])],
        z,
    )
    .unwrap()
}

fn zs() -> [C64; 3] {
    [C64::new(0.0, 0.0), C64::new(0.05, 0.0), C64::new(0.0, 0.05)]
}

fn c3_residuals() -> Outcome {
    let mut worst = 0.0f64;
    let mut lambda0 = 0.0f64;
    for z in zs() {
        let w = mixed_window(z);
        let t = solve_rpf(&w, Normalization::Covering, &SolverConfig::default()).map_err(err)?;
        let ops = w.assemble().map_err(err)?;
        worst = rpf_residuals(&t, &ops).iter().map(|r| r.max()).fold(worst, f64::max);
        if z == C64::new(0.0, 0.0) {
            lambda0 = t.lambda.iter().map(|l| (l - 1.0).norm()).fold(0.0, f64::max);
        }
    }
    check(worst < 1e-8 && lambda0 < 1e-10, format!("max residual {worst:.2e}, max |lambda_j(0) - 1| = {lambda0:.2e}"))
}

fn c4_convergence() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for z in zs() {
        let w = mixed_window(z);
        let t = solve_rpf(&w, Normalization::Covering, &SolverConfig::default()).map_err(err)?;
        let ops = w.assemble().map_err(err)?;
        let g = DiscreteFunction::from_fn(w.grid().unwrap().clone(), |p| C64::new(p.as_real().unwrap(), 0.0));
        let c = convergence_rate(&ops, &g, &t, 25).map_err(err)?;
        ok &= c.rate < 1.0 && c.r_squared > 0.99;
        lines.push(format!("z={z}: rate {:.4} R2 {:.5} over n<={}", c.rate, c.r_squared, c.fitted));
    }
    check(ok, lines.join("; "))
}

fn c5_lasota_yorke() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = cheb(48);
    let windows = [
        (TransferStage::new(gauss_stage(), g.clone(), Mode::Plain, 2_000).map_err(err)?, Potential::Polynomial(vec![0.0, 1.0])),
        (
            TransferStage::new(SystemStage::Interval(IntervalMap::doubling()), g.clone(), Mode::Plain, 0).map_err(err)?,
            Potential::Polynomial(vec![0.5, -1.0, 0.5]),
        ),
    ];
    let (mut violations, mut worst, mut total) = (0, 0.0f64, 0);
    for (stage, u) in &windows {
        for _ in 0..50 {
            let n = rng.random_range(1..=8usize);
            let z = C64::from_polar(rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
            let f = random_function(&g, &mut rng);
            let w = TwistWindow::stationary(stage.clone(), u.clone(), n, z);
            let r = lasota_yorke_report(&w, &f, LyParams { q: 7.2, alpha: 1.0, tol: 1e-9 }).map_err(err)?;
            violations += usize::from(!r.holds);
            worst = worst.max(r.lhs / r.rhs);
            total += 1;
        }
    }
    check(violations == 0, format!("{total} checks, {violations} violations, worst lhs/rhs {worst:.4}"))
}

struct TowerSetup {
    grid: Arc<Grid>,
    stage: TransferStage,
    h: DiscreteFunction,
}

fn geometric_tower() -> Result<TowerSetup, String> {
    let tower = Tower::build(TowerSpec::geometric(20, 0.5, 0.5, 1)).map_err(err)?;
    let grid = Arc::new(tower.grid().map_err(err)?);
    let stage = TransferStage::new(SystemStage::Tower(tower), grid.clone(), Mode::Weighted, 0).map_err(err)?;
    let h = tower_density(&stage, 1e-14, 20_000).map_err(err)?;
    Ok(TowerSetup { grid, stage, h })
}

fn c6_birkhoff() -> Outcome {
    let t = geometric_tower()?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let op = t.stage.assemble(&Potential::zero(), C64::new(0.0, 0.0)).map_err(err)?;
    let cal = calibrate_tower_cone(&[op.clone()], &t.h, &CalibrationConfig::default(), &mut rng).map_err(err)?;
    let ops = vec![op; cal.k];
    let bound = (cal.diameter / 4.0).tanh();
    let f = sample_cone(&cal.family, &t.h, 100, &mut rng).map_err(err)?;
    let g = sample_cone(&cal.family, &t.h, 100, &mut rng).map_err(err)?;
    let (mut violations, mut worst) = (0, 0.0f64);
    for (f, g) in f.iter().zip(&g) {
        let d0 = cal.family.hilbert_distance(f, g).map_err(err)?;
        let lf = DiscreteFunction::new(t.grid.clone(), iterate(&ops, &f.values, cal.k)).map_err(err)?;
        let lg = DiscreteFunction::new(t.grid.clone(), iterate(&ops, &g.values, cal.k)).map_err(err)?;
        let d1 = cal.family.hilbert_distance(&lf, &lg).map_err(err)?;
        if d1 > bound * d0 * (1.0 + 1e-9) + 1e-12 {
            violations += 1;
        }
        if d0 > 0.0 {
            worst = worst.max(d1 / d0);
        }
    }
    check(
        violations == 0,
        format!("k = {}, D = {:.4}, tanh(D/4) = {bound:.4}, worst ratio {worst:.4}, {violations} violations", cal.k, cal.diameter),
    )
}

fn c7_radius() -> Outcome {
    let t = geometric_tower()?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let op0 = t.stage.assemble(&Potential::zero(), C64::new(0.0, 0.0)).map_err(err)?;
    let cal = calibrate_tower_cone(&[op0], &t.h, &CalibrationConfig::default(), &mut rng).map_err(err)?;
    let u = Potential::Level((0..=20).map(|l| (0.7 * l as f64).sin()).collect());
    let k = cal.k;
    let assemble = |z: C64| -> seqrpf_core::Result<Vec<AssembledOperator>> {
        let op = t.stage.assemble(&u, z)?;
        Ok(vec![op; k])
    };
    let probe = sample_cone(&cal.family, &t.h, 40, &mut rng).map_err(err)?;
    let (c0, _) = estimate_c0(&cal.family, assemble, &probe, &[0.01, 0.02, 0.04], 8).map_err(err)?;
    let radius = perturbation_radius(c0, cal.diameter).map_err(err)?;
    let elements = sample_cone(&cal.family, &t.h, 100, &mut rng).map_err(err)?;
    let (mut outside, mut diameter) = (0, 0.0f64);
    for a in 0..4 {
        let z = C64::from_polar(radius.r, std::f64::consts::TAU * (a as f64 + 0.5) / 4.0);
        let ops = assemble(z).map_err(err)?;
        let images: Vec<DiscreteFunction> = elements
            .iter()
            .map(|f| DiscreteFunction::new(t.grid.clone(), iterate(&ops, &f.values, k)))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        for im in &images {
            if !cal.family.complex_cone_contains(im).map_err(err)? {
                outside += 1;
            }
        }
        if outside > 0 {
            break;
        }
        let mut to_ref = 0.0f64;
        for im in &images[1..] {
            to_ref = to_ref.max(cal.family.delta_distance(&images[0], im).map_err(err)?);
        }
        diameter = diameter.max(2.0 * to_ref);
    }
    check(
        radius.r > 0.0 && outside == 0 && diameter <= radius.d1,
        format!(
            "C0 = {c0:.4}, d0 = {:.4}, r = {:.3e}, {outside} images outside, delta-diameter <= {diameter:.4} vs d1 = {:.4}",
            cal.diameter, radius.r, radius.d1
        ),
    )
}

fn bernoulli_window() -> Result<TwistWindow, String> {
    let g = Arc::new(Grid::cylinder(2, 6, 0.5).map_err(err)?);
    let stage = TransferStage::new(SystemStage::FullShift(FullShift::bernoulli(2)), g, Mode::Plain, 0).map_err(err)?;
    Ok(TwistWindow::stationary(stage, Potential::Symbol(vec![0.0, 1.0]), 1, C64::new(0.0, 0.0)))
}

fn gauss_window() -> Result<TwistWindow, String> {
    let stage = TransferStage::new(gauss_stage(), cheb(64), Mode::Plain, 10_000).map_err(err)?;
    Ok(TwistWindow::stationary(stage, Potential::Log { coeff: -2.0 }, 1, C64::new(0.0, 0.0)))
}

/// `rho` stays below 1/2 on the Gauss map: the twisted branch weights of
/// `-2 ln x` decay like `k^{-2 + 2 Re z}`.
fn moments(w: &TwistWindow, rho: f64) -> Result<(f64, f64), String> {
    let curve = pressure_samples(w, &Normalization::Covering, &SolverConfig::default(), rho, 32).map_err(err)?;
    let m = lambda_derivatives(&curve, (1e-6, 1e-4)).map_err(err)?;
    Ok((m.mean, m.variance))
}

fn c8_pressure() -> Outcome {
    let (bm, bv) = moments(&bernoulli_window()?, 0.4)?;
    let (gm, gv) = moments(&gauss_window()?, 0.1)?;
    let oracle = gauss_expectation(|x| -2.0 * x.ln(), 20_000);
    let (eb, ev, eg) = ((bm - 0.5).abs(), (bv - 0.25).abs(), (gm - oracle).abs());
    check(
        eb < 1e-9 && ev < 1e-8 && eg < 1e-5,
        format!(
            "Bernoulli mean err {eb:.2e}, variance err {ev:.2e}; Gauss mean {gm:.8} vs quadrature {oracle:.8} (err {eg:.2e}), variance {gv:.6}"
        ),
    )
}

fn c9_clt() -> Outcome {
    let bern = CltSystem::Shift { probabilities: vec![0.5, 0.5], u: vec![0.0, 1.0] };
    let b = monte_carlo_clt(&bern, 1000, 100_000, 9, 0.5, 0.25).map_err(err)?;
    let (gm, gv) = moments(&gauss_window()?, 0.1)?;
    let gauss = CltSystem::Gauss { u: log_potential, params: vec![-2.0], stationary: true };
    let g = monte_carlo_clt(&gauss, 1000, 10_000, 9, gm, gv).map_err(err)?;
    let rel = (g.empirical_variance - gv).abs() / gv;
    check(
        b.ks < 0.02 && g.ks < 0.03 && rel < 0.1,
        format!(
            "Bernoulli KS {:.4}; Gauss KS {:.4}, empirical variance {:.4} vs {gv:.4} ({:.1}%)",
            b.ks,
            g.ks,
            g.empirical_variance,
            100.0 * rel
        ),
    )
}

fn c10_metrics() -> Outcome {
    let g = Arc::new(Grid::cylinder(2, 1, 0.5).map_err(err)?);
    let fam = FunctionalFamily::positive_orthant(g.clone());
    let x = DiscreteFunction::from_real(g.clone(), &[1.0, 1.0]).map_err(err)?;
    let y = DiscreteFunction::from_real(g.clone(), &[2.0, 1.0]).map_err(err)?;
    let d = fam.hilbert_distance(&x, &y).map_err(err)?;
    let delta = fam.delta_distance(&x, &y).map_err(err)?;
    let ln2 = std::f64::consts::LN_2;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let point = |rng: &mut ChaCha8Rng| {
        let phase = rng.random_range(-3.0..3.0);
        let v = (0..2).map(|_| C64::from_polar(rng.random_range(0.2..5.0), phase + rng.random_range(-0.7..0.7))).collect();
        DiscreteFunction::new(g.clone(), v).unwrap()
    };
    let mut violations = 0;
    for _ in 0..10_000 {
        let (a, b, c) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let ab = fam.delta_distance(&a, &b).map_err(err)?;
        let via = fam.delta_distance(&a, &c).map_err(err)? + fam.delta_distance(&c, &b).map_err(err)?;
        if ab > via + 1e-9 * (1.0 + ab) {
            violations += 1;
        }
    }
    check(
        (d - ln2).abs() < 1e-12 && (delta - ln2).abs() < 1e-12 && violations == 0,
        format!("d = {d:.15}, delta = {delta:.15}, {violations} triangle violations in 10000 triples"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 10] = [
        ("Gauss invariant density", c1_gauss_density, 1),
        ("GKW subleading eigenvalue", c2_gkw, 5),
        ("sequential RPF residuals", c3_residuals, 30),
        ("exponential convergence", c4_convergence, 30),
        ("Lasota-Yorke inequality", c5_lasota_yorke, 10),
        ("Birkhoff contraction on the tower cone", c6_birkhoff, 60),
        ("complex cone invariance radius", c7_radius, 120),
        ("pressure derivatives", c8_pressure, 60),
        ("empirical CLT", c9_clt, 300),
        ("metric cross-checks", c10_metrics, 10),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let slow = elapsed > Duration::from_secs(*budget);
        let (ok, detail) = match outcome {
            Ok(d) if !slow => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget} s budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!("{} criterion {:>2} {name} [{:.2} s]: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
