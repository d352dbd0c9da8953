//! Validation of a config into concrete stages, and the experiment
//! pipelines.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use seqrpf_core::cones::{
    calibrate_tower_cone, covering_domination_bound, domination_epsilon, estimate_c0, logholder_family, logholder_invariance,
    perturbation_radius, sample_cone, sample_logholder, CalibrationConfig, LogHolderConeParams,
};
use seqrpf_core::function::DiscreteFunction;
use seqrpf_core::grid::Grid;
use seqrpf_core::pressure::{lambda_derivatives, pressure_samples};
use seqrpf_core::rpf::{convergence_rate, rpf_residuals, solve_rpf, tower_density, Boundary, Normalization, SolverConfig};
use seqrpf_core::systems::{
    gauss_stage, AffineBranch, FullShift, IntervalMap, SymbolWeights, SystemStage, Tower, TowerSpec,
};
use seqrpf_core::transfer::{birkhoff_sum, lasota_yorke_report, AssembledOperator, LyParams, Mode, Potential, TransferStage, TwistWindow};
use seqrpf_core::C64;

use crate::clt::{log_potential, monte_carlo_clt, polynomial_potential, shift_system, CltSystem};
use crate::config::{
    config_hash, BoundaryKind, ConeKind, ExperimentConfig, GridKindSpec, InitialLaw, Pipeline, StageKind, StageSpec, WeightLaw,
};
use crate::error::RunError;
use crate::oracle::{dense_spectrum, gauss_expectation, gauss_spectrum_oracle};
use crate::report::{num, versions, Report, Step, Table};

/// A validated experiment: stages, grid and potentials are built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub pipeline: Pipeline,
    pub seed: u64,
    pub specs: Vec<StageSpec>,
    pub stages: Vec<TransferStage>,
    pub potentials: Vec<Potential>,
    pub grid: Arc<Grid>,
    pub tower: Option<Tower>,
}

fn build_system(spec: &StageSpec, truncation: usize) -> Result<SystemStage, RunError> {
    let kind = spec.kind.ok_or_else(|| RunError::validation("stage without kind"))?;
    Ok(match kind {
        StageKind::Gauss => gauss_stage(),
        StageKind::Doubling => SystemStage::Interval(IntervalMap::doubling()),
        StageKind::Interval => {
            let b = spec.branches.as_ref().ok_or_else(|| RunError::validation("interval stage needs branches"))?;
            let branches = b.iter().map(|b| AffineBranch::conformal(b.lo, b.hi, b.increasing)).collect();
            SystemStage::Interval(IntervalMap::new(branches).map_err(RunError::setup)?)
        }
        StageKind::Shift => {
            let w = match (&spec.probabilities, &spec.weights) {
                (Some(p), None) => SymbolWeights::Finite(p.clone()),
                (None, Some(WeightLaw::Geometric { scale, ratio })) => SymbolWeights::Geometric { scale: *scale, ratio: *ratio },
                (None, Some(WeightLaw::Power { scale, exponent })) => SymbolWeights::Power { scale: *scale, exponent: *exponent },
                _ => return Err(RunError::validation("shift stage needs exactly one of probabilities or weights")),
            };
            let _ = truncation;
            SystemStage::FullShift(FullShift::new(w).map_err(RunError::setup)?)
        }
        StageKind::Tower => SystemStage::Tower(build_tower(spec)?),
    })
}

fn build_tower(spec: &StageSpec) -> Result<Tower, RunError> {
    let r_max = spec.r_max.ok_or_else(|| RunError::validation("tower stage needs r_max"))?;
    let mut t = TowerSpec::geometric(r_max, spec.theta.unwrap_or(0.5), spec.beta.unwrap_or(0.5), spec.k_depth.unwrap_or(1));
    if !(t.p > 0.0) || !t.p.is_finite() {
        return Err(RunError::validation("tower theta must lie in (0, 1)"));
    }
    t.transition = spec.transition.clone();
    Tower::build(t).map_err(RunError::setup)
}

/// Checks the config and builds everything a pipeline needs.
pub fn prepare(config: ExperimentConfig, pipeline: Option<Pipeline>, seed: Option<u64>) -> Result<Prepared, RunError> {
    let system = config.system.as_ref().ok_or_else(|| RunError::validation("missing system block"))?;
    let pipeline = pipeline.or(config.pipeline).ok_or_else(|| RunError::validation("no pipeline selected"))?;
    let specs = system.stage_specs()?;
    let d = &config.discretization;
    let systems: Vec<SystemStage> = specs.iter().map(|s| build_system(s, d.truncation)).collect::<Result<_, _>>()?;

    let intervals = systems.iter().all(|s| matches!(s, SystemStage::Gauss | SystemStage::Interval(_)));
    let shifts = systems.iter().all(|s| matches!(s, SystemStage::FullShift(_)));
    let towers: Vec<&Tower> = systems.iter().filter_map(|s| if let SystemStage::Tower(t) = s { Some(t) } else { None }).collect();
    let mut tower = None;
    let grid = if intervals {
        match d.grid {
            GridKindSpec::Chebyshev => Grid::chebyshev(d.nodes),
            GridKindSpec::Linear => Grid::piecewise_linear((0..d.nodes).map(|k| k as f64 / (d.nodes.max(2) - 1) as f64).collect()),
        }
        .map_err(RunError::setup)?
    } else if shifts {
        let alphabet = systems
            .iter()
            .map(|s| match s {
                SystemStage::FullShift(f) => f.weights.finite_len().unwrap_or(d.truncation),
                _ => 0,
            })
            .max()
            .unwrap_or(0);
        if (alphabet as f64).powi(d.depth as i32) > (1u64 << 20) as f64 {
            return Err(RunError::validation(format!("cylinder grid {alphabet}^{} is too large", d.depth)));
        }
        Grid::cylinder(alphabet, d.depth, 0.5).map_err(RunError::setup)?
    } else if towers.len() == systems.len() && towers.iter().all(|t| t.spec == towers[0].spec) {
        tower = Some(towers[0].clone());
        towers[0].grid().map_err(RunError::setup)?
    } else {
        return Err(RunError::validation("stages must all be interval maps, all shifts, or one repeated tower"));
    };
    let grid = Arc::new(grid);
    let mode = if tower.is_some() { Mode::Weighted } else { Mode::Plain };
    let stages: Vec<TransferStage> = systems
        .into_iter()
        .map(|s| TransferStage::new(s, grid.clone(), mode, d.truncation).map(|t| t.with_tail_budget(d.tail_budget)))
        .collect::<Result<_, _>>()
        .map_err(RunError::setup)?;

    let tw = &config.twist;
    let potentials: Vec<Potential> = match (&tw.potentials, &tw.u) {
        (Some(_), Some(_)) => return Err(RunError::validation("twist: give either u or potentials")),
        (Some(p), None) if p.len() != stages.len() => {
            return Err(RunError::validation(format!("twist.potentials has {} entries for {} stages", p.len(), stages.len())))
        }
        (Some(p), None) => p.iter().map(|p| p.to_potential()).collect(),
        (None, Some(u)) => vec![u.to_potential(); stages.len()],
        (None, None) => vec![Potential::zero(); stages.len()],
    };
    for (s, u) in stages.iter().zip(&potentials) {
        u.sup_norm(&s.grid).map_err(|e| RunError::validation(format!("potential does not fit the grid: {e}")))?;
    }
    validate_blocks(&config, pipeline, &stages, tower.is_some())?;
    let seed = seed.unwrap_or(config.statistics.seed);
    Ok(Prepared { config, pipeline, seed, specs, stages, potentials, grid, tower })
}

fn validate_blocks(cfg: &ExperimentConfig, pipeline: Pipeline, stages: &[TransferStage], tower: bool) -> Result<(), RunError> {
    let s = &cfg.solver;
    if !(s.tol > 0.0) || s.max_iters == 0 || s.n_max == 0 {
        return Err(RunError::validation("solver: need tol > 0, max_iters >= 1, n_max >= 1"));
    }
    let st = &cfg.statistics;
    match pipeline {
        Pipeline::Spectrum if !matches!(stages[0].stage, SystemStage::Gauss | SystemStage::Interval(_)) => {
            return Err(RunError::validation("spectrum needs an interval stage"))
        }
        Pipeline::Clt => {
            if st.n == 0 || st.trials == 0 || !(st.rho > 0.0) || st.points < 4 {
                return Err(RunError::validation("statistics: need n, trials >= 1, rho > 0, points >= 4"));
            }
        }
        Pipeline::LyCheck => {
            if tower || stages.iter().any(|s| s.covering().is_none()) {
                return Err(RunError::validation("ly-check needs covering stages"));
            }
        }
        Pipeline::Cones => {
            let c = cfg.cone.as_ref().ok_or_else(|| RunError::validation("cones pipeline needs a cone block"))?;
            match c.kind {
                ConeKind::Tower if !tower => return Err(RunError::validation("tower cone needs a tower system")),
                ConeKind::LogHolder if tower => return Err(RunError::validation("log-Hölder cone needs covering stages")),
                ConeKind::LogHolder => {
                    let params = logholder_params(cfg, stages)?;
                    if !params.improves() {
                        return Err(RunError::validation(format!("s = {} gives no improvement (s' = {})", params.s, params.s_prime)));
                    }
                }
                ConeKind::Tower => {}
            }
        }
        _ => {}
    }
    Ok(())
}

fn logholder_params(cfg: &ExperimentConfig, stages: &[TransferStage]) -> Result<LogHolderConeParams, RunError> {
    let c = cfg.cone.as_ref().ok_or_else(|| RunError::validation("missing cone block"))?;
    let meta = stages.iter().filter_map(|s| s.covering()).fold(None, |acc: Option<(f64, f64)>, m| match acc {
        None => Some((m.gamma, m.xi)),
        Some((g, x)) => Some((g.min(m.gamma), x.min(m.xi))),
    });
    let (gamma, xi) = meta.unwrap_or((2.0, 2.0));
    let s = c.s.ok_or_else(|| RunError::validation("log-Hölder cone needs s"))?;
    LogHolderConeParams::new(s, c.q.unwrap_or(1.0), c.alpha.unwrap_or(1.0), c.xi.unwrap_or(xi), c.gamma.unwrap_or(gamma)).map_err(RunError::setup)
}

impl Prepared {
    pub fn window(&self, z: C64) -> TwistWindow {
        TwistWindow { stages: self.stages.clone(), potentials: self.potentials.clone(), z }
    }

    pub fn solver(&self) -> SolverConfig {
        let s = &self.config.solver;
        SolverConfig {
            tol: s.tol,
            max_iters: s.max_iters,
            boundary: match s.boundary {
                BoundaryKind::Periodic => Boundary::Periodic,
                BoundaryKind::Truncated => Boundary::Truncated { warmup: s.warmup },
            },
            lambda_floor: s.lambda_floor,
            radius: s.radius,
        }
    }

    pub fn normalization(&self) -> Result<Normalization, RunError> {
        if self.tower.is_some() {
            Ok(Normalization::Tower { h: tower_density(&self.stages[0], 1e-14, 20_000)? })
        } else {
            Ok(Normalization::Covering)
        }
    }

    fn z_list(&self, default: &[[f64; 2]]) -> Vec<C64> {
        let z = if self.config.twist.z.is_empty() { default.to_vec() } else { self.config.twist.z.clone() };
        z.iter().map(|z| C64::new(z[0], z[1])).collect()
    }

    /// Smooth test function: `x` on intervals, a fixed bounded pattern elsewhere.
    fn probe(&self) -> DiscreteFunction {
        match self.grid.interval() {
            Some(_) => DiscreteFunction::from_fn(self.grid.clone(), |p| C64::new(p.as_real().unwrap_or(0.0), 0.0)),
            None => {
                let v: Vec<f64> = (0..self.grid.len()).map(|i| 1.0 + 0.5 * (i as f64).cos()).collect();
                DiscreteFunction::from_real(self.grid.clone(), &v).expect("grid-sized vector")
            }
        }
    }

    fn report(&self, steps: Vec<Step>, result: serde_json::Value, tables: Vec<Table>) -> Report {
        Report {
            pipeline: self.pipeline.name().to_string(),
            config_hash: config_hash(&self.config),
            seed: self.seed,
            versions: versions(),
            config: self.config.clone(),
            steps,
            result,
            tables,
        }
    }
}

fn step(name: &str, r: Result<String, RunError>) -> Step {
    match r {
        Ok(detail) => Step { name: name.to_string(), ok: true, detail },
        Err(e) => Step { name: name.to_string(), ok: false, detail: e.to_string() },
    }
}

fn cnum(z: C64) -> serde_json::Value {
    json!([z.re, z.im])
}

/// Runs the selected pipeline. Step failures are recorded in the report.
pub fn execute(p: &Prepared) -> Result<Report, RunError> {
    match p.pipeline {
        Pipeline::Spectrum => run_spectrum(p),
        Pipeline::Rpf => run_rpf(p),
        Pipeline::Cones => run_cones(p),
        Pipeline::Clt => run_clt(p),
        Pipeline::LyCheck => run_ly(p),
    }
}

fn run_spectrum(p: &Prepared) -> Result<Report, RunError> {
    let d = &p.config.discretization;
    let mut table = Table::new("eigenvalues", &["nodes", "index", "re", "im", "modulus"]);
    let mut steps = Vec::new();
    let result = if matches!(p.stages[0].stage, SystemStage::Gauss) {
        let base = gauss_spectrum_oracle(d.nodes, d.truncation)?;
        let fine = gauss_spectrum_oracle(2 * d.nodes, d.truncation)?;
        for r in [&base, &fine] {
            for (i, e) in r.eigenvalues.iter().enumerate() {
                table.push(vec![r.nodes.to_string(), i.to_string(), num(e.re), num(e.im), num(e.modulus)]);
            }
        }
        let drift = (base.second_modulus - fine.second_modulus).abs();
        steps.push(step("spectrum", Ok(format!("second modulus {} (drift {drift:e} under doubling)", base.second_modulus))));
        json!({ "base": base, "doubled": fine, "doubling_drift": drift })
    } else {
        let op = p.stages[0].assemble(&Potential::zero(), C64::new(0.0, 0.0))?;
        let ev = dense_spectrum(&op);
        for (i, e) in ev.iter().take(10).enumerate() {
            table.push(vec![d.nodes.to_string(), i.to_string(), num(e.re), num(e.im), num(e.norm())]);
        }
        steps.push(step("spectrum", Ok(format!("leading {}", ev[0]))));
        json!({ "eigenvalues": ev.iter().take(10).map(|z| json!({"re": z.re, "im": z.im, "modulus": z.norm()})).collect::<Vec<_>>() })
    };
    Ok(p.report(steps, result, vec![table]))
}

fn run_rpf(p: &Prepared) -> Result<Report, RunError> {
    let norm = p.normalization()?;
    let cfg = p.solver();
    let mut steps = Vec::new();
    let mut out = Vec::new();
    let mut residuals = Table::new("residuals", &["z_re", "z_im", "stage", "eigen", "dual", "normalization"]);
    let mut lambdas = Table::new("lambda", &["z_re", "z_im", "stage", "re", "im"]);
    let mut conv = Table::new("convergence", &["z_re", "z_im", "n", "residual"]);
    for z in p.z_list(&[[0.0, 0.0]]) {
        let w = p.window(z);
        let mut run = || -> Result<(serde_json::Value, String), RunError> {
            let t = solve_rpf(&w, norm.clone(), &cfg)?;
            let ops = w.assemble()?;
            let res = rpf_residuals(&t, &ops);
            for r in &res {
                residuals.push(vec![num(z.re), num(z.im), r.index.to_string(), num(r.eigen), num(r.dual), num(r.normalization)]);
            }
            for (j, l) in t.lambda.iter().enumerate() {
                lambdas.push(vec![num(z.re), num(z.im), (t.first + j).to_string(), num(l.re), num(l.im)]);
            }
            let c = convergence_rate(&ops, &p.probe(), &t, p.config.solver.n_max)?;
            for (n, r) in c.residuals.iter().enumerate() {
                conv.push(vec![num(z.re), num(z.im), (n + 1).to_string(), num(*r)]);
            }
            let worst = res.iter().map(|r| r.max()).fold(0.0, f64::max);
            let v = json!({
                "z": cnum(z),
                "lambda": t.lambda.iter().map(|l| cnum(*l)).collect::<Vec<_>>(),
                "h": t.h.iter().map(|h| h.values.iter().map(|v| cnum(*v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "nu": t.nu.iter().map(|n| n.iter().map(|v| cnum(*v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "iterations": t.iterations,
                "outside_validated_radius": t.outside_validated_radius,
                "max_residual": worst,
                "rate": c.rate,
                "prefactor": c.prefactor,
                "r_squared": c.r_squared,
                "fitted": c.fitted,
            });
            Ok((v, format!("max residual {worst:e}, rate {:.4}", c.rate)))
        };
        match run() {
            Ok((v, msg)) => {
                out.push(v);
                steps.push(step(&format!("z = {z}"), Ok(msg)));
            }
            Err(e) => steps.push(step(&format!("z = {z}"), Err(e))),
        }
    }
    Ok(p.report(steps, json!({ "triplets": out }), vec![residuals, lambdas, conv]))
}

fn run_cones(p: &Prepared) -> Result<Report, RunError> {
    let cone = p.config.cone.as_ref().expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let zs = p.z_list(&[[0.01, 0.0], [0.0, 0.01]]);
    let mut steps = Vec::new();
    let mut dom = Table::new("domination", &["z_re", "z_im", "epsilon", "cosh_threshold", "admissible", "analytic_bound"]);
    let result = match cone.kind {
        ConeKind::Tower => {
            let h = tower_density(&p.stages[0], 1e-14, 20_000)?;
            let op0: Vec<AssembledOperator> = p.stages.iter().map(|s| s.assemble(&Potential::zero(), C64::new(0.0, 0.0))).collect::<Result<_, _>>()?;
            let cc = CalibrationConfig {
                eps0: cone.eps0.unwrap_or(0.05),
                samples: cone.samples.unwrap_or(40),
                k_min: cone.k_min.unwrap_or(1),
                k_max: cone.k_max.unwrap_or(60),
                doublings: cone.doublings.unwrap_or(6),
                axes: true,
            };
            let cal = calibrate_tower_cone(&op0, &h, &cc, &mut rng)?;
            steps.push(step("calibration", Ok(format!("k = {}, sigma = {:.4}, diameter = {:.4}", cal.k, cal.sigma, cal.diameter))));
            let k = cal.k;
            let assemble = |z: C64| -> seqrpf_core::Result<Vec<AssembledOperator>> {
                (0..k).map(|i| p.stages[i % p.stages.len()].assemble(&p.potentials[i % p.stages.len()], z)).collect()
            };
            let sample = sample_cone(&cal.family, &h, 30, &mut rng)?;
            let ops0 = assemble(C64::new(0.0, 0.0))?;
            let mut doms = Vec::new();
            for &z in &zs {
                let r = domination_epsilon(&cal.family, &assemble(z)?, &ops0, &sample, cal.diameter)?;
                dom.push(vec![num(z.re), num(z.im), num(r.epsilon), num(r.cosh_threshold), r.admissible.to_string(), String::new()]);
                doms.push(json!({"z": cnum(z), "report": r}));
            }
            let (c0, slope) = estimate_c0(&cal.family, assemble, &sample, &[0.01, 0.02, 0.04], 8)?;
            let radius = perturbation_radius(c0, cal.diameter.max(f64::MIN_POSITIVE))?;
            let (aperture, aperture_complex) = cal.family.aperture_constant(
                &seqrpf_core::metrics::LinearFunctional { label: seqrpf_core::metrics::Label::Named("m".into()), mass: 1.0, terms: vec![] },
                &sample,
            )?;
            steps.push(step("radius", Ok(format!("C0 = {c0:.4}, r = {:.6}", radius.r))));
            json!({
                "params": cal.params,
                "k": k,
                "sigma": cal.sigma,
                "diameter": cal.diameter,
                "attempts": cal.attempts,
                "functionals": cal.family.len(),
                "domination": doms,
                "c0": c0,
                "c0_slope": slope,
                "radius": radius,
                "aperture": aperture,
                "aperture_complex": aperture_complex,
            })
        }
        ConeKind::LogHolder => {
            let params = logholder_params(&p.config, &p.stages)?;
            let n0 = p.stages.iter().filter_map(|s| s.covering()).map(|m| m.n0).max().unwrap_or(1);
            let len = n0.div_ceil(p.stages.len()) * p.stages.len();
            let assemble = |z: C64| -> seqrpf_core::Result<Vec<AssembledOperator>> {
                (0..len).map(|i| p.stages[i % p.stages.len()].assemble(&p.potentials[i % p.stages.len()], z)).collect()
            };
            let sample = sample_logholder(&p.grid, &params, cone.samples.unwrap_or(40), &mut rng);
            let ops0 = assemble(C64::new(0.0, 0.0))?;
            let inv = logholder_invariance(&params, &ops0, &sample)?;
            steps.push(step(
                "invariance",
                if inv.violations.is_empty() {
                    Ok(format!("worst s = {:.4} <= s' = {:.4}", inv.worst_s, params.s_prime))
                } else {
                    Err(RunError::runtime(format!("{} images leave C_s' (worst s = {})", inv.violations.len(), inv.worst_s)))
                },
            ));
            let family = logholder_family(&params, &p.grid);
            let window = TwistWindow { stages: (0..len).map(|i| p.stages[i % p.stages.len()].clone()).collect(), potentials: (0..len).map(|i| p.potentials[i % p.stages.len()].clone()).collect(), z: C64::new(0.0, 0.0) };
            let mut su = 0.0f64;
            for i in 0..p.grid.len() {
                su = su.max(birkhoff_sum(&window.stages, &window.potentials, 0, len, &p.grid.node_point(i))?.abs());
            }
            let mut doms = Vec::new();
            for &z in &zs {
                let r = domination_epsilon(&family, &assemble(z)?, &ops0, &sample, inv.d0_target)?;
                let analytic = covering_domination_bound(z.norm(), su, params.s);
                dom.push(vec![num(z.re), num(z.im), num(r.epsilon), num(r.cosh_threshold), r.admissible.to_string(), num(analytic)]);
                doms.push(json!({"z": cnum(z), "report": r, "analytic_bound": analytic}));
            }
            let (c0, slope) = estimate_c0(&family, assemble, &sample, &[0.01, 0.02, 0.04], 8)?;
            let radius = if inv.d0_target.is_finite() { Some(perturbation_radius(c0, inv.d0_target)?) } else { None };
            json!({
                "params": params,
                "window_len": len,
                "invariance": inv,
                "birkhoff_sup": su,
                "domination": doms,
                "c0": c0,
                "c0_slope": slope,
                "radius": radius,
            })
        }
    };
    Ok(p.report(steps, result, vec![dom]))
}

fn clt_system(p: &Prepared) -> Result<CltSystem, RunError> {
    if p.stages.len() != 1 {
        return Err(RunError::validation("Monte Carlo needs a single stationary stage"));
    }
    let stationary = p.config.statistics.initial == InitialLaw::Stationary;
    match (&p.stages[0].stage, &p.potentials[0]) {
        (SystemStage::Gauss, Potential::Log { coeff }) => Ok(CltSystem::Gauss { u: log_potential, params: vec![*coeff], stationary }),
        (SystemStage::Gauss, Potential::Polynomial(c)) => Ok(CltSystem::Gauss { u: polynomial_potential, params: c.clone(), stationary }),
        (SystemStage::Gauss, Potential::Constant(c)) => Ok(CltSystem::Gauss { u: polynomial_potential, params: vec![*c], stationary }),
        (SystemStage::FullShift(s), Potential::Symbol(v)) => shift_system(&s.weights, v),
        (SystemStage::FullShift(s), Potential::Constant(c)) => shift_system(&s.weights, &vec![*c; s.weights.finite_len().unwrap_or(0)]),
        (SystemStage::Tower(t), u) => {
            let r = t.spec.return_times.iter().copied().max().unwrap_or(0);
            let (levels, columns) = match u {
                Potential::Level(v) => (v.clone(), vec![]),
                Potential::Symbol(v) => (vec![], v.clone()),
                Potential::Constant(c) => (vec![*c; r], vec![]),
                _ => return Err(RunError::validation("tower Monte Carlo needs a level, symbol or constant potential")),
            };
            Ok(CltSystem::Tower { spec: t.spec.clone(), level_values: levels, column_values: columns })
        }
        _ => Err(RunError::validation("no Monte Carlo sampler for this system and potential")),
    }
}

fn run_clt(p: &Prepared) -> Result<Report, RunError> {
    let st = &p.config.statistics;
    let system = clt_system(p)?;
    let norm = p.normalization()?;
    let (rho, points) = (p.config.twist.rho.unwrap_or(st.rho), p.config.twist.points.unwrap_or(st.points));
    let curve = pressure_samples(&p.window(C64::new(0.0, 0.0)), &norm, &p.solver(), rho, points)?;
    let moments = lambda_derivatives(&curve, (1e-6, 1e-4))?;
    let mut steps = vec![step("moments", Ok(format!("mean {:.10}, variance {:.10}", moments.mean, moments.variance)))];
    let quadrature = match (&p.stages[0].stage, &p.potentials[0]) {
        (SystemStage::Gauss, Potential::Log { coeff }) => Some(gauss_expectation(|x| coeff * x.ln(), 20_000)),
        _ => None,
    };
    let clt = monte_carlo_clt(&system, st.n, st.trials, p.seed, moments.mean, moments.variance)?;
    let rel = (clt.empirical_variance - moments.variance).abs() / moments.variance;
    steps.push(step("clt", Ok(format!("KS {:.5}, variance ratio error {rel:.4}", clt.ks))));
    let mut summary = Table::new("summary", &["trials", "n", "mean", "variance", "ks", "empirical_mean", "empirical_variance", "restarts"]);
    summary.push(vec![
        clt.trials.to_string(),
        clt.n.to_string(),
        num(clt.mean),
        num(clt.variance),
        num(clt.ks),
        num(clt.empirical_mean),
        num(clt.empirical_variance),
        clt.restarts.to_string(),
    ]);
    let mut tables = vec![summary];
    if p.config.output.trials_csv {
        let mut t = Table::new("trials", &["trial", "standardized_sum"]);
        for (i, s) in clt.standardized.iter().enumerate() {
            t.push(vec![i.to_string(), num(*s)]);
        }
        tables.push(t);
    }
    let result = json!({
        "moments": moments,
        "quadrature_mean": quadrature,
        "circle": curve.circle.iter().map(|s| json!({"z": cnum(s.z), "value": s.value.map(cnum), "failure": s.failure})).collect::<Vec<_>>(),
        "clt": clt,
        "variance_relative_error": rel,
    });
    Ok(p.report(steps, result, tables))
}

/// Random smooth test function with unit-scale values.
pub fn random_function<R: Rng>(grid: &Arc<Grid>, rng: &mut R) -> DiscreteFunction {
    match grid.interval() {
        Some(_) => {
            let coeffs: Vec<(f64, f64, f64)> =
                (0..5).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU))).collect();
            DiscreteFunction::from_fn(grid.clone(), |p| {
                let x = p.as_real().unwrap_or(0.0);
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b, ph))| C64::new(*a, *b) * ((k as f64 + 1.0) * std::f64::consts::PI * x + ph).cos() / (k as f64 + 1.0))
                    .sum()
            })
        }
        None => {
            let v = (0..grid.len()).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            DiscreteFunction::new(grid.clone(), v).expect("grid-sized vector")
        }
    }
}

fn run_ly(p: &Prepared) -> Result<Report, RunError> {
    let ly = &p.config.lasota_yorke;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut table = Table::new("checks", &["index", "n", "z_re", "z_im", "lhs", "rhs", "holds"]);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for i in 0..ly.samples {
        let n = rng.random_range(1..=ly.n_max);
        let z = C64::from_polar(ly.z_max * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        let f = random_function(&p.grid, &mut rng);
        let w = TwistWindow {
            stages: (0..n).map(|k| p.stages[k % p.stages.len()].clone()).collect(),
            potentials: (0..n).map(|k| p.potentials[k % p.stages.len()].clone()).collect(),
            z,
        };
        let r = lasota_yorke_report(&w, &f, LyParams { q: ly.q, alpha: ly.alpha, tol: 1e-9 })?;
        if !r.holds {
            violations += 1;
        }
        worst = worst.max(r.lhs / r.rhs);
        table.push(vec![i.to_string(), n.to_string(), num(z.re), num(z.im), num(r.lhs), num(r.rhs), r.holds.to_string()]);
    }
    let steps = vec![step(
        "lasota-yorke",
        if violations == 0 {
            Ok(format!("{} checks, worst lhs/rhs {worst:.4}", ly.samples))
        } else {
            Err(RunError::runtime(format!("{violations} of {} checks violated", ly.samples)))
        },
    )];
    Ok(p.report(steps, json!({ "samples": ly.samples, "violations": violations, "worst_ratio": worst }), vec![table]))
}
