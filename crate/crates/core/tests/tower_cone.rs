use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqrpf_core::cones::*;
use seqrpf_core::function::DiscreteFunction;
use seqrpf_core::grid::Grid;
use seqrpf_core::metrics::Label;
use seqrpf_core::rpf::tower_density;
use seqrpf_core::systems::{SystemStage, Tower, TowerSpec};
use seqrpf_core::transfer::{AssembledOperator, Mode, Potential, TransferStage};
use seqrpf_core::{Error, C64};

struct Setup {
    grid: Arc<Grid>,
    h: DiscreteFunction,
    op: AssembledOperator,
}

fn small_tower() -> Setup {
    let tower = Tower::build(TowerSpec::geometric(6, 0.5, 0.5, 2)).unwrap();
    let grid = Arc::new(tower.grid().unwrap());
    let stage = TransferStage::new(SystemStage::Tower(tower), grid.clone(), Mode::Weighted, 0).unwrap();
    let h = tower_density(&stage, 1e-14, 5000).unwrap();
    let op = stage.assemble(&Potential::zero(), C64::new(0.0, 0.0)).unwrap();
    Setup { grid, h, op }
}

fn mass(f: &DiscreteFunction) -> f64 {
    f.grid.reference_weights().iter().zip(&f.values).map(|(w, v)| w * v.re).sum()
}

#[test]
fn density_is_reference_for_upsilon() {
    let s = small_tower();
    let p = TowerConeParams::new(&s.h, 20.0, 20.0, 20.0, 0.2).unwrap();
    let fam = tower_functional_family(&p, &s.grid).unwrap();
    let vals = fam.evaluate(&s.h).unwrap();
    let mut seen = 0;
    for (f, v) in fam.functionals.iter().zip(&vals) {
        if let Label::Upsilon(_) = f.label {
            assert!((v.re - 1.0).abs() < 1e-12);
            seen += 1;
        }
    }
    assert_eq!(seen, p.p1.len());
    assert!(p.p2_mass < 0.2 && !p.p2.is_empty());
}

#[test]
fn constant_one_and_density_are_members() {
    let s = small_tower();
    let p = TowerConeParams::new(&s.h, 1.0, 1.0, 1.0, 0.05).unwrap();
    let p = p.with_abc(1.01 * p.d.max(1.0), 1.01 * p.h_lip.max(1e-3), 1.01 * p.h_sup.max(1.0));
    p.validate().unwrap();
    let fam = tower_functional_family(&p, &s.grid).unwrap();
    let one = DiscreteFunction::constant(s.grid.clone(), C64::new(1.0, 0.0));
    assert!(fam.real_cone_contains(&one).unwrap());
    assert!(fam.real_cone_contains(&s.h).unwrap());
    assert!(matches!(p.with_abc(0.5, p.b, p.c).validate(), Err(Error::Config(_))));
}

#[test]
fn spike_fails_a_pair_functional() {
    let s = small_tower();
    let p = TowerConeParams::new(&s.h, 40.0, 10.0, 40.0, 0.05).unwrap();
    let fam = tower_functional_family(&p, &s.grid).unwrap();
    // raise one level-0 node far above its same-floor neighbours
    let mut f = DiscreteFunction::constant(s.grid.clone(), C64::new(1.0, 0.0));
    f.values[0] += C64::new(100.0, 0.0);
    let vals = fam.evaluate(&f).unwrap();
    let bad: Vec<_> = fam.functionals.iter().zip(&vals).filter(|(_, v)| v.re < 0.0).map(|(s, _)| s.label.clone()).collect();
    assert!(bad.iter().any(|l| matches!(l, Label::GammaPair(_, _))), "{bad:?}");
}

#[test]
fn sup_and_aperture_bounds_on_samples() {
    let s = small_tower();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = TowerConeParams::new(&s.h, 30.0, 12.0, 25.0, 0.05).unwrap();
    let fam = tower_functional_family(&p, &s.grid).unwrap();
    let mut sample = sample_cone(&fam, &s.h, 200, &mut rng).unwrap();
    sample.extend(sample_cone_axes(&fam, &s.h).unwrap());
    for f in &sample {
        assert!(fam.real_cone_contains(f).unwrap());
        let m = mass(f);
        assert!(m > 0.0);
        let n = f.norm_tower().unwrap();
        assert!(n.sup <= p.c2 * m * (1.0 + 1e-9), "{} > {}", n.sup, p.c2 * m);
        assert!(n.total <= (p.c2 + p.b) * m * (1.0 + 1e-9));
    }
}

#[test]
fn reproducing_shift_examples() {
    let s = small_tower();
    let p = TowerConeParams::new(&s.h, 30.0, 12.0, 25.0, 0.05).unwrap();
    let fam = tower_functional_family(&p, &s.grid).unwrap();
    assert_eq!(reproducing_shift(&p, &s.h, &s.h).unwrap(), C64::new(0.0, 0.0));
    let zero = DiscreteFunction::constant(s.grid.clone(), C64::new(0.0, 0.0));
    assert_eq!(reproducing_shift(&p, &zero, &s.h).unwrap(), C64::new(0.0, 0.0));

    let minus = s.h.scale(C64::new(-1.0, 0.0));
    let r = reproducing_shift(&p, &minus, &s.h).unwrap();
    // every bound equals 1 for f = -h, except the sup-norm one
    let expect = 1.0f64.max((s.h.sup_norm() + p.c) / (p.c - p.h_sup));
    assert!((r.re - expect).abs() < 1e-8 * expect, "{r} vs {expect}");
    assert!(fam.real_cone_contains(&minus.axpy(r, &s.h).unwrap()).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    use rand::Rng;
    for _ in 0..20 {
        let v: Vec<C64> = (0..s.grid.len()).map(|_| C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect();
        let f = DiscreteFunction::new(s.grid.clone(), v).unwrap();
        let r = reproducing_shift(&p, &f, &s.h).unwrap();
        let g = f.axpy(C64::new(r.re, 0.0), &s.h).unwrap().axpy(C64::new(0.0, r.im), &s.h).unwrap();
        assert!(fam.complex_cone_contains(&g).unwrap());
        assert!(fam.real_cone_contains(&g.real_part()).unwrap());
        assert!(fam.real_cone_contains(&g.imag_part()).unwrap());
    }
    let bad = p.with_abc(30.0, p.h_lip * 0.5, 25.0);
    assert!(matches!(reproducing_shift(&bad, &minus, &s.h), Err(Error::Config(_))));
}

#[test]
fn calibration_contracts_and_birkhoff_holds() {
    let s = small_tower();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cal = calibrate_tower_cone(&[s.op.clone()], &s.h, &CalibrationConfig::default(), &mut rng).unwrap();
    assert!(cal.sigma <= 0.9 && cal.diameter.is_finite());
    let ops: Vec<_> = (0..cal.k).map(|_| s.op.clone()).collect();
    let f = sample_cone(&cal.family, &s.h, 30, &mut rng).unwrap();
    let g = sample_cone(&cal.family, &s.h, 30, &mut rng).unwrap();
    let bound = seqrpf_core::metrics::birkhoff_bound(cal.diameter);
    for (f, g) in f.iter().zip(&g) {
        let d0 = cal.family.hilbert_distance(f, g).unwrap();
        let lf = iterate(&ops, &f.values, cal.k);
        let lg = iterate(&ops, &g.values, cal.k);
        let d1 = cal
            .family
            .hilbert_distance(&DiscreteFunction::new(s.grid.clone(), lf).unwrap(), &DiscreteFunction::new(s.grid.clone(), lg).unwrap())
            .unwrap();
        assert!(d1 <= bound * d0 + 1e-12, "{d1} > {bound} * {d0}");
    }
}

#[test]
fn domination_vanishes_at_zero() {
    let s = small_tower();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = TowerConeParams::new(&s.h, 30.0, 12.0, 25.0, 0.05).unwrap();
    let fam = tower_functional_family(&p, &s.grid).unwrap();
    let sample = sample_cone(&fam, &s.h, 10, &mut rng).unwrap();
    let ops = vec![s.op.clone(); 3];
    let r = domination_epsilon(&fam, &ops, &ops, &sample, 1.0).unwrap();
    assert_eq!(r.epsilon, 0.0);
    assert!(r.admissible);
}
