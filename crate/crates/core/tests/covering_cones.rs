use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqrpf_core::cones::*;
use seqrpf_core::function::DiscreteFunction;
use seqrpf_core::grid::Grid;
use seqrpf_core::systems::{FullShift, IntervalMap, SystemStage};
use seqrpf_core::transfer::{Mode, Potential, TransferStage};
use seqrpf_core::C64;

fn doubling(n: usize) -> TransferStage {
    let g = Arc::new(Grid::chebyshev(n).unwrap());
    TransferStage::new(SystemStage::Interval(IntervalMap::doubling()), g, Mode::Plain, 0).unwrap()
}

#[test]
fn membership_examples() {
    let g = Arc::new(Grid::chebyshev(32).unwrap());
    let p = LogHolderConeParams::new(2.0, 0.5, 1.0, 2.0, 2.25).unwrap();
    let one = DiscreteFunction::constant(g.clone(), C64::new(1.0, 0.0));
    assert!(logholder_membership(&p, &one).0);
    let h = DiscreteFunction::from_fn(g.clone(), |x| C64::new(1.0 / (std::f64::consts::LN_2 * (1.0 + x.as_real().unwrap())), 0.0));
    let (inside, family) = logholder_membership(&p, &h);
    assert!(inside);
    assert_eq!(family.len(), 32 + 32 * 31);
    // just below the log-Lipschitz constant of h the check must fail
    let tight = LogHolderConeParams::new(2.0, 0.45, 1.0, 2.0, 2.25).unwrap();
    assert!(!logholder_membership(&tight, &h).0);
    let sign = DiscreteFunction::from_fn(g, |x| C64::new(x.as_real().unwrap() - 0.5, 0.0));
    assert!(!logholder_membership(&p, &sign).0);
}

#[test]
fn doubling_maps_cone_into_improved_cone() {
    let stage = doubling(48);
    let p = LogHolderConeParams::new(4.0, 1.0, 1.0, 2.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sample = sample_logholder(&stage.grid, &p, 40, &mut rng);
    for f in &sample {
        assert!(logholder_membership(&p, f).0);
    }
    let op = stage.assemble(&Potential::zero(), C64::new(0.0, 0.0)).unwrap();
    let r = logholder_invariance(&p, &[op], &sample).unwrap();
    assert!(r.violations.is_empty(), "worst s = {}", r.worst_s);
    assert!(r.worst_s <= 3.0 + 1e-9);
    assert!(r.holds(), "{r:?}");
}

#[test]
fn covering_aperture() {
    let stage = doubling(32);
    let p = LogHolderConeParams::new(3.0, 1.0, 1.0, 2.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = stage.grid.reference_weights();
    for f in sample_logholder(&stage.grid, &p, 50, &mut rng) {
        let l: f64 = w.iter().zip(&f.values).map(|(w, v)| w * v.re).sum();
        let sup = f.sup_norm();
        assert!(sup <= (p.s * p.q).exp() * l);
        let v = f.norm_alpha(1.0, 2.0).unwrap().seminorm;
        assert!(v <= p.s * p.q * (p.s * p.q).exp() * sup * (1.0 + 1e-12));
    }
}

#[test]
fn bernoulli_domination_is_linear_in_z() {
    let grid = Arc::new(Grid::cylinder(2, 6, 0.5).unwrap());
    let stage = TransferStage::new(SystemStage::FullShift(FullShift::bernoulli(2)), grid.clone(), Mode::Plain, 0).unwrap();
    let u = Potential::Symbol(vec![0.0, 1.0]);
    let p = LogHolderConeParams::new(4.0, 1.0, 1.0, 2.0, 2.0).unwrap();
    let family = logholder_family(&p, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sample = sample_logholder(&grid, &p, 20, &mut rng);
    let window = |z: C64| vec![stage.assemble(&u, z).unwrap(); 3];
    let z = C64::new(0.08, 0.05);
    let e1 = domination_epsilon(&family, &window(z), &window(C64::new(0.0, 0.0)), &sample, 1.0).unwrap().epsilon;
    let e2 = domination_epsilon(&family, &window(z / 2.0), &window(C64::new(0.0, 0.0)), &sample, 1.0).unwrap().epsilon;
    assert!(e1 > 0.0 && e2 <= 0.6 * e1, "{e2} vs {e1}");
    let e0 = domination_epsilon(&family, &window(C64::new(0.0, 0.0)), &window(C64::new(0.0, 0.0)), &sample, 1.0).unwrap();
    assert_eq!(e0.epsilon, 0.0);
}
