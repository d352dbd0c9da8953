use std::sync::Arc;

use seqrpf_core::function::DiscreteFunction;
use seqrpf_core::grid::Grid;
use seqrpf_core::rpf::{convergence_rate, rpf_residuals, solve_rpf, Normalization, SolverConfig};
use seqrpf_core::systems::{gauss_stage, AffineBranch, IntervalMap, SystemStage};
use seqrpf_core::transfer::{Mode, Potential, TransferStage, TwistWindow};
use seqrpf_core::C64;

fn mixed_window(z: C64) -> TwistWindow {
    let g = Arc::new(Grid::chebyshev(64).unwrap());
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

#[test]
fn mixed_window_residuals() {
    for z in [C64::new(0.0, 0.0), C64::new(0.05, 0.0), C64::new(0.0, 0.05)] {
        let w = mixed_window(z);
        let t = solve_rpf(&w, Normalization::Covering, &SolverConfig::default()).unwrap();
        let ops = w.assemble().unwrap();
        for r in rpf_residuals(&t, &ops) {
            assert!(r.max() < 1e-8, "z = {z}: {r:?}");
        }
        if z == C64::new(0.0, 0.0) {
            for l in &t.lambda {
                assert!((l - 1.0).norm() < 1e-10, "{l}");
            }
        }
        let g = DiscreteFunction::from_fn(w.grid().unwrap().clone(), |p| C64::new(p.as_real().unwrap(), 0.0));
        let c = convergence_rate(&ops, &g, &t, 25).unwrap();
        assert!(c.rate < 1.0 && c.r_squared > 0.99, "z = {z}: rate {} r2 {}", c.rate, c.r_squared);
    }
}
