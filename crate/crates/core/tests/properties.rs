use std::sync::Arc;

use proptest::prelude::*;
use seqrpf_core::function::DiscreteFunction;
use seqrpf_core::grid::{Grid, Point};
use seqrpf_core::metrics::FunctionalFamily;
use seqrpf_core::systems::{gauss_stage, paired_preimages, FullShift, IntervalMap, SystemStage};
use seqrpf_core::transfer::{Mode, Potential, TransferStage};
use seqrpf_core::C64;

fn orthant(n: usize) -> (FunctionalFamily, Arc<Grid>) {
    let g = Arc::new(Grid::cylinder(n, 1, 0.5).unwrap());
    (FunctionalFamily::positive_orthant(g.clone()), g)
}

fn real(g: &Arc<Grid>, v: &[f64]) -> DiscreteFunction {
    DiscreteFunction::from_real(g.clone(), v).unwrap()
}

/// Interior points of the complexified orthant: arguments within ±π/4 of
/// a common phase, so all pairwise products have positive real part.
fn complex(g: &Arc<Grid>, r: &[f64], a: &[f64], phase: f64) -> DiscreteFunction {
    let v = r.iter().zip(a).map(|(r, a)| C64::from_polar(*r, phase + a)).collect();
    DiscreteFunction::new(g.clone(), v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hilbert_is_a_projective_pseudometric(
        x in prop::collection::vec(0.1f64..10.0, 4),
        y in prop::collection::vec(0.1f64..10.0, 4),
        w in prop::collection::vec(0.1f64..10.0, 4),
        c in 0.01f64..100.0,
    ) {
        let (fam, g) = orthant(4);
        let (fx, fy, fw) = (real(&g, &x), real(&g, &y), real(&g, &w));
        let dxy = fam.hilbert_distance(&fx, &fy).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert!((dxy - fam.hilbert_distance(&fy, &fx).unwrap()).abs() < 1e-12);
        let scaled = fam.hilbert_distance(&fx.scale(C64::new(c, 0.0)), &fy).unwrap();
        prop_assert!((scaled - dxy).abs() < 1e-10);
        let via = fam.hilbert_distance(&fx, &fw).unwrap() + fam.hilbert_distance(&fw, &fy).unwrap();
        prop_assert!(dxy <= via + 1e-10);
    }

    #[test]
    fn delta_triangle_and_projectivity(
        r in prop::collection::vec(0.2f64..5.0, 9),
        a in prop::collection::vec(-0.7f64..0.7, 9),
        phase in prop::collection::vec(-3.0f64..3.0, 3),
        c in (0.1f64..10.0, -3.0f64..3.0),
    ) {
        let (fam, g) = orthant(3);
        let x = complex(&g, &r[0..3], &a[0..3], phase[0]);
        let y = complex(&g, &r[3..6], &a[3..6], phase[1]);
        let w = complex(&g, &r[6..9], &a[6..9], phase[2]);
        let dxy = fam.delta_distance(&x, &y).unwrap();
        let dxw = fam.delta_distance(&x, &w).unwrap();
        let dwy = fam.delta_distance(&w, &y).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert!(dxy <= dxw + dwy + 1e-9 * (1.0 + dxy));
        let cx = x.scale(C64::from_polar(c.0, c.1));
        prop_assert!((fam.delta_distance(&cx, &y).unwrap() - dxy).abs() < 1e-9 * (1.0 + dxy));
        let dyx = fam.delta_distance(&y, &x).unwrap();
        prop_assert!((dyx - dxy).abs() < 1e-9 * (1.0 + dxy));
    }

    #[test]
    fn real_delta_matches_hilbert(x in prop::collection::vec(0.1f64..10.0, 2), y in prop::collection::vec(0.1f64..10.0, 2)) {
        let (fam, g) = orthant(2);
        let (fx, fy) = (real(&g, &x), real(&g, &y));
        let h = fam.hilbert_distance(&fx, &fy).unwrap();
        let d = fam.delta_distance(&fx, &fy).unwrap();
        prop_assert!((h - d).abs() < 1e-9 * (1.0 + h));
    }

    #[test]
    fn norms_are_homogeneous(v in prop::collection::vec(-5.0f64..5.0, 16), c in (-4.0f64..4.0, -4.0f64..4.0)) {
        let g = Arc::new(Grid::chebyshev(16).unwrap());
        let f = real(&g, &v);
        let c = C64::new(c.0, c.1);
        let a = f.norm_alpha(1.0, 2.0).unwrap();
        let b = f.scale(c).norm_alpha(1.0, 2.0).unwrap();
        prop_assert!((b.total - c.norm() * a.total).abs() < 1e-10 * (1.0 + a.total));
    }

    #[test]
    fn transfer_is_linear_and_positive(
        v in prop::collection::vec(0.0f64..5.0, 32),
        w in prop::collection::vec(-5.0f64..5.0, 32),
        a in -3.0f64..3.0,
    ) {
        let cyl = Arc::new(Grid::cylinder(2, 5, 0.5).unwrap());
        let shift = TransferStage::new(SystemStage::FullShift(FullShift::bernoulli(2)), cyl.clone(), Mode::Plain, 0).unwrap();
        let line = Arc::new(Grid::piecewise_linear((0..32).map(|k| k as f64 / 31.0).collect()).unwrap());
        let dbl = TransferStage::new(SystemStage::Interval(IntervalMap::doubling()), line.clone(), Mode::Plain, 0).unwrap();
        for (stage, grid) in [(shift, cyl), (dbl, line)] {
            let op = stage.assemble(&Potential::zero(), C64::new(0.0, 0.0)).unwrap();
            let f = real(&grid, &v);
            let g = real(&grid, &w);
            let lf = op.apply(&f).unwrap().function;
            prop_assert!(lf.values.iter().all(|x| x.re >= 0.0 && x.im == 0.0));
            let lg = op.apply(&g).unwrap().function;
            let mix = op.apply(&f.axpy(C64::new(a, 0.0), &g).unwrap()).unwrap().function;
            for k in 0..grid.len() {
                prop_assert!((mix.values[k] - lf.values[k] - lg.values[k] * a).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gauss_pairing_contracts(x in 0.0f64..1.0, x2 in 0.0f64..1.0, n in 1usize..5) {
        let pairs = paired_preimages(&[gauss_stage()], 0, &Point::Real(x), &Point::Real(x2), n, 6).unwrap();
        for p in pairs {
            prop_assert!(p.within_bound, "{} > {}", p.distance, p.bound);
        }
    }
}
