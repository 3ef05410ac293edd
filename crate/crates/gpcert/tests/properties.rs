//! Property tests for the crate-wide soundness invariants.

use gpcert::interval::Interval;
use gpcert::kernels::{self, KernelSpec};
use gpcert::region::Region;
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = KernelSpec<f64>> {
    // The fixed menu covers every family; pick one and jitter a region.
    (0usize..8).prop_map(|i| kernels::test_suite_kernels(2)[i].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Kernel bounding functions sandwich the kernel on random regions.
    #[test]
    fn kernel_sandwich_validity(
        spec in kernel_strategy(),
        cx in -1.5f64..1.5,
        cy in -1.5f64..1.5,
        wx in 0.02f64..1.0,
        wy in 0.02f64..1.0,
        ax in -2.0f64..2.0,
        ay in -2.0f64..2.0,
        samples in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 50),
    ) {
        let region = Region::new(vec![cx - wx, cy - wy], vec![cx + wx, cy + wy]).unwrap();
        let anchor = [ax, ay];
        let dec = spec.decomposition().unwrap();
        let pair = dec.anchored_pair(&anchor, &region);
        for (u, v) in samples {
            let x = [cx - wx + 2.0 * wx * u, cy - wy + 2.0 * wy * v];
            let val = dec.eval(&x, &anchor);
            let phis: Vec<f64> = dec.channels().iter().map(|ch| ch.eval(&x, &anchor)).collect();
            prop_assert!(pair.lbf_at(&phis) <= val + 1e-9);
            prop_assert!(pair.ubf_at(&phis) >= val - 1e-9);
            prop_assert!(pair.lo - 1e-9 <= val && val <= pair.hi + 1e-9);
        }
    }

    /// Splits cover the parent exactly and never grow the diameter.
    #[test]
    fn split_partitions_region(
        lo in prop::collection::vec(-3.0f64..3.0, 1..4),
        width in prop::collection::vec(0.01f64..2.0, 1..4),
        dim_choice in 0usize..4,
        samples in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 20),
    ) {
        let d = lo.len().min(width.len());
        let lo = lo[..d].to_vec();
        let hi: Vec<f64> = lo.iter().zip(&width[..d]).map(|(&l, &w)| l + w).collect();
        let region = Region::new(lo.clone(), hi.clone()).unwrap();
        let j = dim_choice % d;
        let (a, b) = region.split_at(j);
        prop_assert!(a.diam() <= region.diam() + 1e-15);
        prop_assert!(b.diam() <= region.diam() + 1e-15);
        for s in samples {
            let x: Vec<f64> = (0..d).map(|k| lo[k] + (hi[k] - lo[k]) * s[k]).collect();
            prop_assert!(region.contains(&x));
            prop_assert!(a.contains(&x) || b.contains(&x));
        }
        // Interiors are disjoint along the split dimension.
        prop_assert_eq!(a.hi()[j], b.lo()[j]);
    }

    /// Interval arithmetic encloses the pointwise operations.
    #[test]
    fn interval_ops_enclose(
        a_lo in -5.0f64..5.0, a_w in 0.0f64..3.0,
        b_lo in -5.0f64..5.0, b_w in 0.0f64..3.0,
        ta in 0.0f64..1.0, tb in 0.0f64..1.0,
    ) {
        let ia = Interval::new(a_lo, a_lo + a_w);
        let ib = Interval::new(b_lo, b_lo + b_w);
        let x = a_lo + a_w * ta;
        let y = b_lo + b_w * tb;
        prop_assert!(ia.add(&ib).contains(x + y));
        prop_assert!(ia.sub(&ib).contains(x - y));
        let prod = ia.mul(&ib);
        prop_assert!(prod.lo <= x * y + 1e-12 && x * y <= prod.hi + 1e-12);
        if !ib.contains_zero() {
            let q = ia.div(&ib).unwrap();
            prop_assert!(q.lo <= x / y + 1e-9 && x / y <= q.hi + 1e-9);
        }
    }

    /// The link-mass partition is contiguous and spans the real line.
    #[test]
    fn partition_is_contiguous(m in 1usize..40) {
        use gpcert::likelihood::build_partition;
        use gpcert::model::Link;
        let p = build_partition(m, Link::<f64>::Logistic);
        prop_assert_eq!(p.cells(), m);
        let br = p.breaks();
        prop_assert_eq!(br[0], f64::NEG_INFINITY);
        prop_assert_eq!(br[m], f64::INFINITY);
        for w in br.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
    }
}
