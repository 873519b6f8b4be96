//! Discrete anisotropic Sobolev inequality checks on compactly supported
//! fields: a tensor bump, scale invariance of the ratio, and a seeded
//! randomized suite at moderate resolution.

use degenlab_core::grid::{Grid, GridFunction};
use degenlab_core::troisi::{random_compact_field, troisi_check};
use proptest::prelude::*;

fn bump(t: f64) -> f64 {
    // smooth bump on (0.2, 0.8), zero outside
    let s = (t - 0.5) / 0.3;
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

#[test]
fn tensor_bump_passes_with_margin() {
    let grid = Grid::unit(2, 129).unwrap();
    let u = GridFunction::from_fn(grid, |x| bump(x[0]) * bump(x[1]));
    let rep = troisi_check(&u, 1.5, 0.02).unwrap();
    assert!(rep.pass);
    assert!(rep.ratio < 1.0, "expected strict margin, got ratio {}", rep.ratio);
    assert!(rep.lhs > 0.0);
}

#[test]
fn randomized_fields_satisfy_the_inequality() {
    let grid = Grid::unit(2, 129).unwrap();
    for seed in 0..20u64 {
        let u = random_compact_field(&grid, 1000 + seed, 5, 3).unwrap();
        for q in [1.2, 1.5, 1.8] {
            let rep = troisi_check(&u, q, 0.02).unwrap();
            assert!(
                rep.pass,
                "violation at seed {seed} q {q}: lhs={:e} rhs={:e} ratio={}",
                rep.lhs, rep.rhs_core, rep.ratio
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ratio_is_scale_invariant(mag in -3.0f64..3.0, seed in 0u64..50) {
        let c = 10.0f64.powf(mag);
        let grid = Grid::unit(2, 65).unwrap();
        let u = random_compact_field(&grid, seed, 4, 3).unwrap();
        let scaled = u.map(|v| c * v);
        let a = troisi_check(&u, 1.5, 0.02).unwrap();
        let b = troisi_check(&scaled, 1.5, 0.02).unwrap();
        // both sides scale by c^2, so the ratio is invariant
        prop_assert!((a.ratio - b.ratio).abs() <= 1e-12 * a.ratio.max(1e-300));
        prop_assert_eq!(a.pass, b.pass);
    }
}
