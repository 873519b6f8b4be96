//! Property suites for the scalar kernels: growth sandwich, convexity,
//! Lipschitz-type gap bound, curvature lower bound, and finite-difference
//! consistency of the derivative chain.

use degenlab_core::scalar::Exponents;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn symmetric(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    (2.0 * unit(rng) - 1.0) * scale
}

const P_VALUES: [f64; 5] = [2.0, 2.5, 3.0, 4.0, 6.0];
const DELTA_SETS: [&[f64]; 4] = [&[0.0], &[0.5], &[1.5], &[0.3, 0.7]];
const SAMPLES: usize = 10_000;

#[test]
fn growth_sandwich_holds_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for &p in &P_VALUES {
        for deltas in DELTA_SETS {
            let exp = Exponents::new(p, deltas.to_vec()).unwrap();
            for _ in 0..SAMPLES {
                let axis = (rng.next_u64() % deltas.len() as u64) as usize;
                let t = symmetric(&mut rng, 6.0);
                let eps = unit(&mut rng);
                let (lo, hi) = exp.growth_bounds(axis, t, eps).unwrap();
                let g = exp.g_eps(axis, t, eps).unwrap();
                assert!(
                    lo <= g && g <= hi,
                    "sandwich failed: p={p} deltas={deltas:?} t={t} eps={eps} lo={lo} g={g} hi={hi}"
                );
            }
        }
    }
}

#[test]
fn strict_convexity_outside_the_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    for &p in &P_VALUES {
        for deltas in DELTA_SETS {
            let exp = Exponents::new(p, deltas.to_vec()).unwrap();
            for _ in 0..SAMPLES {
                let axis = (rng.next_u64() % deltas.len() as u64) as usize;
                let d = deltas[axis];
                // enforce the separation hypothesis with the stated margin
                let t1 = symmetric(&mut rng, 4.0);
                let gap = 2.0 * d + 1e-6 + 4.0 * unit(&mut rng);
                let t2 = if unit(&mut rng) < 0.5 { t1 + gap } else { t1 - gap };
                let s = 0.1 + 0.8 * unit(&mut rng);
                let (lhs, rhs, strict) = exp.strict_convexity_check(axis, t1, t2, s).unwrap();
                assert!(strict);
                let rel = (rhs - lhs) / rhs.max(f64::MIN_POSITIVE);
                assert!(
                    rel > 1e-12,
                    "convexity gap too small: p={p} d={d} t1={t1} t2={t2} s={s} rel={rel:e}"
                );
            }
        }
    }
}

#[test]
fn lipschitz_gap_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    for &p in &P_VALUES {
        for deltas in DELTA_SETS {
            let exp = Exponents::new(p, deltas.to_vec()).unwrap();
            for _ in 0..SAMPLES {
                let axis = (rng.next_u64() % deltas.len() as u64) as usize;
                let t1 = symmetric(&mut rng, 5.0);
                let t2 = symmetric(&mut rng, 5.0);
                let (gap, bound) = exp.lipschitz_gap_bound(axis, t1, t2).unwrap();
                assert!(
                    gap <= bound * (1.0 + 1e-14) + 1e-300,
                    "gap bound failed: p={p} t1={t1} t2={t2} gap={gap} bound={bound}"
                );
            }
        }
    }
}

#[test]
fn curvature_lower_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    for &p in &P_VALUES {
        for deltas in DELTA_SETS {
            let exp = Exponents::new(p, deltas.to_vec()).unwrap();
            for _ in 0..SAMPLES {
                let axis = (rng.next_u64() % deltas.len() as u64) as usize;
                let d = deltas[axis];
                let threshold = d + 3.0 * unit(&mut rng);
                let t = (threshold + 3.0 * unit(&mut rng))
                    * if unit(&mut rng) < 0.5 { -1.0 } else { 1.0 };
                let bound = exp.second_derivative_lower_bound(axis, t, threshold).unwrap();
                let g2 = exp.g_second(axis, t).unwrap();
                assert!(
                    g2 >= bound * (1.0 - 1e-12),
                    "curvature bound failed: p={p} d={d} T={threshold} t={t} g2={g2} bound={bound}"
                );
            }
        }
    }
}

#[test]
fn derivative_chain_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    for &p in &P_VALUES {
        for deltas in DELTA_SETS {
            let exp = Exponents::new(p, deltas.to_vec()).unwrap();
            let mut checked = 0usize;
            while checked < 2_000 {
                let axis = (rng.next_u64() % deltas.len() as u64) as usize;
                let d = deltas[axis];
                let t = symmetric(&mut rng, 4.0);
                if (t.abs() - d).abs() <= 1e-3 {
                    continue;
                }
                checked += 1;
                let h = 1e-5 * t.abs().max(1.0);
                let fd1 = (exp.g(axis, t + h).unwrap() - exp.g(axis, t - h).unwrap()) / (2.0 * h);
                let an1 = exp.g_prime(axis, t).unwrap();
                assert!(
                    (fd1 - an1).abs() <= 1e-6 * an1.abs().max(1.0),
                    "g' mismatch: p={p} d={d} t={t} fd={fd1} an={an1}"
                );
                if p >= 3.0 {
                    let fd2 = (exp.g_prime(axis, t + h).unwrap()
                        - exp.g_prime(axis, t - h).unwrap())
                        / (2.0 * h);
                    let an2 = exp.g_second(axis, t).unwrap();
                    assert!(
                        (fd2 - an2).abs() <= 1e-6 * an2.abs().max(1.0),
                        "g'' mismatch: p={p} d={d} t={t} fd={fd2} an={an2}"
                    );
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn kernel_is_even_nonnegative_and_banded(
        p in 2.0f64..6.0,
        delta in 0.0f64..2.0,
        t in -8.0f64..8.0,
    ) {
        let exp = Exponents::new(p, vec![delta]).unwrap();
        let g = exp.g(0, t).unwrap();
        prop_assert!(g >= 0.0);
        prop_assert_eq!(g, exp.g(0, -t).unwrap());
        if t.abs() <= delta {
            prop_assert_eq!(g, 0.0);
        } else {
            prop_assert!(g > 0.0);
        }
    }

    #[test]
    fn first_derivative_is_monotone(
        p in 2.0f64..6.0,
        delta in 0.0f64..2.0,
        a in -8.0f64..8.0,
        b in -8.0f64..8.0,
    ) {
        let exp = Exponents::new(p, vec![delta]).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(exp.g_prime(0, lo).unwrap() <= exp.g_prime(0, hi).unwrap());
    }

    #[test]
    fn regularized_curvature_dominates_eps(
        p in 2.0f64..6.0,
        delta in 0.0f64..2.0,
        t in -8.0f64..8.0,
        eps in 0.0f64..1.0,
    ) {
        let exp = Exponents::new(p, vec![delta]).unwrap();
        prop_assert!(exp.g_second(0, t).unwrap() >= 0.0);
        prop_assert!(exp.g_eps_second(0, t, eps).unwrap() >= eps);
    }
}
