//! Solver checks against independent oracles: a from-scratch energy
//! summation, finite differences of the energy, a manufactured quadratic
//! limit problem, and the continuation behavior.

use degenlab_core::grid::{lp_norm, Grid, GridFunction};
use degenlab_core::minimize::{
    continuation_solve, el_residual, energy, energy_gradient, gradient_p_integral,
    residual_threshold, solve, ProblemSpec,
};
use degenlab_core::scalar::Exponents;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Straightforward re-implementation of the discrete energy definition in 2D:
/// forward differences averaged over parallel cell edges, plus trapezoidal
/// quadrature of the source term. Kept independent of the library path.
fn naive_energy_2d(
    p: f64,
    deltas: [f64; 2],
    eps: f64,
    n: usize,
    u: &[f64],
    f: &[f64],
) -> f64 {
    let h = 1.0 / (n - 1) as f64;
    let at = |i: usize, j: usize| u[i * n + j];
    let mut acc = 0.0;
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let gx = (at(i + 1, j) - at(i, j) + at(i + 1, j + 1) - at(i, j + 1)) / (2.0 * h);
            let gy = (at(i, j + 1) - at(i, j) + at(i + 1, j + 1) - at(i + 1, j)) / (2.0 * h);
            for (t, d) in [(gx, deltas[0]), (gy, deltas[1])] {
                let r = (t.abs() - d).max(0.0);
                acc += r.powf(p) / p + 0.5 * eps * t * t;
            }
        }
    }
    acc *= h * h;
    let mut source = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut w = h * h;
            if i == 0 || i == n - 1 {
                w *= 0.5;
            }
            if j == 0 || j == n - 1 {
                w *= 0.5;
            }
            source += w * f[i * n + j] * u[i * n + j];
        }
    }
    acc + source
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng, scale: f64) -> GridFunction {
    let vals: Vec<f64> = (0..grid.node_count()).map(|_| scale * (2.0 * unit(rng) - 1.0)).collect();
    GridFunction::new(grid.clone(), vals).unwrap()
}

#[test]
fn energy_matches_independent_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xabc1);
    let n = 5;
    let grid = Grid::unit(2, n).unwrap();
    let exp = Exponents::new(3.0, vec![0.5, 0.5]).unwrap();
    let u = random_field(&grid, &mut rng, 1.0);
    let f = random_field(&grid, &mut rng, 2.0);
    let spec = ProblemSpec::new(exp, grid.clone(), f.clone(), u.clone(), 0.01).unwrap();
    let lib = energy(&spec, &u).unwrap();
    let naive = naive_energy_2d(3.0, [0.5, 0.5], 0.01, n, u.values(), f.values());
    assert!(
        (lib - naive).abs() <= 1e-12 * naive.abs().max(1.0),
        "library {lib} vs naive {naive}"
    );
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xabc2);
    let n = 17;
    let grid = Grid::unit(2, n).unwrap();
    for (p, deltas) in [(2.0, [0.0, 0.0]), (3.0, [0.3, 0.6]), (4.0, [0.3, 0.6])] {
        for eps in [0.0, 0.05] {
            let exp = Exponents::new(p, deltas.to_vec()).unwrap();
            let u = random_field(&grid, &mut rng, 1.0);
            let f = random_field(&grid, &mut rng, 3.0);
            let spec = ProblemSpec::allow_degenerate(
                exp,
                grid.clone(),
                f.clone(),
                u.clone(),
                eps,
            )
            .unwrap();
            let g = energy_gradient(&spec, &u).unwrap();
            for _ in 0..20 {
                let idx = loop {
                    let i = (rng.next_u64() % grid.node_count() as u64) as usize;
                    if !grid.is_boundary(i) {
                        break i;
                    }
                };
                let h = 1e-6 * u.values()[idx].abs().max(1.0);
                let mut plus = u.values().to_vec();
                plus[idx] += h;
                let mut minus = u.values().to_vec();
                minus[idx] -= h;
                let ep = energy(&spec, &GridFunction::new(grid.clone(), plus).unwrap()).unwrap();
                let em = energy(&spec, &GridFunction::new(grid.clone(), minus).unwrap()).unwrap();
                let fd = (ep - em) / (2.0 * h);
                let an = g.values()[idx];
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                    "p={p} eps={eps} node={idx}: fd={fd:e} analytic={an:e}"
                );
            }
        }
    }
}

#[test]
fn gradient_vanishes_for_in_band_affine() {
    let grid = Grid::unit(2, 9).unwrap();
    let exp = Exponents::new(3.0, vec![0.5, 0.5]).unwrap();
    let affine = GridFunction::from_fn(grid.clone(), |x| 0.3 * x[0] + 0.2 * x[1]);
    let spec = ProblemSpec::allow_degenerate(
        exp,
        grid.clone(),
        GridFunction::zeros(grid),
        affine.clone(),
        0.0,
    )
    .unwrap();
    let g = energy_gradient(&spec, &affine).unwrap();
    assert_eq!(g.max_abs(), 0.0);
}

fn poisson_spec(n: usize) -> (ProblemSpec, GridFunction) {
    let grid = Grid::unit(2, n).unwrap();
    let pi = std::f64::consts::PI;
    let exact = GridFunction::from_fn(grid.clone(), |x| (pi * x[0]).sin() * (pi * x[1]).sin());
    let f = GridFunction::from_fn(grid.clone(), |x| {
        -2.0 * pi * pi * (pi * x[0]).sin() * (pi * x[1]).sin()
    });
    let spec = ProblemSpec::new(
        Exponents::new(2.0, vec![0.0, 0.0]).unwrap(),
        grid.clone(),
        f,
        GridFunction::zeros(grid),
        0.0,
    )
    .unwrap();
    (spec, exact)
}

fn poisson_l2_error(n: usize) -> f64 {
    let (spec, exact) = poisson_spec(n);
    let (u, _) = solve(&spec, 1e-9, 200_000).unwrap();
    let diff = u.zip_map(&exact, |a, b| a - b).unwrap();
    lp_norm(&diff, 2.0).unwrap()
}

#[test]
fn quadratic_limit_converges_at_second_order() {
    let e17 = poisson_l2_error(17);
    let e33 = poisson_l2_error(33);
    let ratio = e17 / e33;
    assert!(
        (3.2..=4.8).contains(&ratio),
        "error ratio {ratio} outside second-order window (e17={e17:e}, e33={e33:e})"
    );
}

#[test]
fn residual_grows_under_interior_perturbation() {
    let grid = Grid::unit(2, 17).unwrap();
    let pi = std::f64::consts::PI;
    let exp = Exponents::new(3.0, vec![0.5, 0.5]).unwrap();
    let f = GridFunction::from_fn(grid.clone(), |x| 4.0 * (pi * x[0]).sin() * (pi * x[1]).sin());
    let spec =
        ProblemSpec::new(exp, grid.clone(), f, GridFunction::zeros(grid.clone()), 0.05).unwrap();
    let tol = 1e-8;
    let (u, report) = solve(&spec, tol, 100_000).unwrap();
    let threshold = residual_threshold(&spec, tol);
    assert!(report.el_residual <= threshold);
    let bump = GridFunction::from_fn(grid.clone(), |x| {
        0.1 * (pi * x[0]).sin() * (pi * x[1]).sin()
    });
    let perturbed = u.zip_map(&bump, |a, b| a + b).unwrap();
    let res = el_residual(&spec, &perturbed).unwrap();
    assert!(res > 10.0 * threshold, "perturbed residual {res:e} vs threshold {threshold:e}");
}

#[test]
fn continuation_distances_shrink_on_quadratic_limit() {
    let (spec, _) = poisson_spec(17);
    let run = continuation_solve(&spec, &[1e-1, 1e-2, 1e-3, 1e-4], 1e-9, 200_000).unwrap();
    assert_eq!(run.solutions.len(), 4);
    for w in run.successive_lp.windows(2) {
        assert!(w[1] < w[0], "distances not strictly decreasing: {:?}", run.successive_lp);
    }
}

#[test]
fn degenerate_continuation_stays_in_band() {
    // zero source with in-band affine boundary data: every iterate is a
    // zero-energy minimizer and the gradient bound transfer holds trivially
    let grid = Grid::unit(2, 17).unwrap();
    let exp = Exponents::new(3.0, vec![0.5, 0.5]).unwrap();
    let affine = GridFunction::from_fn(grid.clone(), |x| 0.05 * x[0] + 0.04 * x[1]);
    let spec = ProblemSpec::new(
        exp.clone(),
        grid.clone(),
        GridFunction::zeros(grid.clone()),
        affine,
        1e-2,
    )
    .unwrap();
    let run = continuation_solve(&spec, &[1e-2, 1e-3, 1e-4], 1e-8, 100_000).unwrap();
    // the degenerate part of the energy vanishes on every iterate; only the
    // eps-quadratic term remains in the reported regularized energy
    let affine = GridFunction::from_fn(grid.clone(), |x| 0.05 * x[0] + 0.04 * x[1]);
    let flat = ProblemSpec::allow_degenerate(
        exp.clone(),
        grid.clone(),
        GridFunction::zeros(grid.clone()),
        affine,
        0.0,
    )
    .unwrap();
    for u in &run.solutions {
        let raw = energy(&flat, u).unwrap();
        assert!(raw <= 1e-8, "degenerate energy {raw:e} not negligible");
    }
    let reps = degenlab_core::estimates::propagation_check(
        &exp,
        &run.solutions[0],
        &run.solutions[2],
        4.0 / 16.0,
    )
    .unwrap();
    assert!(reps.iter().all(|r| r.pass));
}

#[test]
fn midpoint_energy_shows_strict_convexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xabc3);
    let grid = Grid::unit(2, 9).unwrap();
    let exp = Exponents::new(3.0, vec![0.5, 0.5]).unwrap();
    let eps = 0.05;
    let boundary = random_field(&grid, &mut rng, 0.5);
    let f = random_field(&grid, &mut rng, 1.0);
    let mut admissible = |rng: &mut ChaCha8Rng| {
        let mut vals: Vec<f64> =
            (0..grid.node_count()).map(|_| 2.0 * unit(rng) - 1.0).collect();
        for (idx, v) in vals.iter_mut().enumerate() {
            if grid.is_boundary(idx) {
                *v = boundary.values()[idx];
            }
        }
        GridFunction::new(grid.clone(), vals).unwrap()
    };
    for _ in 0..20 {
        let u = admissible(&mut rng);
        let v = admissible(&mut rng);
        let spec =
            ProblemSpec::new(exp.clone(), grid.clone(), f.clone(), boundary.clone(), eps).unwrap();
        let mid = u.zip_map(&v, |a, b| 0.5 * (a + b)).unwrap();
        let diff = u.zip_map(&v, |a, b| a - b).unwrap();
        let eu = energy(&spec, &u).unwrap();
        let ev = energy(&spec, &v).unwrap();
        let em = energy(&spec, &mid).unwrap();
        let quad = gradient_p_integral(&diff, 2.0);
        assert!(
            em <= 0.5 * (eu + ev) - eps / 8.0 * quad + 1e-12 * (1.0 + eu.abs() + ev.abs()),
            "midpoint energy not strictly below the chord"
        );
    }
}
