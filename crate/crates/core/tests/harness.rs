//! Estimate-harness checks: exponent identities, symmetry of the diagonal
//! estimate, the identity-residual consistency study for the
//! maximum-principle fields, and ladder norm convergence.

use degenlab_core::estimates::{
    bernstein_fields, default_bernstein_lambda, diagonal_caccioppoli_check, moser_ladder,
    weight_field,
};
use degenlab_core::grid::{
    cutoff_zeta, lp_norm_on_ball, sup_norm_on_ball, Grid, GridFunction,
};
use degenlab_core::scalar::Exponents;
use degenlab_core::troisi::ladder_exponents;

#[test]
fn canonical_ladder_exponent_identities_are_exact() {
    for p in [2.0, 2.5, 3.0, 4.0, 10.0] {
        let l = ladder_exponents(p).unwrap();
        assert!(
            (l.gain - p).abs() <= 1e-14 * p,
            "q/(2-q) = {} differs from p = {p}",
            l.gain
        );
        assert!(l.identity_residual <= 1e-14, "identity residual {:e}", l.identity_residual);
    }
}

#[test]
fn diagonal_check_is_symmetric_under_axis_swap() {
    let exp = Exponents::new(3.0, vec![0.5, 0.5]).unwrap();
    let grid = Grid::unit(2, 33).unwrap();
    // field and source symmetric under (x, y) -> (y, x)
    let u = GridFunction::from_fn(grid.clone(), |x| {
        ((3.0 * x[0]).sin() * (3.0 * x[1]).sin()) + 0.5 * (x[0] + x[1])
    });
    let f = GridFunction::from_fn(grid.clone(), |x| x[0] * x[1] + 1.0);
    let c = [0.5, 0.5];
    let a = diagonal_caccioppoli_check(&exp, 0.01, &u, &f, 0.0, &c, 0.12, 0.3, 0, 1e9).unwrap();
    let b = diagonal_caccioppoli_check(&exp, 0.01, &u, &f, 0.0, &c, 0.12, 0.3, 1, 1e9).unwrap();
    assert!(
        (a.ratio - b.ratio).abs() <= 1e-6 * a.ratio.abs().max(1e-30),
        "axis-swapped ratios differ: {} vs {}",
        a.ratio,
        b.ratio
    );
}

fn identity_residual_at(n: usize) -> f64 {
    let exp = Exponents::new(4.0, vec![1.0, 1.0]).unwrap();
    let eps = 1e-3;
    let grid = Grid::unit(2, n).unwrap();
    // quadratic test field with gradients crossing the degeneracy band
    let u = GridFunction::from_fn(grid.clone(), |x| {
        2.0 * x[0] * x[0] - 1.5 * x[0] * x[1] + x[1] * x[1] + 0.5 * x[0]
    });
    // the identity couples to the equation, so manufacture the source from
    // the field: f = sum_i g_eps_i''(u_{x_i}) u_{x_i x_i} at the nodes
    let h = 1.0 / (n - 1) as f64;
    let at = |i: usize, j: usize| u.values()[i * n + j];
    let mut f_vals = vec![0.0; n * n];
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let uxx = (at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)) / (h * h);
            let uyy = (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / (h * h);
            let ux = (at(i + 1, j) - at(i - 1, j)) / (2.0 * h);
            let uy = (at(i, j + 1) - at(i, j - 1)) / (2.0 * h);
            f_vals[i * n + j] = exp.g_eps_second(0, ux, eps).unwrap() * uxx
                + exp.g_eps_second(1, uy, eps).unwrap() * uyy;
        }
    }
    let f = GridFunction::new(grid.clone(), f_vals).unwrap();
    let (zeta, _) = cutoff_zeta(&grid, &[0.5, 0.5], 0.15, 0.4).unwrap();
    let lambda = default_bernstein_lambda(&exp, &f).unwrap();
    let fields = bernstein_fields(&exp, eps, &u, &f, &zeta, lambda).unwrap();
    fields.identity_residual
}

#[test]
fn identity_residual_shrinks_with_resolution() {
    let coarse = identity_residual_at(33);
    let fine = identity_residual_at(65);
    let ratio = coarse / fine;
    println!("identity residual: h=1/32 -> {coarse:e}, h=1/64 -> {fine:e}, ratio {ratio}");
    assert!(
        ratio >= 1.5,
        "identity residual did not shrink under refinement: {coarse:e} -> {fine:e}"
    );
}

#[test]
fn ladder_norms_increase_toward_the_sup_norm() {
    let exp = Exponents::new(2.0, vec![0.3, 0.3]).unwrap();
    let grid = Grid::unit(2, 65).unwrap();
    let u = GridFunction::from_fn(grid.clone(), |x| {
        (2.5 * x[0]).sin() * x[1] + 0.8 * x[0] * x[0]
    });
    let w = weight_field(&exp, &u, 0).unwrap();
    let c = [0.5, 0.5];
    let r = 0.2;
    let mut prev = 0.0;
    for k in 0..7 {
        let theta = (1u64 << k) as f64 * exp.p() / 2.0;
        let norm = lp_norm_on_ball(&w, &c, r, theta, true).unwrap();
        assert!(norm >= prev - 1e-12, "averaged ladder norm decreased at theta={theta}");
        prev = norm;
    }
    let sup = sup_norm_on_ball(&w, &c, r).unwrap();
    assert!(prev <= sup * (1.0 + 1e-12));
    assert!((sup - prev) / sup < 0.15, "highest ladder norm too far from sup");
}

#[test]
fn ladder_runs_and_reports_finite_constants() {
    let exp = Exponents::new(3.0, vec![0.5, 0.5]).unwrap();
    let grid = Grid::unit(2, 65).unwrap();
    let u = GridFunction::from_fn(grid.clone(), |x| {
        (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + x[0]
    });
    let f = GridFunction::from_fn(grid.clone(), |x| 2.0 * x[0] - x[1]);
    let ladder = moser_ladder(&exp, &u, &f, 1, &[0.5, 0.5], 0.1, 0.35, 4).unwrap();
    assert_eq!(ladder.levels.len(), 4);
    assert!(ladder.coefficient > 0.0);
    for (k, rung) in ladder.levels.iter().enumerate() {
        assert_eq!(rung.level, k + 1);
        assert!((rung.theta - (1u64 << k) as f64 * 3.0).abs() < 1e-12);
        assert!(rung.fitted_c.is_finite() && rung.fitted_c > 0.0);
        assert!(rung.norm_low.is_finite() && rung.norm_high.is_finite());
    }
    // radii shrink toward the inner radius
    for w in ladder.levels.windows(2) {
        assert!(w[1].radius < w[0].radius);
    }
}
