//! Discrete regularized energy with Dirichlet data, its first variation, and
//! a monotone Barzilai-Borwein descent, plus the continuation that drives the
//! regularization parameter to zero.
//!
//! The energy of a nodal field `u` is assembled per cell from the forward
//! difference gradients,
//!
//! ```text
//!   E(u) = sum_cells vol * sum_i g_{i,eps}(grad_i u)  +  sum_nodes w_trap f u,
//! ```
//!
//! which makes it a smooth convex function of the interior nodal values whose
//! first variation is a conservative-form stencil.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{cell_gradient_into, corner_offsets, for_each_cell, lp_norm, Grid, GridFunction};
use crate::math::abs;
use crate::scalar::{g_prime_raw, g_raw, g_second_raw, Exponents};
use crate::{Error, Result};

/// Full problem statement: integrand exponents, grid, source term, Dirichlet
/// data and the convexity regularization `eps`.
///
/// `eps = 0` is accepted only in the strictly convex corner case `p = 2`
/// with all thresholds zero, or behind [`ProblemSpec::allow_degenerate`]
/// since minimizers are not unique once the integrand has flat pieces.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    exponents: Exponents,
    grid: Grid,
    f: GridFunction,
    boundary: GridFunction,
    eps: f64,
    degenerate_opt_in: bool,
}

impl ProblemSpec {
    pub fn new(
        exponents: Exponents,
        grid: Grid,
        f: GridFunction,
        boundary: GridFunction,
        eps: f64,
    ) -> Result<Self> {
        Self::build(exponents, grid, f, boundary, eps, false)
    }

    /// Accepts `eps = 0` even for degenerate integrands; the caller takes
    /// responsibility for the non-strictly-convex solve.
    pub fn allow_degenerate(
        exponents: Exponents,
        grid: Grid,
        f: GridFunction,
        boundary: GridFunction,
        eps: f64,
    ) -> Result<Self> {
        Self::build(exponents, grid, f, boundary, eps, true)
    }

    fn build(
        exponents: Exponents,
        grid: Grid,
        f: GridFunction,
        boundary: GridFunction,
        eps: f64,
        degenerate_opt_in: bool,
    ) -> Result<Self> {
        if exponents.dim() != grid.dim() {
            return Err(Error::Argument("threshold count must match the grid dimension"));
        }
        if f.grid() != &grid {
            return Err(Error::GridMismatch("source term lives on a different grid"));
        }
        if boundary.grid() != &grid {
            return Err(Error::GridMismatch("boundary data lives on a different grid"));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::Argument("regularization eps must be finite and >= 0"));
        }
        if eps == 0.0 && !degenerate_opt_in {
            let strictly_convex_limit =
                exponents.p() == 2.0 && exponents.deltas().iter().all(|&d| d == 0.0);
            if !strictly_convex_limit {
                return Err(Error::Argument(
                    "eps = 0 with a degenerate integrand requires the explicit opt-in",
                ));
            }
        }
        Ok(ProblemSpec { exponents, grid, f, boundary, eps, degenerate_opt_in })
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exponents
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn f(&self) -> &GridFunction {
        &self.f
    }

    pub fn boundary(&self) -> &GridFunction {
        &self.boundary
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Same data at a different regularization.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::build(
            self.exponents.clone(),
            self.grid.clone(),
            self.f.clone(),
            self.boundary.clone(),
            eps,
            self.degenerate_opt_in,
        )
    }
}

/// Per-solve diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub eps: f64,
    pub iterations: usize,
    pub final_energy: f64,
    /// Sup-norm of the discrete weak-form residual at the returned iterate.
    pub el_residual: f64,
    /// Energy after every accepted step, starting from the initial iterate;
    /// nonincreasing by construction.
    pub energy_history: Vec<f64>,
    /// Wall-clock seconds; zero when the caller does not stamp it (the core
    /// crate carries no clock).
    pub wall_time: f64,
}

/// Result of an eps-continuation run.
#[derive(Debug, Clone)]
pub struct Continuation {
    pub solutions: Vec<GridFunction>,
    pub reports: Vec<SolveReport>,
    /// `||u_k - u_{k+1}||_{L^p}` for consecutive schedule entries.
    pub successive_lp: Vec<f64>,
}

fn check_field(spec: &ProblemSpec, u: &GridFunction) -> Result<()> {
    if u.grid() != spec.grid() {
        return Err(Error::GridMismatch("field lives on a different grid"));
    }
    let b = spec.boundary.values();
    for (idx, &v) in u.values().iter().enumerate() {
        if spec.grid.is_boundary(idx) && abs(v - b[idx]) > 1e-12 * (1.0 + abs(b[idx])) {
            return Err(Error::Precondition("field does not match the Dirichlet data"));
        }
    }
    Ok(())
}

/// Discrete regularized energy of `u`; `u` must carry the Dirichlet data.
pub fn energy(spec: &ProblemSpec, u: &GridFunction) -> Result<f64> {
    check_field(spec, u)?;
    let e = energy_unchecked(spec, u.values());
    if !e.is_finite() {
        return Err(Error::NonFinite { stage: "energy evaluation" });
    }
    Ok(e)
}

fn energy_unchecked(spec: &ProblemSpec, values: &[f64]) -> f64 {
    let grid = &spec.grid;
    let dim = grid.dim();
    let p = spec.exponents.p();
    let deltas = spec.exponents.deltas();
    let eps = spec.eps;
    let corners = corner_offsets(grid);
    let vol = grid.cell_volume();
    let mut gbuf = vec![0.0; dim];
    let mut acc = 0.0;
    for_each_cell(grid, |base| {
        cell_gradient_into(grid, values, base, &corners, &mut gbuf);
        for k in 0..dim {
            let t = gbuf[k];
            acc += g_raw(p, deltas[k], t) + 0.5 * eps * t * t;
        }
    });
    let mut source = 0.0;
    for (idx, &fv) in spec.f.values().iter().enumerate() {
        source += grid.trapezoid_weight(idx) * fv * values[idx];
    }
    acc * vol + source
}

/// Partial derivatives of the discrete energy with respect to the interior
/// nodal values; identically zero at boundary nodes.
pub fn energy_gradient(spec: &ProblemSpec, u: &GridFunction) -> Result<GridFunction> {
    check_field(spec, u)?;
    let mut out = vec![0.0; u.len()];
    energy_gradient_unchecked(spec, u.values(), &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { stage: "gradient evaluation" });
    }
    Ok(GridFunction::from_values_unchecked(spec.grid.clone(), out))
}

fn energy_gradient_unchecked(spec: &ProblemSpec, values: &[f64], out: &mut [f64]) {
    let grid = &spec.grid;
    let dim = grid.dim();
    let p = spec.exponents.p();
    let deltas = spec.exponents.deltas();
    let eps = spec.eps;
    let corners = corner_offsets(grid);
    let vol = grid.cell_volume();
    let edge_fraction = 1.0 / (1usize << (dim - 1)) as f64;
    out.fill(0.0);
    let mut gbuf = vec![0.0; dim];
    let mut coeff = vec![0.0; dim];
    for_each_cell(grid, |base| {
        cell_gradient_into(grid, values, base, &corners, &mut gbuf);
        for k in 0..dim {
            let t = gbuf[k];
            coeff[k] = (g_prime_raw(p, deltas[k], t) + eps * t) * vol * edge_fraction
                / grid.spacing()[k];
        }
        for (bits, &off) in corners.iter().enumerate() {
            let node = base + off;
            let mut d = 0.0;
            for k in 0..dim {
                if bits >> k & 1 == 1 {
                    d += coeff[k];
                } else {
                    d -= coeff[k];
                }
            }
            out[node] += d;
        }
    });
    for (idx, o) in out.iter_mut().enumerate() {
        if grid.is_boundary(idx) {
            *o = 0.0;
        } else {
            *o += grid.trapezoid_weight(idx) * spec.f.values()[idx];
        }
    }
}

/// Sup-norm of the discrete weak-form residual (the gradient sup-norm as a
/// diagnostic scalar).
pub fn el_residual(spec: &ProblemSpec, u: &GridFunction) -> Result<f64> {
    Ok(energy_gradient(spec, u)?.max_abs())
}

/// Residual threshold used by the solver: `tol * (1 + ||f||_inf) * cell
/// volume`, so the stopping rule is grid-size independent.
pub fn residual_threshold(spec: &ProblemSpec, tol: f64) -> f64 {
    tol * (1.0 + spec.f.max_abs()) * spec.grid.cell_volume()
}

/// Minimizes the discrete energy starting from the canonical initial guess
/// (the `p = 2`, threshold-free extension of the boundary data).
pub fn solve(spec: &ProblemSpec, tol: f64, max_iter: usize) -> Result<(GridFunction, SolveReport)> {
    let init = harmonic_extension(spec.grid(), spec.boundary())?;
    solve_from(spec, &init, tol, max_iter)
}

/// Minimizes the discrete energy from a caller-supplied initial iterate
/// (whose boundary values are overwritten by the Dirichlet data).
pub fn solve_from(
    spec: &ProblemSpec,
    init: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    if init.grid() != spec.grid() {
        return Err(Error::GridMismatch("initial iterate lives on a different grid"));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument("solver tolerance must be positive"));
    }
    let grid = &spec.grid;
    let n = grid.node_count();
    let mut u = init.values().to_vec();
    for idx in 0..n {
        if grid.is_boundary(idx) {
            u[idx] = spec.boundary.values()[idx];
        }
    }

    let threshold = residual_threshold(spec, tol);
    let mut energy_now = energy_unchecked(spec, &u);
    if !energy_now.is_finite() {
        return Err(Error::NonFinite { stage: "initial energy" });
    }
    let mut history = Vec::with_capacity(64);
    history.push(energy_now);

    let mut grad = vec![0.0; n];
    energy_gradient_unchecked(spec, &u, &mut grad);
    let mut residual = max_abs(&grad);

    // Jacobi-preconditioned descent: the Hessian diagonal contrasts by
    // orders of magnitude between degenerate cells (curvature ~ eps) and
    // active ones, and plain descent crawls on that stiffness.
    let mut precond = vec![1.0; n];
    hessian_diagonal(spec, &u, &mut precond);
    let mut dir = vec![0.0; n];

    let mut alpha = 0.25f64;
    let mut prev_step: Option<(Vec<f64>, Vec<f64>)> = None; // (s, y)
    let mut trial = vec![0.0; n];
    let mut iterations = 0usize;
    let mut best_residual = residual;
    let mut since_improvement = 0usize;

    while residual > threshold {
        if iterations >= max_iter {
            return Err(Error::Convergence {
                eps: spec.eps,
                report: SolveReport {
                    eps: spec.eps,
                    iterations,
                    final_energy: energy_now,
                    el_residual: residual,
                    energy_history: history,
                    wall_time: 0.0,
                },
            });
        }
        if iterations % 50 == 0 && iterations > 0 {
            hessian_diagonal(spec, &u, &mut precond);
        }
        for i in 0..n {
            dir[i] = grad[i] / precond[i];
        }
        // Barzilai-Borwein step in the preconditioned metric.
        if let Some((s, y)) = &prev_step {
            let mut sds = 0.0;
            let mut sy = 0.0;
            for i in 0..n {
                sds += s[i] * precond[i] * s[i];
                sy += s[i] * y[i];
            }
            if sy > 0.0 && sds > 0.0 {
                alpha = (sds / sy).clamp(1e-10, 1e10);
            }
        }
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if slope <= 0.0 {
            break;
        }
        let fp_noise = 4.0 * f64::EPSILON * (1.0 + abs(energy_now));
        let mut step = alpha;
        let mut accepted = false;
        let mut energy_new = energy_now;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = u[i] - step * dir[i];
            }
            energy_new = energy_unchecked(spec, &trial);
            // once the Armijo decrease stops being representable in f64,
            // accept anything that does not measurably increase the energy
            // so the residual can still be polished
            let quantum = 1e-4 * step * slope;
            let target = if quantum > fp_noise {
                energy_now - quantum
            } else {
                energy_now + fp_noise
            };
            if energy_new.is_finite() && energy_new <= target {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        let mut s = core::mem::take(&mut prev_step)
            .map(|(s, _)| s)
            .unwrap_or_else(|| vec![0.0; n]);
        for i in 0..n {
            s[i] = -step * dir[i];
        }
        core::mem::swap(&mut u, &mut trial);
        // measured energies jitter by a few ulps in the sub-noise regime;
        // report the running minimum so the recorded history is monotone
        energy_now = energy_now.min(energy_new);
        history.push(energy_now);
        let mut y = grad.clone();
        energy_gradient_unchecked(spec, &u, &mut grad);
        for i in 0..n {
            y[i] = grad[i] - y[i];
        }
        prev_step = Some((s, y));
        residual = max_abs(&grad);
        alpha = step;
        iterations += 1;
        if residual < (1.0 - 1e-4) * best_residual {
            best_residual = residual;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement > 2000 {
                break;
            }
        }
    }

    let report = SolveReport {
        eps: spec.eps,
        iterations,
        final_energy: energy_now,
        el_residual: residual,
        energy_history: history,
        wall_time: 0.0,
    };
    if residual > threshold {
        return Err(Error::Convergence { eps: spec.eps, report });
    }
    Ok((GridFunction::from_values_unchecked(grid.clone(), u), report))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(abs(x)))
}

/// Diagonal of the energy Hessian at `values`; boundary rows get 1 and a
/// relative floor keeps the preconditioner invertible on fully degenerate
/// regions.
fn hessian_diagonal(spec: &ProblemSpec, values: &[f64], out: &mut [f64]) {
    let grid = &spec.grid;
    let dim = grid.dim();
    let p = spec.exponents.p();
    let deltas = spec.exponents.deltas();
    let corners = corner_offsets(grid);
    let vol = grid.cell_volume();
    let edge_fraction = 1.0 / (1usize << (dim - 1)) as f64;
    out.fill(0.0);
    let mut gbuf = vec![0.0; dim];
    for_each_cell(grid, |base| {
        cell_gradient_into(grid, values, base, &corners, &mut gbuf);
        let mut total = 0.0;
        for k in 0..dim {
            let c2 = g_second_raw(p, deltas[k], gbuf[k]) + spec.eps;
            let w = edge_fraction / grid.spacing()[k];
            total += c2 * vol * w * w;
        }
        for &off in &corners {
            out[base + off] += total;
        }
    });
    let max = out.iter().fold(0.0f64, |m, &v| m.max(v));
    let floor = if max > 0.0 { 1e-10 * max } else { 1.0 };
    for (idx, o) in out.iter_mut().enumerate() {
        if grid.is_boundary(idx) {
            *o = 1.0;
        } else if !(*o > floor) {
            *o = floor;
        }
    }
}

/// Extension of the Dirichlet data by the minimizer of the quadratic
/// (`p = 2`, zero thresholds, zero source) energy; the deterministic initial
/// guess used by [`solve`] and [`continuation_solve`].
pub fn harmonic_extension(grid: &Grid, boundary: &GridFunction) -> Result<GridFunction> {
    if boundary.grid() != grid {
        return Err(Error::GridMismatch("boundary data lives on a different grid"));
    }
    let spec = ProblemSpec::new(
        Exponents::isotropic(2.0, 0.0, grid.dim())?,
        grid.clone(),
        GridFunction::zeros(grid.clone()),
        boundary.clone(),
        0.0,
    )?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for idx in 0..grid.node_count() {
        if grid.is_boundary(idx) {
            sum += boundary.values()[idx];
            count += 1;
        }
    }
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    let init = GridFunction::from_values_unchecked(grid.clone(), vec![mean; grid.node_count()]);
    let (u, _) = solve_from(&spec, &init, 3e-5, 100_000)?;
    Ok(u)
}

/// Solves once per schedule entry, warm-starting each solve from the previous
/// solution; the final iterate approximates a minimizer of the unregularized
/// functional. Errors are annotated with the failing `eps`.
pub fn continuation_solve(
    spec: &ProblemSpec,
    eps_schedule: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Continuation> {
    if eps_schedule.is_empty() {
        return Err(Error::Argument("eps schedule must be nonempty"));
    }
    for w in eps_schedule.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Argument("eps schedule must be strictly decreasing"));
        }
    }
    if !(eps_schedule[eps_schedule.len() - 1] > 0.0) {
        return Err(Error::Argument("eps schedule entries must be positive"));
    }
    let p = spec.exponents().p();
    let mut solutions = Vec::with_capacity(eps_schedule.len());
    let mut reports = Vec::with_capacity(eps_schedule.len());
    let mut current = harmonic_extension(spec.grid(), spec.boundary())?;
    for &eps in eps_schedule {
        let stage = spec.with_eps(eps)?;
        let (u, report) = solve_from(&stage, &current, tol, max_iter)?;
        current = u.clone();
        solutions.push(u);
        reports.push(report);
    }
    let mut successive_lp = Vec::new();
    for w in solutions.windows(2) {
        let diff = w[0].zip_map(&w[1], |a, b| a - b)?;
        successive_lp.push(lp_norm(&diff, p)?);
    }
    Ok(Continuation { solutions, reports, successive_lp })
}

/// `int |grad u|^p dx` assembled from the per-cell forward-difference
/// gradients; the quantity whose boundedness along a schedule the energy
/// audit checks.
pub fn gradient_p_integral(u: &GridFunction, p: f64) -> f64 {
    let grid = u.grid();
    let dim = grid.dim();
    let corners = corner_offsets(grid);
    let vol = grid.cell_volume();
    let mut gbuf = vec![0.0; dim];
    let mut acc = 0.0;
    for_each_cell(grid, |base| {
        cell_gradient_into(grid, u.values(), base, &corners, &mut gbuf);
        let norm2: f64 = gbuf.iter().map(|g| g * g).sum();
        acc += crate::math::powf(norm2, 0.5 * p);
    });
    acc * vol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn affine_in_band_spec() -> (ProblemSpec, GridFunction) {
        let grid = Grid::unit(2, 9).unwrap();
        let exps = Exponents::new(3.0, vec![0.5, 0.5].into()).unwrap();
        let field = GridFunction::from_fn(grid.clone(), |x| 0.3 * x[0] + 0.2 * x[1]);
        let spec = ProblemSpec::allow_degenerate(
            exps,
            grid.clone(),
            GridFunction::zeros(grid.clone()),
            field.clone(),
            0.0,
        )
        .unwrap();
        (spec, field)
    }

    #[test]
    fn in_band_affine_has_zero_energy_and_residual() {
        let (spec, field) = affine_in_band_spec();
        assert_eq!(energy(&spec, &field).unwrap(), 0.0);
        assert_eq!(el_residual(&spec, &field).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_case_matches_dirichlet_energy() {
        let grid = Grid::unit(2, 7).unwrap();
        let exps = Exponents::new(2.0, vec![0.0, 0.0].into()).unwrap();
        let u = GridFunction::from_fn(grid.clone(), |x| x[0] * x[0] - 0.3 * x[1]);
        let spec = ProblemSpec::new(
            exps,
            grid.clone(),
            GridFunction::zeros(grid.clone()),
            u.clone(),
            0.0,
        )
        .unwrap();
        let e = energy(&spec, &u).unwrap();
        // direct half-sum of squared cell gradients
        let mut direct = 0.0;
        let corners = corner_offsets(&grid);
        let mut gbuf = vec![0.0; 2];
        for_each_cell(&grid, |base| {
            cell_gradient_into(&grid, u.values(), base, &corners, &mut gbuf);
            direct += 0.5 * (gbuf[0] * gbuf[0] + gbuf[1] * gbuf[1]);
        });
        direct *= grid.cell_volume();
        assert!((e - direct).abs() < 1e-14);
    }

    #[test]
    fn eps_zero_requires_opt_in_for_degenerate_data() {
        let grid = Grid::unit(2, 5).unwrap();
        let exps = Exponents::new(3.0, vec![0.5, 0.5].into()).unwrap();
        let z = GridFunction::zeros(grid.clone());
        assert!(ProblemSpec::new(exps.clone(), grid.clone(), z.clone(), z.clone(), 0.0).is_err());
        assert!(ProblemSpec::allow_degenerate(exps, grid, z.clone(), z, 0.0).is_ok());
    }

    #[test]
    fn boundary_mismatch_is_rejected() {
        let (spec, field) = affine_in_band_spec();
        let off = field.map(|v| v + 1.0);
        assert!(matches!(energy(&spec, &off), Err(Error::Precondition(_))));
    }

    #[test]
    fn solve_recovers_in_band_affine() {
        let grid = Grid::unit(2, 9).unwrap();
        let exps = Exponents::new(3.0, vec![0.5, 0.5].into()).unwrap();
        // slopes well inside the band; the eps-term of the exact affine
        // minimizer is (eps/2)(a^2 + b^2) = 2.5e-9
        let affine = GridFunction::from_fn(grid.clone(), |x| 0.05 * x[0] + 0.05 * x[1]);
        let spec = ProblemSpec::new(
            exps,
            grid.clone(),
            GridFunction::zeros(grid.clone()),
            affine.clone(),
            1e-6,
        )
        .unwrap();
        let (u, report) = solve(&spec, 1e-8, 50_000).unwrap();
        assert!(report.final_energy <= 1e-8);
        for (a, b) in u.values().iter().zip(affine.values()) {
            assert!((a - b).abs() < 1e-3);
        }
        for w in report.energy_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn single_entry_continuation_matches_solve() {
        let grid = Grid::unit(2, 9).unwrap();
        let exps = Exponents::new(3.0, vec![0.5, 0.5].into()).unwrap();
        let f = GridFunction::from_fn(grid.clone(), |x| x[0] - x[1]);
        let b = GridFunction::zeros(grid.clone());
        let spec = ProblemSpec::new(exps, grid, f, b, 0.05).unwrap();
        let run = continuation_solve(&spec, &[0.05], 1e-8, 50_000).unwrap();
        let (u, _) = solve(&spec, 1e-8, 50_000).unwrap();
        assert_eq!(run.solutions.len(), 1);
        assert!(run.successive_lp.is_empty());
        for (a, b) in run.solutions[0].values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn schedule_must_strictly_decrease() {
        let (spec, _) = affine_in_band_spec();
        assert!(continuation_solve(&spec, &[1e-2, 1e-2], 1e-8, 1000).is_err());
        assert!(continuation_solve(&spec, &[], 1e-8, 1000).is_err());
    }
}
