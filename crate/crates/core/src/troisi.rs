//! Anisotropic Sobolev (Troisi) inequality in two dimensions,
//!
//! ```text
//!   T_q (int |u|^{4q/(2-q)})^{(2-q)/(2q)}  <=  ||u_x1||_{L^2} ||u_x2||_{L^q},
//! ```
//!
//! for compactly supported fields and `1 < q < 2`, together with the exponent
//! bookkeeping of the reverse Hoelder ladder and a deterministic generator of
//! compactly supported random test fields.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::estimates::EstimateReport;
use crate::grid::{lp_norm, partial, Grid, GridFunction};
use crate::math::{abs, exp, powf};
use crate::{Error, Result};

/// Exponent bookkeeping for one `q` in `(1, 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TroisiParams {
    pub q: f64,
    /// `4q / (2 + q)`, the harmonic-mean exponent of the derivative pair.
    pub q_bar: f64,
    /// `4q / (2 - q)`, the embedding exponent.
    pub q_bar_star: f64,
    /// The explicit constant `(2 - q)^2 / (4 q^2 - (2 - q)^2)`.
    pub constant: f64,
}

impl TroisiParams {
    pub fn new(q: f64) -> Result<Self> {
        Ok(TroisiParams {
            q,
            q_bar: 4.0 * q / (2.0 + q),
            q_bar_star: 4.0 * q / (2.0 - q),
            constant: troisi_constant(q)?,
        })
    }
}

/// `(2 - q)^2 / (4 q^2 - (2 - q)^2)` for `q` in `(1, 2)`; tends to zero as
/// `q` approaches 2.
pub fn troisi_constant(q: f64) -> Result<f64> {
    if !(q > 1.0 && q < 2.0) {
        return Err(Error::Argument("Troisi exponent must lie in (1, 2)"));
    }
    let r = 2.0 - q;
    Ok(r * r / (4.0 * q * q - r * r))
}

/// Verifies the discrete inequality for a compactly supported 2D field.
///
/// The field must vanish on a boundary collar at least two cells deep.
/// Passes when `lhs <= rhs * (1 + tol)`; the tolerance absorbs quadrature
/// error of the discrete functionals.
pub fn troisi_check(u: &GridFunction, q: f64, tol: f64) -> Result<EstimateReport> {
    let params = TroisiParams::new(q)?;
    let grid = u.grid();
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension { required: 2, got: grid.dim() });
    }
    for (idx, &v) in u.values().iter().enumerate() {
        if grid.boundary_depth(idx) <= 2 && v != 0.0 {
            return Err(Error::Precondition(
                "field must vanish on a two-cell boundary collar",
            ));
        }
    }
    // (int |u|^{q*})^{(2-q)/(2q)} equals ||u||_{q*}^2 since q* (2-q)/(2q) = 2
    let lhs = params.constant * powf(lp_norm(u, params.q_bar_star)?, 2.0);
    let d1 = partial(u, 0)?;
    let d2 = partial(u, 1)?;
    let rhs = lp_norm(&d1, 2.0)? * lp_norm(&d2, q)?;
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(EstimateReport {
        name: "troisi".into(),
        lhs,
        rhs_core: rhs,
        ratio,
        params: format!("q={q} tol={tol} nodes={}", grid.node_count()),
        pass: lhs <= rhs * (1.0 + tol),
    })
}

/// Ladder exponent choice `q = 2p/(p+1)` and its two identities.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderExponents {
    pub q: f64,
    /// `q / (2 - q)`; equals `p` for the canonical choice.
    pub gain: f64,
    /// `|2/q - 1/p - 1|`; zero at machine precision for the canonical choice.
    pub identity_residual: f64,
}

pub fn ladder_exponents(p: f64) -> Result<LadderExponents> {
    if !(p >= 2.0) {
        return Err(Error::Argument("ladder exponent requires p >= 2"));
    }
    let q = 2.0 * p / (p + 1.0);
    Ok(LadderExponents {
        q,
        gain: q / (2.0 - q),
        identity_residual: abs(2.0 / q - 1.0 / p - 1.0),
    })
}

/// Dimension bookkeeping for the iteration: in dimension `n` the embedding
/// exponents are `q_bar = 2nq/(2n+q-2)` and `q_bar_star = 2nq/(2n-q-2)`, and
/// the ladder gains an exponent factor exactly when `q_bar_star / 2 >
/// q/(2-q)`, equivalently `q < 2/(n-1)`. For `n >= 3` no admissible `q > 1`
/// satisfies this.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionReport {
    pub dim: usize,
    pub q: f64,
    pub q_bar: f64,
    pub q_bar_star: f64,
    /// True when the iteration's exponents actually grow.
    pub iteration_gains: bool,
}

pub fn dimension_obstruction(dim: usize, q: f64) -> Result<DimensionReport> {
    if dim < 2 {
        return Err(Error::Argument("dimension must be >= 2"));
    }
    if !(q > 1.0 && q < 2.0) {
        return Err(Error::Argument("exponent must lie in (1, 2)"));
    }
    let n = dim as f64;
    let q_bar = 2.0 * n * q / (2.0 * n + q - 2.0);
    let q_bar_star = 2.0 * n * q / (2.0 * n - q - 2.0);
    Ok(DimensionReport {
        dim,
        q,
        q_bar,
        q_bar_star,
        iteration_gains: q_bar_star / 2.0 > q / (2.0 - q),
    })
}

/// Deterministic sum of up to `max_bumps` anisotropically scaled smooth bumps
/// supported away from a boundary collar of `collar_cells` cells. Identical
/// `(grid, seed)` pairs produce identical fields.
pub fn random_compact_field(
    grid: &Grid,
    seed: u64,
    max_bumps: usize,
    collar_cells: usize,
) -> Result<GridFunction> {
    if max_bumps == 0 {
        return Err(Error::Argument("at least one bump is required"));
    }
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let bumps = 1 + (unit() * max_bumps as f64) as usize % max_bumps;
    let mut centers = Vec::with_capacity(bumps);
    let mut widths = Vec::with_capacity(bumps);
    let mut amps = Vec::with_capacity(bumps);
    for _ in 0..bumps {
        let mut c = vec![0.0; dim];
        let mut w = vec![0.0; dim];
        for k in 0..dim {
            let margin = (collar_cells + 1) as f64 * grid.spacing()[k];
            let free = grid.extent()[k] - 2.0 * margin;
            if free <= 0.0 {
                return Err(Error::Argument("grid too coarse for the requested collar"));
            }
            // anisotropic widths stress the mixed-norm structure
            let w_max = 0.45 * free;
            w[k] = w_max * (0.25 + 0.75 * unit());
            let lo = grid.origin()[k] + margin + w[k];
            let hi = grid.origin()[k] + grid.extent()[k] - margin - w[k];
            c[k] = lo + (hi - lo) * unit();
        }
        let sign = if unit() < 0.5 { -1.0 } else { 1.0 };
        amps.push(sign * (0.2 + 0.8 * unit()));
        centers.push(c);
        widths.push(w);
    }
    let mut field = GridFunction::from_fn(grid.clone(), |x| {
        let mut total = 0.0;
        for b in 0..bumps {
            let mut rho2 = 0.0;
            for k in 0..dim {
                let t = (x[k] - centers[b][k]) / widths[b][k];
                rho2 += t * t;
            }
            if rho2 < 1.0 {
                total += amps[b] * exp(-1.0 / (1.0 - rho2));
            }
        }
        total
    });
    // support is inside the collar by construction; make the collar exactly zero
    let g = field.grid().clone();
    for (idx, v) in field.values_mut().iter_mut().enumerate() {
        if g.boundary_depth(idx) <= collar_cells {
            *v = 0.0;
        }
    }
    Ok(field)
}
