//! Scalar integrand kernels.
//!
//! For an exponent `p >= 2` and per-axis degeneracy thresholds `delta_i >= 0`
//! the one-dimensional integrand along axis `i` is
//!
//! ```text
//!   g_i(t) = (|t| - delta_i)_+^p / p,
//! ```
//!
//! which vanishes identically on the band `|t| <= delta_i`. The regularized
//! kernel adds a quadratic term, `g_{i,eps}(t) = g_i(t) + (eps/2) t^2`, which
//! restores uniform convexity for `eps > 0`. Everything here is a pure total
//! function of its arguments; no caching, safe to call concurrently.

use alloc::vec::Vec;

use crate::math::{abs, pos, powf};
use crate::{Error, Result};

/// Exponent `p` and degeneracy thresholds of the integrand family.
///
/// `delta_bar` is the aggregate threshold `1 + max_i delta_i`; it is the
/// parameter entering the weight fields and the growth bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Exponents {
    p: f64,
    deltas: Vec<f64>,
    delta_bar: f64,
}

impl Exponents {
    /// Validates `p >= 2`, `delta_i >= 0` and a nonempty threshold list.
    pub fn new(p: f64, deltas: Vec<f64>) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::Argument("exponent p must be finite and >= 2"));
        }
        if deltas.is_empty() {
            return Err(Error::Argument("at least one degeneracy threshold is required"));
        }
        let mut max_delta = 0.0f64;
        for &d in &deltas {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::Argument("degeneracy thresholds must be finite and >= 0"));
            }
            max_delta = max_delta.max(d);
        }
        Ok(Exponents { p, deltas, delta_bar: 1.0 + max_delta })
    }

    /// Same threshold on every one of `dim` axes.
    pub fn isotropic(p: f64, delta: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("dimension must be >= 1"));
        }
        Exponents::new(p, alloc::vec![delta; dim])
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Hoelder conjugate `p' = p / (p - 1)`.
    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Number of axes.
    pub fn dim(&self) -> usize {
        self.deltas.len()
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// `1 + max_i delta_i`.
    pub fn delta_bar(&self) -> f64 {
        self.delta_bar
    }

    pub fn delta(&self, axis: usize) -> Result<f64> {
        self.deltas
            .get(axis)
            .copied()
            .ok_or(Error::Argument("axis index out of range"))
    }

    fn check_axis(&self, axis: usize) -> Result<f64> {
        self.delta(axis)
    }

    /// `g_i(t) = (|t| - delta_i)_+^p / p`.
    pub fn g(&self, axis: usize, t: f64) -> Result<f64> {
        let d = self.check_axis(axis)?;
        Ok(g_raw(self.p, d, t))
    }

    /// `g_i'(t) = (|t| - delta_i)_+^{p-1} sign(t)`; zero at `t = 0`.
    pub fn g_prime(&self, axis: usize, t: f64) -> Result<f64> {
        let d = self.check_axis(axis)?;
        Ok(g_prime_raw(self.p, d, t))
    }

    /// `g_i''(t) = (p - 1) (|t| - delta_i)_+^{p-2}`.
    ///
    /// At the kink `|t| = delta_i` with `p = 2` this takes the
    /// right-continuous value `p - 1 = 1`; inside the band it is zero.
    pub fn g_second(&self, axis: usize, t: f64) -> Result<f64> {
        let d = self.check_axis(axis)?;
        Ok(g_second_raw(self.p, d, t))
    }

    /// `g_i'''(t) = (p - 1)(p - 2) (|t| - delta_i)_+^{p-3} sign(t)` (a.e.).
    pub fn g_third(&self, axis: usize, t: f64) -> Result<f64> {
        let d = self.check_axis(axis)?;
        Ok(g_third_raw(self.p, d, t))
    }

    /// Regularized kernel `g_{i,eps}(t) = g_i(t) + (eps/2) t^2`.
    pub fn g_eps(&self, axis: usize, t: f64, eps: f64) -> Result<f64> {
        let d = self.check_axis(axis)?;
        check_eps(eps)?;
        Ok(g_raw(self.p, d, t) + 0.5 * eps * t * t)
    }

    pub fn g_eps_prime(&self, axis: usize, t: f64, eps: f64) -> Result<f64> {
        let d = self.check_axis(axis)?;
        check_eps(eps)?;
        Ok(g_prime_raw(self.p, d, t) + eps * t)
    }

    /// `g_{i,eps}'' = g_i'' + eps >= eps` everywhere (for `p > 2`).
    pub fn g_eps_second(&self, axis: usize, t: f64, eps: f64) -> Result<f64> {
        let d = self.check_axis(axis)?;
        check_eps(eps)?;
        Ok(g_second_raw(self.p, d, t) + eps)
    }

    /// Third derivative of the regularized kernel; the quadratic term drops out.
    pub fn g_eps_third(&self, axis: usize, t: f64, eps: f64) -> Result<f64> {
        let d = self.check_axis(axis)?;
        check_eps(eps)?;
        Ok(g_third_raw(self.p, d, t))
    }

    /// Two-sided growth bound for the regularized kernel in the regime
    /// `0 <= eps <= 1`:
    ///
    /// ```text
    ///   (|t|^p / 2^{p-1} - delta_bar^p) / p  <=  g_{i,eps}(t)  <=  2 |t|^p / p + (p-2)/(2p)
    /// ```
    ///
    /// Returns `(lower, upper)`; the caller asserts the sandwich.
    pub fn growth_bounds(&self, axis: usize, t: f64, eps: f64) -> Result<(f64, f64)> {
        self.check_axis(axis)?;
        check_eps(eps)?;
        let p = self.p;
        let tp = powf(abs(t), p);
        let lower = (tp / powf(2.0, p - 1.0) - powf(self.delta_bar, p)) / p;
        let upper = 2.0 * tp / p + (p - 2.0) / (2.0 * p);
        Ok((lower, upper))
    }

    /// Pointwise lower bound for `g_i''` away from the band: for any
    /// `T >= delta_i` and `|t| >= T`,
    ///
    /// ```text
    ///   g_i''(t) >= (p-1) ((T - delta_i)/T)^{p-2} (T^2 + (|t| - T)_+^2)^{(p-2)/2}.
    /// ```
    pub fn second_derivative_lower_bound(&self, axis: usize, t: f64, threshold: f64) -> Result<f64> {
        let d = self.check_axis(axis)?;
        if !(threshold >= d) {
            return Err(Error::Precondition("threshold must satisfy T >= delta_i"));
        }
        if !(abs(t) >= threshold) {
            return Err(Error::Precondition("argument must satisfy |t| >= T"));
        }
        let p = self.p;
        let ratio = (threshold - d) / threshold;
        let shifted = pos(abs(t) - threshold);
        let core = threshold * threshold + shifted * shifted;
        Ok((p - 1.0) * powf(ratio, p - 2.0) * powf(core, 0.5 * (p - 2.0)))
    }

    /// Gap `|g_i(t1) - g_i(t2)|` together with the Lipschitz-type bound
    /// `(|t1|^{p-1} + |t2|^{p-1}) |t1 - t2|`; the gap never exceeds the bound.
    pub fn lipschitz_gap_bound(&self, axis: usize, t1: f64, t2: f64) -> Result<(f64, f64)> {
        let d = self.check_axis(axis)?;
        let p = self.p;
        let gap = abs(g_raw(p, d, t1) - g_raw(p, d, t2));
        let bound = (powf(abs(t1), p - 1.0) + powf(abs(t2), p - 1.0)) * abs(t1 - t2);
        Ok((gap, bound))
    }

    /// Convex combination check: returns
    /// `(g((1-s) t1 + s t2), (1-s) g(t1) + s g(t2), strict_expected)`.
    ///
    /// Strict inequality is expected exactly when `|t1 - t2| > 2 delta_i`,
    /// since the kernel is affine only on segments inside the band.
    pub fn strict_convexity_check(
        &self,
        axis: usize,
        t1: f64,
        t2: f64,
        s: f64,
    ) -> Result<(f64, f64, bool)> {
        let d = self.check_axis(axis)?;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Argument("interpolation parameter must lie in (0, 1)"));
        }
        let p = self.p;
        let lhs = g_raw(p, d, (1.0 - s) * t1 + s * t2);
        let rhs = (1.0 - s) * g_raw(p, d, t1) + s * g_raw(p, d, t2);
        Ok((lhs, rhs, abs(t1 - t2) > 2.0 * d))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Argument("regularization eps must be finite and >= 0"));
    }
    Ok(())
}

// Unchecked kernels for the assembly hot paths. `fastpow(0, 0) = 1` gives the
// right-continuous convention for g'' at the band edge when p = 2.

#[inline]
pub(crate) fn g_raw(p: f64, delta: f64, t: f64) -> f64 {
    let r = pos(abs(t) - delta);
    if r == 0.0 {
        0.0
    } else {
        crate::math::fastpow(r, p) / p
    }
}

#[inline]
pub(crate) fn g_prime_raw(p: f64, delta: f64, t: f64) -> f64 {
    let r = pos(abs(t) - delta);
    if r == 0.0 {
        0.0
    } else {
        crate::math::fastpow(r, p - 1.0) * sign(t)
    }
}

#[inline]
pub(crate) fn g_second_raw(p: f64, delta: f64, t: f64) -> f64 {
    if abs(t) < delta {
        0.0
    } else {
        (p - 1.0) * crate::math::fastpow(abs(t) - delta, p - 2.0)
    }
}

#[inline]
pub(crate) fn g_third_raw(p: f64, delta: f64, t: f64) -> f64 {
    if abs(t) < delta {
        0.0
    } else {
        (p - 1.0) * (p - 2.0) * crate::math::fastpow(abs(t) - delta, p - 3.0) * sign(t)
    }
}

#[inline]
fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}
