//! Thin wrappers over `libm` so the crate stays `no_std`.

#[inline(always)]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline(always)]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline(always)]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Positive part `max(x, 0)`.
#[inline(always)]
pub(crate) fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `r^e` with multiplication fast paths for the small integer exponents the
/// assembly loops hit; agrees with IEEE `pow` (in particular `0^0 = 1`).
#[inline(always)]
pub(crate) fn fastpow(r: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        r
    } else if e == 2.0 {
        r * r
    } else if e == 3.0 {
        r * r * r
    } else if e == 4.0 {
        let s = r * r;
        s * s
    } else {
        powf(r, e)
    }
}
