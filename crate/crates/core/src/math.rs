// Float helpers for no_std builds.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn tgamma(x: f64) -> f64 {
    libm::tgamma(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// `x^e` for `x >= 0`, exact for the exponents the solver hits most.
#[inline]
pub(crate) fn pow_nonneg(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 0.5 {
        sqrt(x)
    } else if e == 1.5 {
        x * sqrt(x)
    } else if e == 3.0 {
        x * x * x
    } else {
        powf(x, e)
    }
}
