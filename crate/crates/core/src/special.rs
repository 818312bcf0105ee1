//! Scalar probability primitives: the standard normal, chi-square sampling and
//! the one-degree-of-freedom noncentral chi-square tail.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution};

use crate::error::{Error, Result};

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("{value} is not a probability")))
        }
    }

    /// Clamps round-off excursions (e.g. `1 + 1e-16`) back into `[0, 1]`.
    pub(crate) fn saturating(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        Probability(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Complementary error function (W. J. Cody's rational Chebyshev
/// approximations), relative error below 1e-15 over the whole line.
pub fn erfc(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e00,
        1.13864154151050156e02,
        3.77485237685302021e02,
        3.20937758913846947e03,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e01,
        2.44024637934444173e02,
        1.28261652607737228e03,
        2.84423683343917062e03,
    ];
    const C: [f64; 9] = [
        5.64188496988670089e-1,
        8.88314979438837594e00,
        6.61191906371416295e01,
        2.98635138197400131e02,
        8.81952221241769090e02,
        1.71204761263407058e03,
        2.05107837782607147e03,
        1.23033935479799725e03,
        2.15311535474403846e-8,
    ];
    const D: [f64; 8] = [
        1.57449261107098347e01,
        1.17693950891312499e02,
        5.37181101862009858e02,
        1.62138957456669019e03,
        3.29079923573345963e03,
        4.36261909014324716e03,
        3.43936767414372164e03,
        1.23033935480374942e03,
    ];
    const P: [f64; 6] = [
        3.05326634961232344e-1,
        3.60344899949804439e-1,
        1.25781726111229246e-1,
        1.60837851487422766e-2,
        6.58749161529837803e-4,
        1.63153871373020978e-2,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e00,
        1.87295284992346725e00,
        5.27905102951428412e-1,
        6.05183413124413191e-2,
        2.33520497626869185e-3,
    ];
    const FRAC_1_SQRT_PI: f64 = 5.641_895_835_477_562_869_5e-1;

    let y = x.abs();
    if y <= 0.46875 {
        let ysq = if y > f64::EPSILON / 2.0 { y * y } else { 0.0 };
        let mut num = A[4] * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + A[i]) * ysq;
            den = (den + B[i]) * ysq;
        }
        return 1.0 - x * (num + A[3]) / (den + B[3]);
    }
    let tail = if y <= 4.0 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        (num + C[7]) / (den + D[7])
    } else if y >= 26.543 {
        0.0
    } else {
        let ysq = 1.0 / (y * y);
        let mut num = P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + P[i]) * ysq;
            den = (den + Q[i]) * ysq;
        }
        (FRAC_1_SQRT_PI - ysq * (num + P[4]) / (den + Q[4])) / y
    };
    // exp(-y^2) split so the rounding of y^2 does not leak into the tail.
    let tail = if tail == 0.0 {
        0.0
    } else {
        let ysq = (y * 16.0).trunc() / 16.0;
        let del = (y - ysq) * (y + ysq);
        (-ysq * ysq).exp() * (-del).exp() * tail
    };
    if x < 0.0 {
        2.0 - tail
    } else {
        tail
    }
}

#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::domain(format!("normal CDF argument {x} is not finite")));
    }
    Ok(Probability::saturating(phi(x)))
}

/// Inverse of [`std_normal_cdf`] on the open interval `(0, 1)`.
///
/// Rational approximation (Acklam) polished with one Halley step against the
/// erfc-based CDF, which brings the result to full double precision.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    Ok(normal_quantile_unchecked(p))
}

pub(crate) fn normal_quantile_unchecked(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    };

    let x = if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    };

    // Halley refinement; in the upper tail work with the complement so the
    // residual is not swamped by cancellation.
    let e = if x > 0.0 {
        (1.0 - p) - phi(-x)
    } else {
        phi(x) - p
    };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// One draw from the chi-square distribution with `df` degrees of freedom.
pub fn chisq_sample<R: Rng + ?Sized>(df: f64, rng: &mut R) -> Result<f64> {
    Ok(chisq(df)?.sample(rng))
}

pub(crate) fn chisq(df: f64) -> Result<ChiSquared<f64>> {
    if !(df > 0.0 && df.is_finite()) {
        return Err(Error::domain(format!("chi-square degrees of freedom must be positive, got {df}")));
    }
    ChiSquared::new(df).map_err(|e| Error::domain(e.to_string()))
}

/// Survival function `P(W > x)` of `W = Z²`, `Z ~ N(√λ, 1)`: the noncentral
/// chi-square with one degree of freedom and noncentrality `λ`.
pub fn nc_chisq1_sf(x: f64, lambda: f64) -> Result<Probability> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("noncentrality must be finite and >= 0, got {lambda}")));
    }
    if x.is_nan() {
        return Err(Error::domain("noncentral chi-square argument is NaN"));
    }
    Ok(Probability::saturating(nc_chisq1_sf_unchecked(x, lambda)))
}

#[inline]
pub(crate) fn nc_chisq1_sf_unchecked(x: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let rx = x.sqrt();
    let rl = lambda.sqrt();
    phi(rl - rx) + phi(-rl - rx)
}
