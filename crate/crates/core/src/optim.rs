//! One-dimensional root finding and minimization.

use crate::error::{Error, Result};

/// Brent's method for a root of `f` in `[a, b]`, given `f(a)` and `f(b)` of opposite sign.
///
/// Stops when the bracket is below `xtol_abs + xtol_rel·|x|`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn brent_root<F>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol_abs: f64,
    xtol_rel: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "root not bracketed: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * (xtol_abs + xtol_rel * b.abs());
        let half = 0.5 * (c - b);
        if half.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() < tol || fa.abs() <= fb.abs() {
            d = half;
            e = half;
        } else {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * half * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = half;
            }
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(half) };
        fb = f(b);
    }
    Err(Error::Numerical(format!(
        "root finder exceeded {max_iter} iterations near {b}"
    )))
}

/// Outcome of a bounded scalar minimization.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Minimum {
    pub x: f64,
    pub fx: f64,
    /// The refinement bracket shrank below tolerance.
    pub converged: bool,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Brent's minimizer on `[lo, hi]`: golden-section steps accelerated by
/// parabolic interpolation. Stops when the bracket is within
/// `2(√ε|x| + xtol/3)` of the current best point.
pub(crate) fn brent_min<F>(f: &mut F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut x = lo + GOLDEN * (hi - lo);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let tol1 = sqrt_eps * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (hi - lo) {
            return Minimum { x, fx, converged: true };
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (lo - x) && p < q * (hi - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < mid { hi - x } else { lo - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else if d > 0.0 { x + tol1 } else { x - tol1 };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum { x, fx, converged: false }
}

/// Global-ish minimization on `[lo, hi]`: scan `points` equally spaced
/// abscissae, then refine around the best one with [`brent_min`]. The endpoints
/// are always candidates, so boundary minima are returned exactly.
pub(crate) fn minimize_scan<F>(mut f: F, lo: f64, hi: f64, points: usize, xtol: f64) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(points >= 3 && hi > lo);
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let x = if i + 1 == points { hi } else { lo + step * i as f64 };
            (x, f(x))
        })
        .collect();
    let (best_i, &(gx, gf)) = grid
        .iter()
        .enumerate()
        .filter(|(_, (_, fx))| !fx.is_nan())
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("objective is NaN on the whole grid");
    let left = grid[best_i.saturating_sub(1)].0;
    let right = grid[(best_i + 1).min(points - 1)].0;
    let refined = brent_min(&mut f, left, right, xtol, 500);
    if refined.fx < gf {
        refined
    } else {
        Minimum {
            x: gx,
            fx: gf,
            converged: refined.converged,
        }
    }
}
