//! Bracketed root finding and scalar maximization (both Brent's methods).

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;

/// Finds a root of `g` in `[lo, hi]`, which must bracket a sign change.
///
/// Safeguarded inverse-quadratic / secant steps with bisection fallback.
/// Stops once the bracket is narrower than `tol` (plus a few ulps of the
/// iterate) or `g` hits zero exactly.
pub fn find_root_bracketed<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (g(a), g(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::NonConvergence("NaN at bracket endpoint".into()));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo, hi, g_lo: fa, g_hi: fb });
    }
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..MAX_ITER {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = g(b);
        if fb.is_nan() {
            return Err(Error::NonConvergence(format!("NaN at x = {b}")));
        }
    }
    Err(Error::NonConvergence("root finder exceeded iteration limit".into()))
}

/// Maximizes `f` on `[lo, hi]` (golden section with parabolic steps).
///
/// Assumes `f` is unimodal on the interval. Returns `(argmax, max)`.
pub fn maximize_scalar<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let neg = |x: f64| -f(x);
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = neg(x);
    if !fx.is_finite() {
        return Err(Error::NonConvergence(format!("non-finite objective at {x}")));
    }
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = tol * 0.5 + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, -fx));
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
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = neg(u);
        if fu.is_nan() {
            return Err(Error::NonConvergence(format!("NaN objective at {u}")));
        }
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
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
    Err(Error::NonConvergence("maximizer exceeded iteration limit".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root() {
        let r = find_root_bracketed(|x| x - 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_score_root() {
        let r = find_root_bracketed(|x| 1.0 / x - 2.0 / (1.0 + x), 0.1, 10.0, 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn intersection_equation_has_root_at_one() {
        // (x-1)^2 - 2x(log x + 1/x - 1) has a root of multiplicity three at
        // x = 1 and changes sign there.
        let g = |x: f64| (x - 1.0).powi(2) - 2.0 * x * (x.ln() + 1.0 / x - 1.0);
        assert!(g(0.5) * g(1.5) < 0.0);
        let r = find_root_bracketed(g, 0.5, 1.5, 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-4, "{r}");
    }

    #[test]
    fn bracket_error_when_signs_agree() {
        let r = find_root_bracketed(|x| x * x + 1.0, -1.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::Bracket { .. })));
    }

    #[test]
    fn maximize_quadratic() {
        let (x, fx) = maximize_scalar(|x| -(x - 2.0).powi(2), 0.0, 5.0, 1e-10).unwrap();
        assert!((x - 2.0).abs() < 1e-8);
        assert!(fx.abs() < 1e-14);
    }

    #[test]
    fn maximize_pair_loglik() {
        let ll = |psi: f64| psi.ln() - 2.0 * (1.0 + psi).ln();
        let (x, _) = maximize_scalar(ll, 0.01, 20.0, 1e-9).unwrap();
        assert!((x - 1.0).abs() < 1e-6);
        let (x2, _) = maximize_scalar(|p| 2.0 * ll(p) + 3.0, 0.01, 20.0, 1e-9).unwrap();
        assert!((x - x2).abs() < 1e-6);
    }
}
