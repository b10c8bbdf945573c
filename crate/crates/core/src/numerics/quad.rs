//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! All nodes are interior, so integrands with integrable endpoint
//! singularities (`ln u`, `F(u)/u` near zero) are never evaluated at the
//! endpoints. The interval with the largest error estimate is bisected until
//! the summed estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 20_000;

/// Tolerance and recursion cap for [`adaptive_quad`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, max_depth: u32) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return domain(format!("abs_tol must be positive, got {abs_tol}"));
        }
        if max_depth < 10 {
            return domain(format!("max_depth must be at least 10, got {max_depth}"));
        }
        Ok(Self { abs_tol, max_depth })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-10, max_depth: 60 }
    }
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    if !value.is_finite() || !err.is_finite() {
        return Err(Error::NonConvergence(format!(
            "non-finite integrand on [{lo}, {hi}]"
        )));
    }
    Ok((value, err))
}

/// Integrates `f` over `[lo, hi]` to within `spec.abs_tol`.
pub fn adaptive_quad<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: QuadratureSpec) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) {
        return domain("integration limits must be finite");
    }
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return adaptive_quad(f, hi, lo, spec).map(|v| -v);
    }
    let (value, err) = gk15(&f, lo, hi)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { lo, hi, value, err, depth: 0 });
    let mut total_err = err;
    // Guards against accumulated rounding when many segments are tiny.
    let floor = 50.0 * f64::EPSILON * value.abs();
    while total_err > spec.abs_tol.max(floor) {
        let worst = heap.pop().expect("heap is never empty");
        if worst.depth >= spec.max_depth || heap.len() >= MAX_INTERVALS {
            return Err(Error::NonConvergence(format!(
                "quadrature error {total_err:.3e} above tolerance {:.3e} at depth {}",
                spec.abs_tol, worst.depth
            )));
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let (lv, le) = gk15(&f, worst.lo, mid)?;
        let (rv, re) = gk15(&f, mid, worst.hi)?;
        total_err += le + re - worst.err;
        heap.push(Segment { lo: worst.lo, hi: mid, value: lv, err: le, depth: worst.depth + 1 });
        heap.push(Segment { lo: mid, hi: worst.hi, value: rv, err: re, depth: worst.depth + 1 });
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    fn spec(tol: f64) -> QuadratureSpec {
        QuadratureSpec::new(tol, 60).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(0.0, 20).is_err());
        assert!(QuadratureSpec::new(1e-8, 9).is_err());
    }

    #[test]
    fn polynomials_are_exact() {
        // GK15 integrates degree <= 22 exactly on a single panel
        for deg in 0..=20 {
            let v = adaptive_quad(|x| x.powi(deg), 0.0, 1.0, spec(1e-14)).unwrap();
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "deg {deg}");
        }
        let v = adaptive_quad(|u| u, 0.0, 1.0, spec(1e-12)).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_powers_give_factorials() {
        let fact = [1.0, 2.0, 6.0];
        for k in 1..=3 {
            let v = adaptive_quad(|u: f64| (-u.ln()).powi(k), 0.0, 1.0, spec(1e-9)).unwrap();
            assert!((v - fact[k as usize - 1]).abs() < 1e-8, "k = {k}: {v}");
        }
    }

    #[test]
    fn never_touches_endpoints() {
        let touched = Cell::new(false);
        let f = |u: f64| {
            if u == 0.0 || u == 1.0 {
                touched.set(true);
            }
            1.0 / u.sqrt()
        };
        let v = adaptive_quad(f, 0.0, 1.0, spec(1e-8)).unwrap();
        assert!(!touched.get());
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn reversed_limits_negate() {
        let a = adaptive_quad(|x: f64| x.sin(), 0.0, 2.0, spec(1e-12)).unwrap();
        let b = adaptive_quad(|x: f64| x.sin(), 2.0, 0.0, spec(1e-12)).unwrap();
        assert!((a + b).abs() < 1e-14);
        assert!((a - (1.0 - 2f64.cos())).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let r = adaptive_quad(|x: f64| 1.0 / x, 0.0, 1.0, QuadratureSpec::new(1e-8, 12).unwrap());
        assert!(matches!(r, Err(Error::NonConvergence(_))));
    }
}
