//! Fisher combination of uniform replicates and the resulting decisions.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::special::{chi2_cdf, chi2_sf};

/// Values are clamped into `[CLAMP, 1 - CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-15;

/// Replicate values built under one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct USample {
    values: Vec<f64>,
    psi_tag: f64,
}

impl USample {
    /// Validates that every value lies in `[0, 1]` and clamps it away from
    /// the endpoints.
    pub fn new(values: Vec<f64>, psi_tag: f64) -> Result<Self> {
        if values.is_empty() {
            return domain("a replicate sample needs at least one value");
        }
        let mut values = values;
        for (j, v) in values.iter_mut().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return domain(format!("replicate {j} is {v}, outside [0, 1]"));
            }
            *v = v.clamp(CLAMP, 1.0 - CLAMP);
        }
        Ok(Self { values, psi_tag })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn psi_tag(&self) -> f64 {
        self.psi_tag
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// The sample `1 - U_j`.
    pub fn complement(&self) -> USample {
        USample { values: self.values.iter().map(|u| 1.0 - u).collect(), psi_tag: self.psi_tag }
    }
}

/// Direction of sensitivity reported in the simulation tables.
///
/// `Left` targets departures of U towards 0 and uses `r_u = -2 Σ log U`;
/// `Right` targets departures towards 1 and uses `r_comp = -2 Σ log(1 - U)`.
/// Each is a two-sided chi-square(2m) test at level alpha, so a too-small
/// statistic (U concentrated away from the relevant end) also counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Left, Direction::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

/// Both Fisher statistics with their chi-square(2m) calibrations.
///
/// `reject_u` / `reject_comp` are the one-sided upper-tail decisions;
/// `reject_left` / `reject_right` are the two-sided decisions used for the
/// table directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssessmentResult {
    pub r_u: f64,
    pub r_comp: f64,
    pub p_right_u: f64,
    pub p_right_comp: f64,
    pub reject_u: bool,
    pub reject_comp: bool,
    pub p_two_u: f64,
    pub p_two_comp: f64,
    pub reject_left: bool,
    pub reject_right: bool,
    pub alpha: f64,
    pub m: usize,
}

impl AssessmentResult {
    /// Two-sided p-value for a table direction.
    pub fn p_value(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Left => self.p_two_u,
            Direction::Right => self.p_two_comp,
        }
    }

    pub fn rejects(&self, dir: Direction) -> bool {
        match dir {
            Direction::Left => self.reject_left,
            Direction::Right => self.reject_right,
        }
    }
}

/// `-2 Σ log u_j`.
pub fn fisher_statistic(u: &USample) -> Result<f64> {
    let mut r = 0.0;
    for &v in &u.values {
        if !(v > 0.0 && v < 1.0) {
            return domain(format!("replicate value {v} is not inside (0, 1)"));
        }
        r -= 2.0 * v.ln();
    }
    Ok(r)
}

/// `-2 Σ log(1 - u_j)`, evaluated as the statistic of the complement so the
/// two agree bitwise.
fn comp_statistic(u: &USample) -> Result<f64> {
    fisher_statistic(&u.complement())
}

/// Computes `r_u`, `r_comp` and their one- and two-sided p-values.
pub fn assess(u: &USample, alpha: f64) -> Result<AssessmentResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let df = 2.0 * u.m() as f64;
    let r_u = fisher_statistic(u)?;
    let r_comp = comp_statistic(u)?;
    let p_right_u = chi2_sf(r_u, df)?;
    let p_right_comp = chi2_sf(r_comp, df)?;
    let p_two_u = (2.0 * p_right_u.min(chi2_cdf(r_u, df)?)).min(1.0);
    let p_two_comp = (2.0 * p_right_comp.min(chi2_cdf(r_comp, df)?)).min(1.0);
    Ok(AssessmentResult {
        r_u,
        r_comp,
        p_right_u,
        p_right_comp,
        reject_u: p_right_u < alpha,
        reject_comp: p_right_comp < alpha,
        p_two_u,
        p_two_comp,
        reject_left: p_two_u < alpha,
        reject_right: p_two_comp < alpha,
        alpha,
        m: u.m(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet1D {
    pub grid: Vec<f64>,
    pub accepted: Vec<bool>,
    pub alpha: f64,
}

impl ConfidenceSet1D {
    /// An empty set signals that no parameter value is compatible with the
    /// model.
    pub fn is_empty(&self) -> bool {
        !self.accepted.iter().any(|&a| a)
    }

    pub fn accepted_values(&self) -> Vec<f64> {
        self.grid.iter().zip(&self.accepted).filter(|(_, &a)| a).map(|(g, _)| *g).collect()
    }
}

/// Keeps `psi0` when neither tail rejects at `alpha / 2`.
pub fn confidence_set_scan<B>(builder: B, grid: &[f64], alpha: f64) -> Result<ConfidenceSet1D>
where
    B: Fn(f64) -> Result<USample>,
{
    if grid.is_empty() {
        return domain("confidence-set grid is empty");
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("confidence-set grid must be strictly increasing");
    }
    let mut accepted = Vec::with_capacity(grid.len());
    for &psi0 in grid {
        let res = assess(&builder(psi0)?, alpha)?;
        accepted.push(res.p_right_u.min(res.p_right_comp) >= 0.5 * alpha);
    }
    Ok(ConfidenceSet1D { grid: grid.to_vec(), accepted, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn fisher_statistic_examples() {
        let e = (-1.0f64).exp();
        let u = USample::new(vec![e; 3], 1.0).unwrap();
        assert!((fisher_statistic(&u).unwrap() - 6.0).abs() < 1e-14);
        let u = USample::new(vec![0.5], 1.0).unwrap();
        assert!((fisher_statistic(&u).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        let u = USample::new(vec![0.1, 0.9], 1.0).unwrap();
        let want = -2.0 * (0.1f64.ln() + 0.9f64.ln());
        assert!((fisher_statistic(&u).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn assess_single_half() {
        let res = assess(&USample::new(vec![0.5], 0.0).unwrap(), 0.05).unwrap();
        assert!((res.p_right_u - 0.5).abs() < 1e-14);
        assert!((res.p_two_u - 1.0).abs() < 1e-14);
        assert!(!res.reject_u && !res.reject_comp);
        assert!(!res.rejects(Direction::Left) && !res.rejects(Direction::Right));
    }

    #[test]
    fn extreme_tail_rejects() {
        let res = assess(&USample::new(vec![0.001; 10], 0.0).unwrap(), 0.05).unwrap();
        assert!(res.p_right_u < 1e-12 && res.reject_u);
        assert!(res.rejects(Direction::Left));
        // values near 0 make 1 - U concentrate at 1: r_comp is too small
        assert!(res.rejects(Direction::Right) && !res.reject_comp);
    }

    #[test]
    fn complement_matches_comp_statistic() {
        let u = USample::new(vec![0.2, 0.7, 0.55], 0.0).unwrap();
        let res = assess(&u, 0.1).unwrap();
        assert_eq!(fisher_statistic(&u.complement()).unwrap(), res.r_comp);
    }

    #[test]
    fn rejects_out_of_range_and_empty() {
        assert!(USample::new(vec![], 0.0).is_err());
        assert!(USample::new(vec![1.2], 0.0).is_err());
        let u = USample::new(vec![0.0, 1.0], 0.0).unwrap();
        assert!(fisher_statistic(&u).unwrap().is_finite());
        assert!(assess(&u, 0.0).is_err());
    }

    #[test]
    fn null_rejection_rate() {
        let reps = 2000;
        let mut counts = [0u32; 4];
        for r in 0..reps {
            let mut s = RngStream::new(77, r);
            let u = USample::new((0..400).map(|_| s.uniform01()).collect(), 0.0).unwrap();
            let res = assess(&u, 0.05).unwrap();
            counts[0] += res.reject_u as u32;
            counts[1] += res.reject_comp as u32;
            counts[2] += res.reject_left as u32;
            counts[3] += res.reject_right as u32;
        }
        for c in counts {
            let rate = c as f64 / reps as f64;
            assert!((rate - 0.05).abs() < 0.02, "{rate}");
        }
    }

    #[test]
    fn uniform_builder_accepts_most_points() {
        let grid: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        let set = confidence_set_scan(
            |psi| {
                let mut s = RngStream::new(5, psi as u64);
                USample::new((0..50).map(|_| s.uniform01()).collect(), psi)
            },
            &grid,
            0.05,
        )
        .unwrap();
        let rate = set.accepted.iter().filter(|&&a| a).count() as f64 / grid.len() as f64;
        assert!(rate > 0.9, "{rate}");
        assert!(!set.is_empty());
        assert!(confidence_set_scan(|_| USample::new(vec![0.5], 0.0), &[2.0, 1.0], 0.05).is_err());
    }
}
