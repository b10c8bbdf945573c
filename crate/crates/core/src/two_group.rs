//! Stratified two-group comparisons with unequal stratum sizes.
//!
//! Stratum `j` holds `r1` treated and `r0` untreated units sharing a
//! nuisance level `γ_j`. The sufficient statistics are group means (normal)
//! or group totals (Poisson, gamma).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::special::{binomial_cdf, binomial_pmf, f_cdf, normal_cdf};
use crate::numerics::{find_root_bracketed, RngStream};
use crate::replication::{assess, AssessmentResult, USample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Poisson,
    Gamma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumData {
    pub s1: Vec<f64>,
    pub s0: Vec<f64>,
    pub r1: Vec<u32>,
    pub r0: Vec<u32>,
    pub family: Family,
}

impl StratumData {
    pub fn new(s1: Vec<f64>, s0: Vec<f64>, r1: Vec<u32>, r0: Vec<u32>, family: Family) -> Result<Self> {
        let m = s1.len();
        if m == 0 || s0.len() != m || r1.len() != m || r0.len() != m {
            return domain("stratum fields must be non-empty and of equal length");
        }
        if r1.iter().chain(&r0).any(|&r| r == 0) {
            return domain("stratum sizes must be positive");
        }
        for (j, (&a, &b)) in s1.iter().zip(&s0).enumerate() {
            let ok = match family {
                Family::Normal => a.is_finite() && b.is_finite(),
                Family::Poisson => a >= 0.0 && b >= 0.0 && a.fract() == 0.0 && b.fract() == 0.0,
                Family::Gamma => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            };
            if !ok {
                return domain(format!("stratum {j} has invalid {family:?} statistics ({a}, {b})"));
            }
        }
        Ok(Self { s1, s0, r1, r0, family })
    }

    pub fn m(&self) -> usize {
        self.s1.len()
    }

    fn require(&self, family: Family) -> Result<()> {
        if self.family != family {
            return domain(format!("expected {family:?} strata, got {:?}", self.family));
        }
        Ok(())
    }

    /// Exchanges the treated and untreated groups.
    pub fn swapped(&self) -> StratumData {
        StratumData {
            s1: self.s0.clone(),
            s0: self.s1.clone(),
            r1: self.r0.clone(),
            r0: self.r1.clone(),
            family: self.family,
        }
    }
}

fn inv_weight(r1: u32, r0: u32) -> f64 {
    1.0 / r1 as f64 + 1.0 / r0 as f64
}

/// `U_j = Φ((Z_j - ψ) / sqrt(τ (1/r1 + 1/r0)))` with `Z_j = S1 - S0`.
pub fn normal_u(strata: &StratumData, psi_hat: f64, tau_hat: f64) -> Result<USample> {
    strata.require(Family::Normal)?;
    if !(tau_hat > 0.0 && tau_hat.is_finite()) {
        return domain(format!("tau must be positive, got {tau_hat}"));
    }
    let u = (0..strata.m())
        .map(|j| {
            let z = strata.s1[j] - strata.s0[j];
            normal_cdf((z - psi_hat) / (tau_hat * inv_weight(strata.r1[j], strata.r0[j])).sqrt())
        })
        .collect();
    USample::new(u, psi_hat)
}

/// Weighted mean of the differences and the weighted residual variance
/// with an `m - 1` divisor.
pub fn normal_estimate(strata: &StratumData) -> Result<(f64, f64)> {
    strata.require(Family::Normal)?;
    let m = strata.m();
    if m < 2 {
        return domain("need at least two strata");
    }
    let w: Vec<f64> = (0..m).map(|j| 1.0 / inv_weight(strata.r1[j], strata.r0[j])).collect();
    let z: Vec<f64> = (0..m).map(|j| strata.s1[j] - strata.s0[j]).collect();
    let sw: f64 = w.iter().sum();
    let psi = w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / sw;
    let tau = w.iter().zip(&z).map(|(a, b)| a * (b - psi).powi(2)).sum::<f64>() / (m - 1) as f64;
    if !(tau > 0.0) {
        return Err(Error::Degenerate("all stratum differences are equal".into()));
    }
    Ok((psi, tau))
}

fn treated_share(r1: u32, r0: u32, psi: f64) -> f64 {
    let a = r1 as f64 * psi;
    a / (a + r0 as f64)
}

/// Randomized probability integral transform of `S1` under its conditional
/// binomial law given `n = S1 + S0`.
pub fn poisson_u(strata: &StratumData, psi0: f64, rng: &mut RngStream) -> Result<USample> {
    strata.require(Family::Poisson)?;
    if !(psi0 > 0.0 && psi0.is_finite()) {
        return domain(format!("psi0 must be positive, got {psi0}"));
    }
    let u = (0..strata.m())
        .map(|j| {
            let k = strata.s1[j] as u64;
            let n = k + strata.s0[j] as u64;
            let p = treated_share(strata.r1[j], strata.r0[j], psi0);
            let v = rng.uniform01();
            if n == 0 {
                return v;
            }
            (binomial_cdf(k as i64 - 1, n, p) + v * binomial_pmf(k, n, p)).clamp(0.0, 1.0)
        })
        .collect();
    USample::new(u, psi0)
}

/// Conditional binomial maximum likelihood estimate of `ψ`.
pub fn poisson_mle(strata: &StratumData) -> Result<f64> {
    strata.require(Family::Poisson)?;
    let total1: f64 = strata.s1.iter().sum();
    let total0: f64 = strata.s0.iter().sum();
    if total1 + total0 == 0.0 {
        return domain("no events in any stratum");
    }
    if total1 == 0.0 || total0 == 0.0 {
        return Err(Error::Degenerate(
            "estimate lies on the boundary: one group has no events".into(),
        ));
    }
    let score = |t: f64| {
        let psi = t.exp();
        (0..strata.m())
            .map(|j| {
                let n = strata.s1[j] + strata.s0[j];
                strata.s1[j] - n * treated_share(strata.r1[j], strata.r0[j], psi)
            })
            .sum::<f64>()
    };
    find_root_bracketed(score, -40.0, 40.0, 1e-12).map(f64::exp)
}

/// `U_j = F_{2r1, 2r0}(ψ0 r0 S1 / (r1 S0))`.
pub fn gamma_f_u(strata: &StratumData, psi0: f64) -> Result<USample> {
    strata.require(Family::Gamma)?;
    if !(psi0 > 0.0 && psi0.is_finite()) {
        return domain(format!("psi0 must be positive, got {psi0}"));
    }
    let mut u = Vec::with_capacity(strata.m());
    for j in 0..strata.m() {
        let (r1, r0) = (strata.r1[j] as f64, strata.r0[j] as f64);
        let x = psi0 * r0 * strata.s1[j] / (r1 * strata.s0[j]);
        u.push(f_cdf(x, 2.0 * r1, 2.0 * r0)?);
    }
    USample::new(u, psi0)
}

/// Maximizer of the F-density likelihood of `ψ W_j`.
///
/// In `t = log ψ` the score is `Σ [r1 - (r1 + r0) q_j]` with
/// `q_j = c ψ W_j / (1 + c ψ W_j)`, `c = r1/r0`; it is strictly decreasing.
pub fn gamma_mle(strata: &StratumData) -> Result<f64> {
    strata.require(Family::Gamma)?;
    let terms: Vec<(f64, f64, f64)> = (0..strata.m())
        .map(|j| {
            let (r1, r0) = (strata.r1[j] as f64, strata.r0[j] as f64);
            // log(c W) = log(S1 / S0)
            (r1, r0, strata.s1[j].ln() - strata.s0[j].ln())
        })
        .collect();
    let score = |t: f64| {
        terms
            .iter()
            .map(|&(r1, r0, lcw)| {
                let x = t + lcw;
                let q = if x >= 0.0 { 1.0 / (1.0 + (-x).exp()) } else { x.exp() / (1.0 + x.exp()) };
                r1 - (r1 + r0) * q
            })
            .sum::<f64>()
    };
    match find_root_bracketed(score, 1e-8f64.ln(), 1e8f64.ln(), 1e-12) {
        Ok(t) => Ok(t.exp()),
        Err(Error::Bracket { .. }) => Err(Error::NonConvergence("gamma score has no root on [1e-8, 1e8]".into())),
        Err(e) => Err(e),
    }
}

/// Plug-in assessment of stratified data under its family's model.
pub fn assess_strata(strata: &StratumData, alpha: f64, rng: &mut RngStream) -> Result<AssessmentResult> {
    let u = match strata.family {
        Family::Normal => {
            let (psi, tau) = normal_estimate(strata)?;
            normal_u(strata, psi, tau)?
        }
        Family::Poisson => poisson_u(strata, poisson_mle(strata)?, rng)?,
        Family::Gamma => gamma_f_u(strata, gamma_mle(strata)?)?,
    };
    assess(&u, alpha)
}

/// Simulation design for stratified data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumGenSpec {
    pub family: Family,
    /// Shift (normal) or rate ratio (Poisson, gamma).
    pub psi: f64,
    /// Unit-level variance for the normal family.
    #[serde(default = "one")]
    pub tau: f64,
    pub m: usize,
    #[serde(default = "one_u32")]
    pub r_min: u32,
    #[serde(default = "four_u32")]
    pub r_max: u32,
    #[serde(default = "half")]
    pub gamma_lo: f64,
    #[serde(default = "three_halves")]
    pub gamma_hi: f64,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn three_halves() -> f64 {
    1.5
}
fn one_u32() -> u32 {
    1
}
fn four_u32() -> u32 {
    4
}

/// Draws stratified data: normal means with stratum shift `γ_j`, Poisson
/// totals with rates `r γ_j (ψ)`, or gamma totals of `r` exponentials with
/// rates `γ_j (ψ)`.
pub fn gen_strata(spec: &StratumGenSpec, rng: &mut RngStream) -> Result<StratumData> {
    if spec.m == 0 || spec.r_min == 0 || spec.r_max < spec.r_min || !(spec.gamma_hi > spec.gamma_lo) {
        return Err(Error::InvalidSpec("invalid stratum design".into()));
    }
    if spec.family != Family::Normal && !(spec.psi > 0.0) {
        return Err(Error::InvalidSpec("rate ratio must be positive".into()));
    }
    let span = (spec.r_max - spec.r_min + 1) as usize;
    let (mut s1, mut s0, mut r1, mut r0) = (vec![], vec![], vec![], vec![]);
    for _ in 0..spec.m {
        let a = spec.r_min + rng.index(span) as u32;
        let b = spec.r_min + rng.index(span) as u32;
        let g = rng.uniform(spec.gamma_lo, spec.gamma_hi);
        let (x1, x0) = match spec.family {
            Family::Normal => (
                g + spec.psi + (spec.tau / a as f64).sqrt() * rng.std_normal(),
                g + (spec.tau / b as f64).sqrt() * rng.std_normal(),
            ),
            Family::Poisson => (
                rng.poisson(a as f64 * g * spec.psi) as f64,
                rng.poisson(b as f64 * g) as f64,
            ),
            Family::Gamma => (
                (0..a).map(|_| rng.unit_exponential()).sum::<f64>() / (g * spec.psi),
                (0..b).map(|_| rng.unit_exponential()).sum::<f64>() / g,
            ),
        };
        s1.push(x1);
        s0.push(x0);
        r1.push(a);
        r0.push(b);
    }
    StratumData::new(s1, s0, r1, r0, spec.family)
}
