//! Matched pairs with exponential (or Weibull) outcomes.
//!
//! Two postulated models are supported. Under the multiplicative model the
//! treated rate is `γ_j ψ`, the ratio `Z = Y1/Y0` has CDF `ψz/(1+ψz)` and
//! `U_j = ψ0 Z_j / (1 + ψ0 Z_j)`. Under the additive model the treated rate
//! is `γ_j + Δ`; conditioning on `S_j = Y1 + Y0` removes `γ_j` and gives
//! `U_j = (1 - e^{-Δ0 y1}) / (1 - e^{-Δ0 s})`.
//!
//! Weibull outcomes use survival `exp(-rate · t^ς)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::special::{ln_x_over_expm1, tilted_unit_mean};
use crate::numerics::{find_root_bracketed, RngStream};
use crate::replication::{assess, AssessmentResult, USample};

#[derive(Debug, Clone, PartialEq)]
pub struct PairData {
    y1: Vec<f64>,
    y0: Vec<f64>,
}

impl PairData {
    pub fn new(y1: Vec<f64>, y0: Vec<f64>) -> Result<Self> {
        if y1.len() != y0.len() {
            return domain(format!("pair columns differ in length: {} vs {}", y1.len(), y0.len()));
        }
        if y1.is_empty() {
            return domain("no pairs");
        }
        if let Some((j, _)) = y1.iter().zip(&y0).enumerate().find(|(_, (a, b))| !(**a > 0.0 && **b > 0.0)) {
            return domain(format!("pair {j} has a non-positive outcome"));
        }
        if y1.iter().chain(&y0).any(|v| !v.is_finite()) {
            return domain("pair outcomes must be finite");
        }
        Ok(Self { y1, y0 })
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn m(&self) -> usize {
        self.y1.len()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a / b).collect()
    }

    pub fn sums(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a + b).collect()
    }

    /// Exchanges treated and untreated outcomes.
    pub fn swapped(&self) -> PairData {
        PairData { y1: self.y0.clone(), y0: self.y1.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Effect {
    Multiplicative(f64),
    Additive(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum GammaSampler {
    Uniform { lo: f64, hi: f64 },
}

impl Default for GammaSampler {
    fn default() -> Self {
        GammaSampler::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl GammaSampler {
    fn draw(&self, rng: &mut RngStream) -> f64 {
        match *self {
            GammaSampler::Uniform { lo, hi } => rng.uniform(lo, hi),
        }
    }
}

/// How the rate enters the Weibull survival function.
///
/// `Rate`: `exp(-λ t^ς)`. `Scale`: `exp(-(λ t)^ς)`. They coincide at `ς = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeibullConvention {
    #[default]
    Rate,
    Scale,
}

impl WeibullConvention {
    pub fn draw(self, rng: &mut RngStream, rate: f64, shape: f64) -> f64 {
        match self {
            WeibullConvention::Rate => rng.weibull(rate, shape),
            WeibullConvention::Scale => rng.unit_exponential().powf(1.0 / shape) / rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGenSpec {
    pub effect: Effect,
    pub shape: f64,
    #[serde(default)]
    pub gamma: GammaSampler,
    pub m: usize,
    #[serde(default)]
    pub convention: WeibullConvention,
}

impl PairGenSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(Error::InvalidSpec(format!("Weibull shape must be positive, got {}", self.shape)));
        }
        if self.m == 0 {
            return Err(Error::InvalidSpec("m must be at least 1".into()));
        }
        if let Effect::Multiplicative(psi) = self.effect {
            if !(psi > 0.0) {
                return Err(Error::InvalidSpec(format!("multiplicative effect must be positive, got {psi}")));
            }
        }
        let GammaSampler::Uniform { lo, hi } = self.gamma;
        if !(lo >= 0.0 && hi > lo) {
            return Err(Error::InvalidSpec(format!("invalid baseline-rate range ({lo}, {hi})")));
        }
        Ok(())
    }
}

const MAX_REDRAWS: usize = 10_000;

/// Simulates `m` pairs from `spec`.
pub fn gen_pairs(spec: &PairGenSpec, rng: &mut RngStream) -> Result<PairData> {
    spec.validate()?;
    let mut y1 = Vec::with_capacity(spec.m);
    let mut y0 = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let (gamma, treated) = match spec.effect {
            Effect::Multiplicative(psi) => {
                let g = spec.gamma.draw(rng);
                (g, g * psi)
            }
            Effect::Additive(delta) => {
                let mut tries = 0;
                loop {
                    let g = spec.gamma.draw(rng);
                    if g + delta > 0.0 {
                        break (g, g + delta);
                    }
                    tries += 1;
                    if tries >= MAX_REDRAWS {
                        return Err(Error::InvalidSpec(format!(
                            "additive effect {delta} leaves the treated rate non-positive"
                        )));
                    }
                }
            }
        };
        y0.push(spec.convention.draw(rng, gamma, spec.shape));
        y1.push(spec.convention.draw(rng, treated, spec.shape));
    }
    PairData::new(y1, y0)
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `U_j = ψ0 Z_j / (1 + ψ0 Z_j)`.
pub fn mult_u(pairs: &PairData, psi0: f64) -> Result<USample> {
    if !(psi0 > 0.0 && psi0.is_finite()) {
        return domain(format!("psi0 must be positive, got {psi0}"));
    }
    let t = psi0.ln();
    let u = pairs.y1.iter().zip(&pairs.y0).map(|(a, b)| logistic(t + a.ln() - b.ln())).collect();
    USample::new(u, psi0)
}

/// Log-likelihood of the ratios, `Σ [log ψ - 2 log(1 + ψ Z_j)]`.
pub fn mult_loglik(pairs: &PairData, psi: f64) -> f64 {
    pairs.ratios().iter().map(|z| psi.ln() - 2.0 * (psi * z).ln_1p()).sum()
}

/// Asymptotic standard error of the ratio MLE from observed information.
pub fn mult_se(pairs: &PairData, psi: f64) -> f64 {
    let info: f64 = pairs.ratios().iter().map(|z| 1.0 / (psi * psi) - 2.0 * z * z / (1.0 + psi * z).powi(2)).sum();
    1.0 / info.sqrt()
}

/// Maximum likelihood estimate of `ψ` from the ratios.
///
/// In `t = log ψ` the score is `Σ (1 - 2 U_j(e^t))`, strictly decreasing.
pub fn mult_mle(pairs: &PairData) -> Result<f64> {
    let lz: Vec<f64> = pairs.y1.iter().zip(&pairs.y0).map(|(a, b)| a.ln() - b.ln()).collect();
    let score = |t: f64| lz.iter().map(|l| (-0.5 * (t + l)).tanh()).sum::<f64>();
    let (lo, hi) = (1e-8f64.ln(), 1e8f64.ln());
    match find_root_bracketed(score, lo, hi, 1e-12) {
        Ok(t) => Ok(t.exp()),
        Err(Error::Bracket { .. }) => {
            Err(Error::NonConvergence("ratio score has no sign change on [1e-8, 1e8]".into()))
        }
        Err(e) => Err(e),
    }
}

/// `U_j = (1 - e^{-Δ0 y1}) / (1 - e^{-Δ0 s})`, with limit `y1/s` at `Δ0 = 0`.
pub fn add_u(pairs: &PairData, delta0: f64) -> Result<USample> {
    if !delta0.is_finite() {
        return domain(format!("delta0 must be finite, got {delta0}"));
    }
    let u = pairs.y1.iter().zip(&pairs.y0).map(|(&y1, &y0)| add_u_one(y1, y0, delta0)).collect();
    USample::new(u, delta0)
}

fn add_u_one(y1: f64, y0: f64, delta: f64) -> f64 {
    let s = y1 + y0;
    if delta == 0.0 || (delta * s).abs() < 1e-300 {
        return y1 / s;
    }
    let v = if delta > 0.0 {
        (-delta * y1).exp_m1() / (-delta * s).exp_m1()
    } else {
        let a = -delta;
        (-a * y0).exp() * (-a * y1).exp_m1() / (-a * s).exp_m1()
    };
    v.clamp(0.0, 1.0)
}

/// Conditional log-likelihood of `Δ` given the pair sums.
pub fn add_loglik(pairs: &PairData, delta: f64) -> f64 {
    pairs
        .y1
        .iter()
        .zip(&pairs.y0)
        .map(|(&y1, &y0)| {
            let s = y1 + y0;
            -delta * y1 - s.ln() + ln_x_over_expm1(-delta * s)
        })
        .sum()
}

/// Derivative of [`add_loglik`]: `Σ [s_j E_Δ(Y1/s | s) - y1_j]`.
pub fn add_score(pairs: &PairData, delta: f64) -> f64 {
    pairs
        .y1
        .iter()
        .zip(&pairs.y0)
        .map(|(&y1, &y0)| {
            let s = y1 + y0;
            s * tilted_unit_mean(-delta * s) - y1
        })
        .sum()
}

/// Conditional maximum likelihood estimate of `Δ`.
pub fn add_mle(pairs: &PairData) -> Result<f64> {
    if pairs.m() < 2 {
        return domain("the additive estimate needs at least two pairs");
    }
    let sums = pairs.sums();
    let smax = sums.iter().cloned().fold(0.0, f64::max);
    let smin = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    // The score tends to Σ y0 > 0 as Δ -> -inf and to -Σ y1 < 0 as Δ -> inf,
    // so the starting bracket is widened until it holds a sign change.
    let (mut lo, mut hi) = (-50.0 / smax, 50.0 / smin);
    for _ in 0..200 {
        if add_score(pairs, lo) > 0.0 {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..200 {
        if add_score(pairs, hi) < 0.0 {
            break;
        }
        hi *= 2.0;
    }
    match find_root_bracketed(|d| add_score(pairs, d), lo, hi, 1e-12 / smax) {
        Ok(d) => Ok(d),
        Err(Error::Bracket { .. }) => Err(Error::NonConvergence(format!(
            "additive score has no root in [{lo:.4e}, {hi:.4e}]"
        ))),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairModel {
    Multiplicative,
    Additive,
}

/// Plug-in assessment: estimate the effect under `postulated`, build the
/// replicates at the estimate and combine them.
pub fn assess_pairs(pairs: &PairData, postulated: PairModel, alpha: f64) -> Result<AssessmentResult> {
    let u = match postulated {
        PairModel::Multiplicative => mult_u(pairs, mult_mle(pairs)?)?,
        PairModel::Additive => add_u(pairs, add_mle(pairs)?)?,
    };
    assess(&u, alpha)
}
