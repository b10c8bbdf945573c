//! Log-linear Poisson processes `λ_i(t) = exp(γ_i + β t)` on `(0, t0]`.
//!
//! Given the count `m_i`, the event times are iid with density
//! `β e^{βt} / (e^{βt0} - 1)`, which removes `γ_i`. The assessment uses the
//! conditional law of their sum `S_i`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::special::{
    ln_choose, ln_gamma_pos, ln_reg_lower_gamma, ln_x_over_expm1, normal_cdf, tilted_unit_mean,
    tilted_unit_var,
};
use crate::numerics::{find_root_bracketed, RngStream};
use crate::replication::{assess, AssessmentResult, USample};

/// Condition number beyond which the alternating sum is not trusted.
pub const MAX_CONDITION: f64 = 1e12;

/// Largest expected count a simulator will accept for one individual.
const MAX_EXPECTED_EVENTS: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct EventHistory {
    times: Vec<f64>,
    t0: f64,
}

impl EventHistory {
    pub fn new(times: Vec<f64>, t0: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return domain(format!("window end must be positive, got {t0}"));
        }
        if let Some(t) = times.iter().find(|t| !(**t > 0.0 && **t <= t0)) {
            return domain(format!("event time {t} lies outside (0, {t0}]"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("event times must be strictly increasing");
        }
        Ok(Self { times, t0 })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn m(&self) -> usize {
        self.times.len()
    }

    pub fn sum(&self) -> f64 {
        self.times.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortData {
    histories: Vec<EventHistory>,
    t0: f64,
}

impl CohortData {
    pub fn new(histories: Vec<EventHistory>) -> Result<Self> {
        let Some(first) = histories.first() else {
            return domain("a cohort needs at least one individual");
        };
        let t0 = first.t0;
        if histories.iter().any(|h| h.t0 != t0) {
            return domain("all histories must share the same window end");
        }
        Ok(Self { histories, t0 })
    }

    pub fn histories(&self) -> &[EventHistory] {
        &self.histories
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn n(&self) -> usize {
        self.histories.len()
    }

    pub fn total_events(&self) -> usize {
        self.histories.iter().map(EventHistory::m).sum()
    }

    fn total_time(&self) -> f64 {
        self.histories.iter().map(EventHistory::sum).sum()
    }
}

fn check_window(t0: f64) -> Result<()> {
    if t0 > 0.0 && t0.is_finite() {
        Ok(())
    } else {
        domain(format!("window end must be positive, got {t0}"))
    }
}

/// Simulates one individual by inverting the integrated intensity at
/// cumulative sums of unit exponentials.
pub fn simulate_loglinear(gamma: f64, beta: f64, t0: f64, rng: &mut RngStream) -> Result<EventHistory> {
    check_window(t0)?;
    let scale = (-gamma).exp();
    let tau_end = if beta == 0.0 { t0 / scale } else { (beta * t0).exp_m1() / beta / scale };
    if !(tau_end <= MAX_EXPECTED_EVENTS) {
        return Err(Error::InvalidSpec(format!("expected count {tau_end:.3e} is too large")));
    }
    let mut times = Vec::new();
    let mut acc = rng.unit_exponential();
    while acc < tau_end {
        let t = if beta == 0.0 { scale * acc } else { (beta * scale * acc).ln_1p() / beta };
        times.push(t.min(t0));
        acc += rng.unit_exponential();
    }
    Ok(EventHistory { times, t0 })
}

/// Simulates from the power-law intensity `exp(γ) t^ρ`.
pub fn simulate_powerlaw(gamma: f64, rho: f64, t0: f64, rng: &mut RngStream) -> Result<EventHistory> {
    check_window(t0)?;
    if !(rho > -1.0) {
        return domain(format!("power-law exponent must exceed -1, got {rho}"));
    }
    let k = rho + 1.0;
    let tau_end = gamma.exp() * t0.powf(k) / k;
    if !(tau_end <= MAX_EXPECTED_EVENTS) {
        return Err(Error::InvalidSpec(format!("expected count {tau_end:.3e} is too large")));
    }
    let mut times = Vec::new();
    let mut acc = rng.unit_exponential();
    while acc < tau_end {
        times.push((k * acc * (-gamma).exp()).powf(1.0 / k).min(t0));
        acc += rng.unit_exponential();
    }
    Ok(EventHistory { times, t0 })
}

/// Conditional distribution function of one event time given the count.
pub fn event_cdf(t: f64, beta: f64, t0: f64) -> Result<f64> {
    check_window(t0)?;
    if !(0.0..=t0).contains(&t) {
        return domain(format!("t = {t} lies outside [0, {t0}]"));
    }
    if beta == 0.0 {
        return Ok(t / t0);
    }
    let b = beta * t0;
    if b > 1.0 {
        // e^{-β(t0 - t)} (1 - e^{-βt}) / (1 - e^{-βt0}) avoids overflow
        return Ok((-beta * (t0 - t)).exp() * (-(-beta * t).exp_m1()) / (-(-b).exp_m1()));
    }
    Ok(((beta * t).exp_m1() / b.exp_m1()).clamp(0.0, 1.0))
}

/// Inverse of [`event_cdf`].
pub fn event_quantile(u: f64, beta: f64, t0: f64) -> f64 {
    if beta == 0.0 {
        return u * t0;
    }
    let b = beta * t0;
    let t = if b > 1.0 {
        t0 + (u + (1.0 - u) * (-b).exp()).ln() / beta
    } else {
        (u * b.exp_m1()).ln_1p() / beta
    };
    t.clamp(0.0, t0)
}

/// Mean of one conditional event time.
pub fn event_mean(beta: f64, t0: f64) -> f64 {
    t0 * tilted_unit_mean(beta * t0)
}

/// Variance of one conditional event time.
pub fn event_var(beta: f64, t0: f64) -> f64 {
    t0 * t0 * tilted_unit_var(beta * t0)
}

/// Conditional log-likelihood of β.
pub fn cond_loglik(cohort: &CohortData, beta: f64) -> f64 {
    let t0 = cohort.t0;
    // log(β / (e^{βt0} - 1)) = -log t0 + log(b / expm1(b))
    let per_event = ln_x_over_expm1(beta * t0) - t0.ln();
    cohort.total_events() as f64 * per_event + beta * cohort.total_time()
}

/// Derivative of [`cond_loglik`] in β.
pub fn cond_score(cohort: &CohortData, beta: f64) -> f64 {
    cohort.total_time() - cohort.total_events() as f64 * event_mean(beta, cohort.t0)
}

/// Maximizes the conditional likelihood by matching the mean event time.
pub fn cond_mle(cohort: &CohortData) -> Result<f64> {
    let m = cohort.total_events();
    if m == 0 {
        return Err(Error::Degenerate("no events in the cohort".into()));
    }
    let t0 = cohort.t0;
    let r = cohort.total_time() / m as f64 / t0;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Degenerate(format!("mean event time fraction {r} is on the boundary")));
    }
    let h = |b: f64| tilted_unit_mean(b) - r;
    let mut width = 1.0;
    while !(h(-width) <= 0.0 && h(width) >= 0.0) {
        width *= 2.0;
        if width > 1e7 {
            return Err(Error::Separation(width / t0));
        }
    }
    let b = find_root_bracketed(h, -width, width, 1e-14)?;
    Ok(b / t0)
}

/// CDF at `x` of the sum of `m` iid variables with density proportional to
/// `e^{-c y}` on `(0, 1)`, `c >= 0`, as a log-scaled alternating sum.
fn unit_sum_cdf(x: f64, m: u64, c: f64) -> Result<f64> {
    let mf = m as f64;
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= mf {
        return Ok(1.0);
    }
    if c == 0.0 && x > 0.5 * mf {
        return unit_sum_cdf(mf - x, m, 0.0).map(|f| 1.0 - f);
    }
    let v_max = (x.floor() as u64).min(m);
    let mut terms: Vec<(f64, bool)> = Vec::with_capacity(v_max as usize + 1);
    let ln_norm = if c == 0.0 { ln_gamma_pos(mf + 1.0) } else { mf * (-(-c).exp_m1()).ln() };
    for v in 0..=v_max {
        let a = x - v as f64;
        if a <= 0.0 {
            break;
        }
        let inner = if c == 0.0 { mf * a.ln() } else { ln_reg_lower_gamma(mf, c * a)? - c * v as f64 };
        terms.push((ln_choose(m, v) + inner - ln_norm, v % 2 == 0));
    }
    let lmax = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    if lmax == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let (mut sum, mut abs) = (0.0, 0.0);
    for &(l, positive) in &terms {
        let w = (l - lmax).exp();
        abs += w;
        sum += if positive { w } else { -w };
    }
    let condition = if sum > 0.0 { abs / sum } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::PrecisionLoss { condition });
    }
    Ok((lmax.exp() * sum).clamp(0.0, 1.0))
}

/// Exact conditional distribution function of `S_i` given `m_i = m`.
///
/// For β > 0 the reflection `t -> t0 - t` maps to the negative-β case, so
/// only the incomplete gamma with a positive argument is ever evaluated.
pub fn cond_sum_cdf_exact(s: f64, m: u64, beta: f64, t0: f64) -> Result<f64> {
    check_window(t0)?;
    if m == 0 {
        return domain("the conditional sum needs m >= 1");
    }
    let upper = m as f64 * t0;
    if !(s >= 0.0 && s <= upper) {
        return domain(format!("s = {s} lies outside [0, {upper}]"));
    }
    let x = s / t0;
    let b = beta * t0;
    if b > 0.0 {
        Ok(1.0 - unit_sum_cdf(m as f64 - x, m, b)?)
    } else {
        unit_sum_cdf(x, m, -b)
    }
}

/// One draw of the conditional sum of `m` event times.
pub fn sample_conditional_sum(m: u64, beta: f64, t0: f64, rng: &mut RngStream) -> f64 {
    (0..m).map(|_| event_quantile(rng.uniform01(), beta, t0)).sum()
}

/// Randomized Monte Carlo rank of `s` among `b` simulated sums:
/// `(#{sums < s} + V) / (b + 1)`, exactly uniform under the model.
pub fn cond_sum_cdf_mc(s: f64, m: u64, beta: f64, t0: f64, b: usize, rng: &mut RngStream) -> Result<f64> {
    check_window(t0)?;
    if b == 0 || m == 0 {
        return domain("Monte Carlo rank needs b >= 1 and m >= 1");
    }
    let below = (0..b).filter(|_| sample_conditional_sum(m, beta, t0, rng) < s).count();
    Ok((below as f64 + rng.uniform01()) / (b as f64 + 1.0))
}

/// Normal approximation to the conditional distribution of the sum.
pub fn cond_sum_cdf_normal(s: f64, m: u64, beta: f64, t0: f64) -> Result<f64> {
    check_window(t0)?;
    if m == 0 {
        return domain("the conditional sum needs m >= 1");
    }
    let mf = m as f64;
    Ok(normal_cdf((s - mf * event_mean(beta, t0)) / (mf * event_var(beta, t0)).sqrt()))
}

/// Evaluator for individuals below the normal threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmallCountMethod {
    #[default]
    MonteCarlo,
    /// The alternating sum, falling back to Monte Carlo on precision loss.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortOptions {
    pub alpha: f64,
    pub mc_b: usize,
    pub normal_threshold: usize,
    pub beta_override: Option<f64>,
    pub small_count: SmallCountMethod,
}

impl Default for CohortOptions {
    fn default() -> Self {
        Self { alpha: 0.05, mc_b: 1000, normal_threshold: 40, beta_override: None, small_count: SmallCountMethod::MonteCarlo }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortAssessment {
    pub beta: f64,
    /// Individuals with at least one event; the rest contribute nothing.
    pub contributing: usize,
    pub u: USample,
    pub result: AssessmentResult,
}

/// Builds one `U_i` per individual with events and combines them.
///
/// Individual `i` draws its Monte Carlo sums from `rng.derive(i)`.
pub fn assess_cohort(cohort: &CohortData, opts: &CohortOptions, rng: &RngStream) -> Result<CohortAssessment> {
    let beta = match opts.beta_override {
        Some(b) => b,
        None => cond_mle(cohort)?,
    };
    let t0 = cohort.t0;
    let mut u = Vec::with_capacity(cohort.n());
    for (i, h) in cohort.histories.iter().enumerate() {
        let m = h.m() as u64;
        if m == 0 {
            continue;
        }
        let s = h.sum().min(m as f64 * t0);
        let ui = if h.m() >= opts.normal_threshold {
            cond_sum_cdf_normal(s, m, beta, t0)?
        } else {
            let mut stream = rng.derive(i as u64);
            match opts.small_count {
                SmallCountMethod::Exact => match cond_sum_cdf_exact(s, m, beta, t0) {
                    Err(Error::PrecisionLoss { .. }) => cond_sum_cdf_mc(s, m, beta, t0, opts.mc_b, &mut stream)?,
                    other => other?,
                },
                SmallCountMethod::MonteCarlo => cond_sum_cdf_mc(s, m, beta, t0, opts.mc_b, &mut stream)?,
            }
        };
        u.push(ui);
    }
    if u.is_empty() {
        return Err(Error::Degenerate("no individual has any events".into()));
    }
    let u = USample::new(u, beta)?;
    let result = assess(&u, opts.alpha)?;
    Ok(CohortAssessment { beta, contributing: u.m(), u, result })
}

/// Data-generating intensity for simulated cohorts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Intensity {
    LogLinear { beta: f64 },
    PowerLaw { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortGenSpec {
    pub intensity: Intensity,
    pub n: usize,
    #[serde(default = "default_t0")]
    pub t0: f64,
}

fn default_t0() -> f64 {
    5.0
}

/// Simulates `n` individuals with standard normal `γ_i`.
pub fn gen_cohort(spec: &CohortGenSpec, rng: &mut RngStream) -> Result<CohortData> {
    if spec.n == 0 {
        return Err(Error::InvalidSpec("a cohort needs n >= 1".into()));
    }
    let histories = (0..spec.n)
        .map(|_| {
            let gamma = rng.std_normal();
            match spec.intensity {
                Intensity::LogLinear { beta } => simulate_loglinear(gamma, beta, spec.t0, rng),
                Intensity::PowerLaw { rho } => simulate_powerlaw(gamma, rho, spec.t0, rng),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    CohortData::new(histories)
}
