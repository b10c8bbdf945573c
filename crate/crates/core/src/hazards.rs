//! Cox partial likelihood and block-score replicates for proportional hazards.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::linalg::{Cholesky, Matrix};
use crate::numerics::special::{chi2_cdf, normal_cdf};
use crate::numerics::RngStream;
use crate::replication::{assess, AssessmentResult, USample};

pub const MAX_NEWTON_ITER: usize = 100;
pub const SEPARATION_BOUND: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SurvRecord {
    pub y: f64,
    pub event: bool,
    pub x: Vec<f64>,
}

/// Validated survival records sharing a covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvData {
    records: Vec<SurvRecord>,
    p: usize,
}

impl SurvData {
    pub fn new(records: Vec<SurvRecord>) -> Result<Self> {
        let Some(first) = records.first() else {
            return domain("survival data needs at least one record");
        };
        let p = first.x.len();
        if p == 0 {
            return domain("at least one covariate is required");
        }
        for (i, r) in records.iter().enumerate() {
            if !(r.y > 0.0 && r.y.is_finite()) {
                return domain(format!("record {i}: time must be positive, got {}", r.y));
            }
            if r.x.len() != p {
                return domain(format!("record {i}: expected {p} covariates, got {}", r.x.len()));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return domain(format!("record {i}: non-finite covariate"));
            }
        }
        Ok(Self { records, p })
    }

    pub fn records(&self) -> &[SurvRecord] {
        &self.records
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    fn subset(&self, idx: &[usize]) -> SurvData {
        SurvData { records: idx.iter().map(|&i| self.records[i].clone()).collect(), p: self.p }
    }
}

/// Log partial likelihood with its gradient and negative Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialLik {
    pub loglik: f64,
    pub score: Vec<f64>,
    pub info: Matrix,
}

/// Evaluates the partial likelihood with `g = exp`, walking times in
/// decreasing order so that risk-set sums accumulate.
pub fn partial_loglik(data: &SurvData, beta: &[f64]) -> Result<PartialLik> {
    let p = data.p;
    if beta.len() != p {
        return domain(format!("beta has length {}, expected {p}", beta.len()));
    }
    let recs = &data.records;
    let eta: Vec<f64> = recs.iter().map(|r| r.x.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut order: Vec<usize> = (0..recs.len()).collect();
    order.sort_by(|&a, &b| recs[b].y.total_cmp(&recs[a].y));

    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = Matrix::zeros(p, p);
    let mut loglik = 0.0;
    let mut score = vec![0.0; p];
    let mut info = Matrix::zeros(p, p);
    let mut k = 0;
    while k < order.len() {
        let y = recs[order[k]].y;
        let mut end = k;
        while end < order.len() && recs[order[end]].y == y {
            let i = order[end];
            let w = (eta[i] - shift).exp();
            s0 += w;
            for a in 0..p {
                s1[a] += w * recs[i].x[a];
                for b in 0..p {
                    s2[(a, b)] += w * recs[i].x[a] * recs[i].x[b];
                }
            }
            end += 1;
        }
        let mut events = order[k..end].iter().filter(|&&i| recs[i].event);
        if let Some(&i) = events.next() {
            if events.next().is_some() {
                return Err(Error::TiedEvents(y));
            }
            loglik += eta[i] - shift - s0.ln();
            for a in 0..p {
                let mean_a = s1[a] / s0;
                score[a] += recs[i].x[a] - mean_a;
                for b in 0..p {
                    info[(a, b)] += s2[(a, b)] / s0 - mean_a * s1[b] / s0;
                }
            }
        }
        k = end;
    }
    Ok(PartialLik { loglik, score, info })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhFit {
    pub beta: Vec<f64>,
    pub loglik: f64,
    pub info: Matrix,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Newton-Raphson with step halving from `β = 0`. Converged means a small
/// score and a small Newton step; under a monotone likelihood the score
/// vanishes while the steps do not, and `|β|` runs past the bound.
pub fn ph_mle(data: &SurvData) -> Result<PhFit> {
    let p = data.p;
    if data.events() < p + 1 {
        return Err(Error::Degenerate(format!("{} events cannot fit {p} coefficients", data.events())));
    }
    let tol = 1e-8 * data.n() as f64;
    let mut beta = vec![0.0; p];
    let mut cur = partial_loglik(data, &beta)?;
    for iter in 0..MAX_NEWTON_ITER {
        let step = match Cholesky::new(&cur.info) {
            Ok(ch) => ch.solve(&cur.score),
            // information and score both vanish only on a monotone likelihood
            Err(_) if norm(&cur.score) <= tol => return Err(Error::Separation(SEPARATION_BOUND)),
            Err(e) => return Err(e),
        };
        if norm(&cur.score) <= tol && norm(&step) <= 1e-6 {
            return Ok(PhFit { beta, loglik: cur.loglik, info: cur.info, iterations: iter });
        }
        let mut scale = 1.0;
        loop {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let next = partial_loglik(data, &trial)?;
            if next.loglik >= cur.loglik - 1e-12 * cur.loglik.abs() || scale < 1e-10 {
                beta = trial;
                cur = next;
                break;
            }
            scale *= 0.5;
        }
        if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
            return Err(Error::Separation(SEPARATION_BOUND));
        }
    }
    Err(Error::NonConvergence(format!("partial likelihood after {MAX_NEWTON_ITER} Newton steps")))
}

/// Probability integral transform of one block's score at `beta`.
fn block_pit(block: &SurvData, beta: &[f64]) -> Result<f64> {
    let p = block.p;
    if block.events() < p + 1 {
        return Err(Error::Degenerate(format!("a block has only {} events", block.events())));
    }
    let pl = partial_loglik(block, beta)?;
    if p == 1 {
        let i = pl.info[(0, 0)];
        if !(i > 0.0) {
            return Err(Error::Degenerate("block information is zero".into()));
        }
        return Ok(normal_cdf(pl.score[0] / i.sqrt()));
    }
    let q = Cholesky::new(&pl.info)?.quad_form_inv(&pl.score);
    chi2_cdf(q, p as f64)
}

/// Splits individuals at random into `m_blocks` near-equal blocks and
/// transforms each block's own score at `beta`.
pub fn block_u(data: &SurvData, beta: &[f64], m_blocks: usize, rng: &mut RngStream) -> Result<USample> {
    if m_blocks < 2 {
        return domain(format!("need at least 2 blocks, got {m_blocks}"));
    }
    if m_blocks > data.n() {
        return domain(format!("{m_blocks} blocks exceed {} records", data.n()));
    }
    let mut idx: Vec<usize> = (0..data.n()).collect();
    rng.shuffle(&mut idx);
    let (base, extra) = (data.n() / m_blocks, data.n() % m_blocks);
    let mut start = 0;
    let mut u = Vec::with_capacity(m_blocks);
    for j in 0..m_blocks {
        let len = base + usize::from(j < extra);
        u.push(block_pit(&data.subset(&idx[start..start + len]), beta)?);
        start += len;
    }
    USample::new(u, beta[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhAssessment {
    pub beta: Vec<f64>,
    pub u: USample,
    pub result: AssessmentResult,
}

/// Fits the full sample (unless `beta_override` is given), then assesses
/// the block replicates.
pub fn assess_ph(
    data: &SurvData,
    m_blocks: usize,
    alpha: f64,
    beta_override: Option<&[f64]>,
    rng: &mut RngStream,
) -> Result<PhAssessment> {
    let beta = match beta_override {
        Some(b) => b.to_vec(),
        None => ph_mle(data)?.beta,
    };
    let u = block_u(data, &beta, m_blocks, rng)?;
    let result = assess(&u, alpha)?;
    Ok(PhAssessment { beta, u, result })
}

/// Hazard model used to simulate survival data with standard normal covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HazardModel {
    /// `h(t; x) = ς t^{ς-1} exp(x'β)`.
    Proportional { beta: Vec<f64>, shape: f64 },
    /// One covariate with effect `β(t) = 1 + t` on a unit baseline.
    TimeVarying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Censoring {
    None,
    /// Administrative censoring at a fixed time.
    Fixed { at: f64 },
    /// Independent censoring times uniform on `(0, hi)`.
    Uniform { hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvGenSpec {
    pub model: HazardModel,
    pub n: usize,
    pub censoring: Censoring,
}

pub fn gen_surv(spec: &SurvGenSpec, rng: &mut RngStream) -> Result<SurvData> {
    if spec.n == 0 {
        return Err(Error::InvalidSpec("n must be at least 1".into()));
    }
    let mut records = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let (t, x) = match &spec.model {
            HazardModel::Proportional { beta, shape } => {
                if beta.is_empty() || !(*shape > 0.0) {
                    return Err(Error::InvalidSpec("need p >= 1 and a positive shape".into()));
                }
                let x: Vec<f64> = beta.iter().map(|_| rng.std_normal()).collect();
                let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
                ((rng.unit_exponential() * (-eta).exp()).powf(1.0 / shape), x)
            }
            HazardModel::TimeVarying => {
                let x = rng.std_normal();
                let e = rng.unit_exponential();
                // ∫_0^T exp(x (1 + s)) ds = E
                let t = if x == 0.0 {
                    e
                } else {
                    let arg = x * e * (-x).exp();
                    if arg <= -1.0 { f64::INFINITY } else { arg.ln_1p() / x }
                };
                (t, vec![x])
            }
        };
        let c = match spec.censoring {
            Censoring::None => f64::INFINITY,
            Censoring::Fixed { at } => at,
            Censoring::Uniform { hi } => rng.uniform(0.0, hi),
        };
        if !(t.min(c) > 0.0 && t.min(c).is_finite()) {
            return Err(Error::InvalidSpec("an uncensored simulated time is infinite".into()));
        }
        records.push(SurvRecord { y: t.min(c), event: t <= c, x });
    }
    SurvData::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(y: f64, event: bool, x: f64) -> SurvRecord {
        SurvRecord { y, event, x: vec![x] }
    }

    #[test]
    fn null_loglik_is_minus_log_factorial() {
        let data = SurvData::new((1..=6).map(|i| rec(i as f64, true, i as f64 * 0.3)).collect()).unwrap();
        let pl = partial_loglik(&data, &[0.0]).unwrap();
        let want: f64 = -(1..=6).map(|k| (k as f64).ln()).sum::<f64>();
        assert!((pl.loglik - want).abs() < 1e-12);
    }

    #[test]
    fn constant_covariate_cancels() {
        let data = SurvData::new((1..=5).map(|i| rec(i as f64, i % 2 == 1, 2.0)).collect()).unwrap();
        let a = partial_loglik(&data, &[0.0]).unwrap().loglik;
        let b = partial_loglik(&data, &[3.7]).unwrap().loglik;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ties_are_errors() {
        let data = SurvData::new(vec![rec(1.0, true, 0.1), rec(1.0, true, 0.2), rec(2.0, true, 0.0)]).unwrap();
        assert_eq!(partial_loglik(&data, &[0.0]), Err(Error::TiedEvents(1.0)));
        let ok = SurvData::new(vec![rec(1.0, true, 0.1), rec(1.0, false, 0.2), rec(2.0, true, 0.0)]).unwrap();
        assert!(partial_loglik(&ok, &[0.0]).is_ok());
    }

    #[test]
    fn block_count_precondition() {
        let data = SurvData::new((1..=10).map(|i| rec(i as f64, true, i as f64)).collect()).unwrap();
        assert!(block_u(&data, &[0.0], 1, &mut RngStream::new(1, 1)).is_err());
    }

    #[test]
    fn records_are_validated() {
        assert!(SurvData::new(vec![rec(-1.0, true, 0.0)]).is_err());
        assert!(SurvData::new(vec![rec(1.0, true, 0.0), SurvRecord { y: 2.0, event: true, x: vec![] }]).is_err());
    }
}
