//! Analytic power calculations for the Fisher statistic.
//!
//! `R_j = -log U_j` and `R = 2 Σ R_j`. Under the null `R ~ χ²_{2m}`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::exec::Execution;
use crate::numerics::special::{chi2_quantile, normal_cdf, normal_quantile};
use crate::numerics::{adaptive_quad, find_root_bracketed, QuadratureSpec};

/// Mean and variance of `R_j` for a distribution function on `[0, 1]`:
/// `E = ∫ F(u)/u du`, `V = -2 ∫ log(u) F(u)/u du - E²`.
///
/// Integrates in `v` with `u = v⁴`, which tames `u^ς` behaviour at zero.
pub fn moments_from_cdf<F: Fn(f64) -> f64>(cdf: F) -> Result<(f64, f64)> {
    let spec = QuadratureSpec { abs_tol: 1e-10, max_depth: 60 };
    let e = adaptive_quad(|v| 4.0 * cdf(v.powi(4)) / v, 0.0, 1.0, spec)?;
    let second = adaptive_quad(|v| -32.0 * v.ln() * cdf(v.powi(4)) / v, 0.0, 1.0, spec)?;
    Ok((e, second - e * e))
}

/// Departure parameters `ϑ_j ∈ [0, 1)` of the densities `(1-ϑ) u^{-ϑ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFamily {
    thetas: Vec<f64>,
}

impl ThetaFamily {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return domain("the family needs at least one term");
        }
        if let Some(t) = thetas.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return domain(format!("theta {t} lies outside [0, 1)"));
        }
        Ok(Self { thetas })
    }

    pub fn constant(theta: f64, m: usize) -> Result<Self> {
        Self::new(vec![theta; m])
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn m(&self) -> usize {
        self.thetas.len()
    }

    /// Distribution function `u^{1-ϑ}` of term `j`.
    pub fn cdf(&self, j: usize, u: f64) -> f64 {
        u.powf(1.0 - self.thetas[j])
    }
}

/// Mean and variance of `R` under the family.
pub fn para_moments(fam: &ThetaFamily) -> (f64, f64) {
    let e = fam.thetas.iter().map(|t| 2.0 / (1.0 - t)).sum();
    let v = fam.thetas.iter().map(|t| 4.0 / ((1.0 - t) * (1.0 - t))).sum();
    (e, v)
}

/// Chernoff lower bound on `pr(R >= k_α)`:
/// `1 - inf_{t>0} exp(t k_α) Π (1-ϑ_j)/(1-ϑ_j+2t)`.
///
/// The log objective is convex in `t`, so the infimum is at the root of its
/// derivative `k_α - Σ 2/(1-ϑ_j+2t)` when that is negative at zero;
/// otherwise the infimum is 1 and the bound is trivial.
pub fn markov_bound(fam: &ThetaFamily, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let k = chi2_quantile(1.0 - alpha, 2.0 * fam.m() as f64)?;
    let slope = |t: f64| k - fam.thetas.iter().map(|th| 2.0 / (1.0 - th + 2.0 * t)).sum::<f64>();
    if slope(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while slope(hi) < 0.0 {
        hi *= 2.0;
    }
    let t = find_root_bracketed(slope, 0.0, hi, 1e-14)?;
    let log_obj = t * k + fam.thetas.iter().map(|th| ((1.0 - th) / (1.0 - th + 2.0 * t)).ln()).sum::<f64>();
    Ok((1.0 - log_obj.exp()).max(0.0))
}

/// Normal approximation to the power of the upper-tail test when
/// `Σ R_j` has mean `mu` and standard deviation `tau`.
pub fn normal_power(mu: f64, tau: f64, m: usize, alpha: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return domain(format!("tau must be positive, got {tau}"));
    }
    let z = normal_quantile(1.0 - alpha)?;
    let mf = m as f64;
    let arg = (2.0 * mf + 2.0 * mf.sqrt() * z - 2.0 * mu) / (2.0 * tau);
    // 1 - Φ(x) = Φ(-x), which is exact in the upper tail
    Ok(normal_cdf(-arg))
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Distribution of `U(ψ0)` for the exponential pair model when the truth is
/// Weibull with ratio law `ψ* z^ς / (1 + ψ* z^ς)`.
pub fn weibull_u_cdf(u: f64, shape: f64, psi_star: f64, psi0: f64) -> Result<f64> {
    if !(shape > 0.0 && psi_star > 0.0 && psi0 > 0.0) {
        return domain("shape, psi_star and psi0 must be positive");
    }
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("u = {u} lies outside [0, 1]"));
    }
    if u == 0.0 || u == 1.0 {
        return Ok(u);
    }
    if shape == 1.0 && psi0 == psi_star {
        return Ok(u);
    }
    Ok(logistic(psi_star.ln() - shape * psi0.ln() + shape * (u.ln() - (-u).ln_1p())))
}

/// `E(R_j)` when the truth is the additive exponential model, in terms of
/// `η = (γ + Δ)/(γ ψ0)`: `η log η / (η - 1)`.
pub fn additive_er(gamma: f64, delta: f64, psi0: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma + delta > 0.0 && psi0 > 0.0) {
        return domain("need gamma > 0, gamma + delta > 0 and psi0 > 0");
    }
    let eta = (gamma + delta) / (gamma * psi0);
    let h = eta - 1.0;
    if h.abs() < 1e-4 {
        return Ok(1.0 + h / 2.0 - h * h / 6.0 + h * h * h / 12.0);
    }
    Ok(eta * eta.ln() / h)
}

/// Distribution of `U(ψ0)` under the additive truth.
pub fn additive_u_cdf(u: f64, gamma: f64, delta: f64, psi0: f64) -> f64 {
    let a = gamma + delta;
    a * u / (gamma * psi0 * (1.0 - u) + a * u)
}

/// How the limiting estimate `ψ0*` is chosen for the heat map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlugInRule {
    /// `ψ0* = ψ*`, exact to first order in `ς - 1`.
    #[default]
    FirstOrder,
    /// The exact maximizer of the expected log-likelihood.
    Exact,
}

/// Maximizer of the expected pair log-likelihood under the Weibull truth,
/// found as the root of `E[U(ψ0)] = 1/2` by quadrature over the ratio law.
pub fn limit_psi0(shape: f64, psi_star: f64) -> Result<f64> {
    if !(shape > 0.0 && psi_star > 0.0) {
        return domain("shape and psi_star must be positive");
    }
    let spec = QuadratureSpec { abs_tol: 1e-12, max_depth: 60 };
    // Z = (W/ψ*)^{1/ς} with W = v/(1-v), v uniform; U = logistic(log ψ0 + log Z)
    let mean_u = |log_psi0: f64| {
        adaptive_quad(
            |v: f64| logistic(log_psi0 + ((v.ln() - (-v).ln_1p()) - psi_star.ln()) / shape),
            0.0,
            1.0,
            spec,
        )
        .unwrap_or(f64::NAN)
            - 0.5
    };
    let guess = psi_star.ln() / shape;
    let mut width = 1.0;
    while !(mean_u(guess - width) < 0.0 && mean_u(guess + width) > 0.0) {
        width *= 2.0;
        if width > 1e3 {
            return Err(crate::Error::NonConvergence("limit_psi0 bracket".into()));
        }
    }
    Ok(find_root_bracketed(mean_u, guess - width, guess + width, 1e-12)?.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerGrid {
    pub sigma_axis: Vec<f64>,
    pub psi_axis: Vec<f64>,
    /// `log_e[i][j]` is at `(sigma_axis[i], psi_axis[j])`.
    pub log_e: Vec<Vec<f64>>,
    pub log_v: Vec<Vec<f64>>,
}

impl PowerGrid {
    /// Flattened rows `(ς, ψ*, log E, log V)`.
    pub fn rows(&self) -> Vec<[f64; 4]> {
        let mut out = Vec::with_capacity(self.sigma_axis.len() * self.psi_axis.len());
        for (i, s) in self.sigma_axis.iter().enumerate() {
            for (j, p) in self.psi_axis.iter().enumerate() {
                out.push([*s, *p, self.log_e[i][j], self.log_v[i][j]]);
            }
        }
        out
    }
}

/// Log moments of `R_j` over a `(ς, ψ*)` grid.
pub fn heatmap_grid(sigma_axis: &[f64], psi_axis: &[f64], rule: PlugInRule, exec: Execution) -> Result<PowerGrid> {
    if sigma_axis.is_empty() || psi_axis.is_empty() {
        return domain("grid axes must be nonempty");
    }
    let np = psi_axis.len();
    let cells = exec.map(sigma_axis.len() * np, |c| -> Result<(f64, f64)> {
        let (shape, psi) = (sigma_axis[c / np], psi_axis[c % np]);
        let psi0 = match rule {
            PlugInRule::FirstOrder => psi,
            PlugInRule::Exact => limit_psi0(shape, psi)?,
        };
        let (e, v) = moments_from_cdf(|u| weibull_u_cdf(u, shape, psi, psi0).unwrap_or(f64::NAN))?;
        Ok((e.ln(), v.ln()))
    });
    let mut log_e = vec![vec![0.0; np]; sigma_axis.len()];
    let mut log_v = log_e.clone();
    for (c, cell) in cells.into_iter().enumerate() {
        let (e, v) = cell?;
        log_e[c / np][c % np] = e;
        log_v[c / np][c % np] = v;
    }
    Ok(PowerGrid { sigma_axis: sigma_axis.to_vec(), psi_axis: psi_axis.to_vec(), log_e, log_v })
}

/// `2 (x log x - x + 1) / (x - 1)²`, decreasing from 2 at 0 to 0 at infinity.
fn intersection_ratio(x: f64) -> f64 {
    let h = x - 1.0;
    if h.abs() < 1e-3 {
        return 1.0 - h / 3.0 + h * h / 6.0 - h * h * h / 10.0 + h.powi(4) / 15.0;
    }
    2.0 * (x * x.ln() - x + 1.0) / (h * h)
}

/// Nontrivial root of `(x-1)² = 2(1+ε) x (log x + 1/x - 1)` nearest 1.
///
/// Dividing out the double root at `x = 1` leaves
/// `(1+ε) q(x) = 1` with `q` strictly decreasing, so the root is unique.
pub fn solve_intersection_x(eps: f64) -> Result<f64> {
    if !(eps.abs() < 0.5) {
        return domain(format!("eps must satisfy |eps| < 0.5, got {eps}"));
    }
    if eps == 0.0 {
        return Ok(1.0);
    }
    let g = |x: f64| (1.0 + eps) * intersection_ratio(x) - 1.0;
    let (lo, hi) = if eps > 0.0 { (1.0, 10.0) } else { (1e-12, 1.0) };
    find_root_bracketed(g, lo, hi, 1e-14)
}
