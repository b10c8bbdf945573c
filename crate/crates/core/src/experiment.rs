//! Configuration-driven simulation studies.
//!
//! A study is a grid of cells, each run for `replications` independent
//! replicates. Cell `c` draws from the seed `mix(seed + c)` and replicate `r`
//! uses stream `r` of that seed, so results do not depend on the thread
//! count or the scheduling order.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::confsets::{confidence_set_models, gen_regression, RegressionGenSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hazards::{assess_ph, gen_surv, Censoring, HazardModel, SurvGenSpec};
use crate::numerics::rng::mix;
use crate::numerics::RngStream;
use crate::pairs::{assess_pairs, gen_pairs, Effect, GammaSampler, PairGenSpec, PairModel, WeibullConvention};
use crate::poisson::{assess_cohort, gen_cohort, CohortGenSpec, CohortOptions, Intensity, SmallCountMethod};
use crate::power::{heatmap_grid, PlugInRule};
use crate::replication::{AssessmentResult, Direction};
use crate::two_group::{assess_strata, gen_strata, Family, StratumGenSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub threads: usize,
    pub scenario: Scenario,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaMode {
    /// Plug in the estimate from the simulated data.
    Estimated,
    /// Use the generating value.
    True,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// Additive Weibull truth, multiplicative exponential model.
    /// Cells are `(Δ*, ς)`.
    PairsMult {
        cells: Vec<[f64; 2]>,
        m: Vec<usize>,
        #[serde(default)]
        convention: WeibullConvention,
        #[serde(default)]
        gamma: GammaSampler,
    },
    /// Multiplicative Weibull truth, additive exponential model.
    /// Cells are `(ψ*, ς)`.
    PairsAdd {
        cells: Vec<[f64; 2]>,
        m: Vec<usize>,
        #[serde(default)]
        convention: WeibullConvention,
        #[serde(default)]
        gamma: GammaSampler,
    },
    TwoGroup {
        family: Family,
        psi: Vec<f64>,
        m: Vec<usize>,
        #[serde(default = "one")]
        tau: f64,
        #[serde(default = "one_u32")]
        r_min: u32,
        #[serde(default = "four_u32")]
        r_max: u32,
    },
    Poisson {
        intensity: IntensityKind,
        /// `β` for the log-linear intensity, `ρ` for the power law.
        values: Vec<f64>,
        n: Vec<usize>,
        #[serde(default = "estimated_only")]
        modes: Vec<BetaMode>,
        #[serde(default = "five")]
        t0: f64,
        #[serde(default = "thousand")]
        mc_b: usize,
        #[serde(default = "forty")]
        normal_threshold: usize,
        #[serde(default)]
        small_count: SmallCountMethod,
    },
    Ph {
        models: Vec<HazardModel>,
        n: Vec<usize>,
        blocks: usize,
        #[serde(default = "no_censoring")]
        censoring: Censoring,
        #[serde(default = "estimated_only")]
        modes: Vec<BetaMode>,
    },
    Confsets {
        n: Vec<usize>,
        k: Vec<usize>,
        #[serde(default = "five_usize")]
        dmax: usize,
        #[serde(default = "fifteen")]
        d: usize,
        #[serde(default = "five_usize")]
        s: usize,
        #[serde(default = "three")]
        a: usize,
        #[serde(default = "rho")]
        rho: f64,
    },
    /// Deterministic `log E` and `log V` surfaces; `replications` is unused.
    PowerGrid {
        sigma: Vec<f64>,
        psi: Vec<f64>,
        #[serde(default)]
        rule: PlugInRule,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityKind {
    LogLinear,
    PowerLaw,
}

fn one() -> f64 {
    1.0
}
fn five() -> f64 {
    5.0
}
fn rho() -> f64 {
    0.9
}
fn one_u32() -> u32 {
    1
}
fn four_u32() -> u32 {
    4
}
fn three() -> usize {
    3
}
fn five_usize() -> usize {
    5
}
fn fifteen() -> usize {
    15
}
fn forty() -> usize {
    40
}
fn thousand() -> usize {
    1000
}
fn estimated_only() -> Vec<BetaMode> {
    vec![BetaMode::Estimated]
}
fn no_censoring() -> Censoring {
    Censoring::None
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::PairsMult { .. } => "pairs_mult",
            Scenario::PairsAdd { .. } => "pairs_add",
            Scenario::TwoGroup { .. } => "two_group",
            Scenario::Poisson { .. } => "poisson",
            Scenario::Ph { .. } => "ph",
            Scenario::Confsets { .. } => "confsets",
            Scenario::PowerGrid { .. } => "power_grid",
        }
    }
}

fn invalid<T>(field: &str, msg: impl std::fmt::Display) -> Result<T> {
    Err(Error::InvalidSpec(format!("field `{field}`: {msg}")))
}

fn nonempty<T>(field: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return invalid(field, "must list at least one value");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return invalid("replications", "must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha));
        }
        match &self.scenario {
            Scenario::PairsMult { cells, m, .. } | Scenario::PairsAdd { cells, m, .. } => {
                nonempty("scenario.cells", cells)?;
                nonempty("scenario.m", m)?;
                if m.contains(&0) {
                    return invalid("scenario.m", "sizes must be positive");
                }
                if cells.iter().any(|c| !(c[1] > 0.0)) {
                    return invalid("scenario.cells", "Weibull shapes must be positive");
                }
            }
            Scenario::TwoGroup { psi, m, .. } => {
                nonempty("scenario.psi", psi)?;
                nonempty("scenario.m", m)?;
            }
            Scenario::Poisson { intensity, values, n, modes, t0, mc_b, .. } => {
                nonempty("scenario.values", values)?;
                nonempty("scenario.n", n)?;
                nonempty("scenario.modes", modes)?;
                if !(*t0 > 0.0) {
                    return invalid("scenario.t0", "must be positive");
                }
                if *mc_b == 0 {
                    return invalid("scenario.mc_b", "must be at least 1");
                }
                if *intensity == IntensityKind::PowerLaw && modes.contains(&BetaMode::True) {
                    return invalid("scenario.modes", "a power-law truth has no true beta");
                }
            }
            Scenario::Ph { models, n, blocks, modes, censoring } => {
                nonempty("scenario.models", models)?;
                nonempty("scenario.n", n)?;
                nonempty("scenario.modes", modes)?;
                if *blocks == 0 {
                    return invalid("scenario.blocks", "must be at least 1");
                }
                let tv = models.iter().any(|m| matches!(m, HazardModel::TimeVarying));
                if tv && modes.contains(&BetaMode::True) {
                    return invalid("scenario.modes", "the time-varying truth has no true beta");
                }
                if tv && matches!(censoring, Censoring::None) {
                    return invalid("scenario.censoring", "the time-varying truth can produce infinite event times");
                }
            }
            Scenario::Confsets { n, k, dmax, .. } => {
                nonempty("scenario.n", n)?;
                nonempty("scenario.k", k)?;
                if k.iter().any(|k| *k < 2) {
                    return invalid("scenario.k", "needs at least two replicates");
                }
                if *dmax == 0 {
                    return invalid("scenario.dmax", "must be at least 1");
                }
            }
            Scenario::PowerGrid { sigma, psi, .. } => {
                nonempty("scenario.sigma", sigma)?;
                nonempty("scenario.psi", psi)?;
            }
        }
        Ok(())
    }
}

/// One long-format output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub params: String,
    pub size: usize,
    pub direction: String,
    pub metric: String,
    pub value: f64,
    pub mc_se: f64,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: &'static str,
    pub wall_time_secs: f64,
    pub cells: usize,
    /// Replicates that raised an error, summed over cells.
    pub failed_replicates: usize,
    pub max_mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub manifest: RunManifest,
}

#[derive(Clone, Copy)]
enum Kind {
    Proportion,
    Mean,
}

struct Metric {
    direction: &'static str,
    name: &'static str,
    kind: Kind,
}

const fn metric(direction: &'static str, name: &'static str, kind: Kind) -> Metric {
    Metric { direction, name, kind }
}

const REJECTION: [Metric; 2] = [
    metric("left", "rejection_rate", Kind::Proportion),
    metric("right", "rejection_rate", Kind::Proportion),
];

const CONFSET: [Metric; 7] = [
    metric("left", "coverage", Kind::Proportion),
    metric("right", "coverage", Kind::Proportion),
    metric("left", "false_models", Kind::Mean),
    metric("right", "false_models", Kind::Mean),
    metric("left", "false_ratio", Kind::Mean),
    metric("right", "false_ratio", Kind::Mean),
    metric("both", "models_tested", Kind::Mean),
];

fn flags(r: &AssessmentResult) -> Vec<f64> {
    Direction::BOTH.iter().map(|d| r.rejects(*d) as u8 as f64).collect()
}

/// A grid cell: label, size and a replicate function of the replicate stream.
struct Cell<'a> {
    params: String,
    size: usize,
    metrics: &'a [Metric],
    run: Box<dyn Fn(&mut RngStream) -> Result<Vec<f64>> + Send + Sync + 'a>,
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn build_cells(cfg: &ExperimentConfig) -> Vec<Cell<'_>> {
    let alpha = cfg.alpha;
    let mut cells = Vec::new();
    match &cfg.scenario {
        Scenario::PairsMult { cells: grid, m, convention, gamma } | Scenario::PairsAdd { cells: grid, m, convention, gamma } => {
            let mult_truth = matches!(cfg.scenario, Scenario::PairsAdd { .. });
            for &[effect, shape] in grid {
                for &m in m {
                    let (effect, postulated, label) = if mult_truth {
                        (Effect::Multiplicative(effect), PairModel::Additive, "psi")
                    } else {
                        (Effect::Additive(effect), PairModel::Multiplicative, "delta")
                    };
                    let spec = PairGenSpec { effect, shape, gamma: *gamma, m, convention: *convention };
                    cells.push(Cell {
                        params: format!("{label}={},shape={}", fmt_num(effect_value(effect)), fmt_num(shape)),
                        size: m,
                        metrics: &REJECTION,
                        run: Box::new(move |rng| Ok(flags(&assess_pairs(&gen_pairs(&spec, rng)?, postulated, alpha)?))),
                    });
                }
            }
        }
        Scenario::TwoGroup { family, psi, m, tau, r_min, r_max } => {
            for &psi in psi {
                for &m in m {
                    let spec = StratumGenSpec {
                        family: *family,
                        psi,
                        tau: *tau,
                        m,
                        r_min: *r_min,
                        r_max: *r_max,
                        gamma_lo: 0.5,
                        gamma_hi: 1.5,
                    };
                    let fam = family_name(*family);
                    cells.push(Cell {
                        params: format!("family={fam},psi={}", fmt_num(psi)),
                        size: m,
                        metrics: &REJECTION,
                        run: Box::new(move |rng| {
                            let data = gen_strata(&spec, rng)?;
                            Ok(flags(&assess_strata(&data, alpha, rng)?))
                        }),
                    });
                }
            }
        }
        Scenario::Poisson { intensity, values, n, modes, t0, mc_b, normal_threshold, small_count } => {
            for &v in values {
                for &mode in modes {
                    for &n in n {
                        let (intensity, label) = match intensity {
                            IntensityKind::LogLinear => (Intensity::LogLinear { beta: v }, "beta"),
                            IntensityKind::PowerLaw => (Intensity::PowerLaw { rho: v }, "rho"),
                        };
                        let spec = CohortGenSpec { intensity, n, t0: *t0 };
                        let opts = CohortOptions {
                            alpha,
                            mc_b: *mc_b,
                            normal_threshold: *normal_threshold,
                            beta_override: (mode == BetaMode::True).then_some(v),
                            small_count: *small_count,
                        };
                        cells.push(Cell {
                            params: format!("{label}={},beta_mode={}", fmt_num(v), mode.as_str()),
                            size: n,
                            metrics: &REJECTION,
                            run: Box::new(move |rng| {
                                let cohort = gen_cohort(&spec, rng)?;
                                let inner = rng.derive(u64::MAX);
                                Ok(flags(&assess_cohort(&cohort, &opts, &inner)?.result))
                            }),
                        });
                    }
                }
            }
        }
        Scenario::Ph { models, n, blocks, censoring, modes } => {
            for model in models {
                for &mode in modes {
                    for &n in n {
                        let spec = SurvGenSpec { model: model.clone(), n, censoring: censoring.clone() };
                        let fixed = match (mode, model) {
                            (BetaMode::True, HazardModel::Proportional { beta, .. }) => Some(beta.clone()),
                            _ => None,
                        };
                        let label = match model {
                            HazardModel::Proportional { beta, shape } => format!(
                                "proportional(beta={}|shape={})",
                                beta.iter().map(|b| fmt_num(*b)).collect::<Vec<_>>().join(";"),
                                fmt_num(*shape)
                            ),
                            HazardModel::TimeVarying => "time_varying".to_string(),
                        };
                        let blocks = *blocks;
                        cells.push(Cell {
                            params: format!("{label},blocks={blocks},beta_mode={}", mode.as_str()),
                            size: n,
                            metrics: &REJECTION,
                            run: Box::new(move |rng| {
                                let data = gen_surv(&spec, rng)?;
                                Ok(flags(&assess_ph(&data, blocks, alpha, fixed.as_deref(), rng)?.result))
                            }),
                        });
                    }
                }
            }
        }
        Scenario::Confsets { n, k, dmax, d, s, a, rho } => {
            for &n in n {
                for &k in k {
                    let spec = RegressionGenSpec { n, d: *d, s: *s, a: *a, rho: *rho, theta: 1.0 };
                    let dmax = *dmax;
                    cells.push(Cell {
                        params: format!("k={k},d={d},s={s},a={a},rho={}", fmt_num(*rho)),
                        size: n,
                        metrics: &CONFSET,
                        run: Box::new(move |rng| {
                            let (data, truth) = gen_regression(&spec, rng)?;
                            // models are screened inside the replicate, so stay sequential here
                            let set = confidence_set_models(&data, dmax, k, alpha, rng, Execution::Sequential)?;
                            let tested = set.n_tested() as f64;
                            let mut out = Vec::with_capacity(7);
                            for dir in Direction::BOTH {
                                out.push(set.contains(&truth, dir) as u8 as f64);
                            }
                            let falses: Vec<f64> = Direction::BOTH
                                .iter()
                                .map(|d| set.accepted(*d).filter(|m| **m != truth).count() as f64)
                                .collect();
                            out.extend(&falses);
                            out.extend(falses.iter().map(|f| f / tested));
                            out.push(tested);
                            Ok(out)
                        }),
                    });
                }
            }
        }
        Scenario::PowerGrid { .. } => {}
    }
    cells
}

fn effect_value(e: Effect) -> f64 {
    match e {
        Effect::Multiplicative(v) | Effect::Additive(v) => v,
    }
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Normal => "normal",
        Family::Poisson => "poisson",
        Family::Gamma => "gamma",
    }
}

impl BetaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BetaMode::Estimated => "estimated",
            BetaMode::True => "true",
        }
    }
}

/// Runs every cell of the study. Replicates that fail (for example a
/// likelihood without a finite maximum) are excluded from the aggregates and
/// counted in a `failure_rate` row.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let scenario = cfg.scenario.name().to_string();
    let mut rows = Vec::new();
    let mut failed_total = 0;
    let mut n_cells = 0;

    if let Scenario::PowerGrid { sigma, psi, rule } = &cfg.scenario {
        let grid = heatmap_grid(sigma, psi, *rule, exec)?;
        for [s, p, le, lv] in grid.rows() {
            for (metric, value) in [("log_e", le), ("log_v", lv)] {
                rows.push(ResultRow {
                    scenario: scenario.clone(),
                    params: format!("shape={},psi={}", fmt_num(s), fmt_num(p)),
                    size: 1,
                    direction: "none".into(),
                    metric: metric.into(),
                    value,
                    mc_se: 0.0,
                    replications: 0,
                    seed: cfg.seed,
                });
            }
            n_cells += 1;
        }
    }

    for (c, cell) in build_cells(cfg).into_iter().enumerate() {
        n_cells += 1;
        let cell_seed = mix(cfg.seed.wrapping_add(c as u64));
        let outcomes = exec.map(cfg.replications, |r| (cell.run)(&mut RngStream::new(cell_seed, r as u64)));
        let ok: Vec<Vec<f64>> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
        let failed = cfg.replications - ok.len();
        failed_total += failed;
        let reps = ok.len();
        let mut push = |direction: &str, metric: &str, value: f64, mc_se: f64, replications: usize| {
            rows.push(ResultRow {
                scenario: scenario.clone(),
                params: cell.params.clone(),
                size: cell.size,
                direction: direction.into(),
                metric: metric.into(),
                value,
                mc_se,
                replications,
                seed: cfg.seed,
            })
        };
        for (j, m) in cell.metrics.iter().enumerate() {
            let (value, se) = if reps == 0 {
                (f64::NAN, f64::NAN)
            } else {
                let r = reps as f64;
                let mean = ok.iter().map(|o| o[j]).sum::<f64>() / r;
                let se = match m.kind {
                    Kind::Proportion => (mean * (1.0 - mean) / r).sqrt(),
                    Kind::Mean if reps > 1 => {
                        let ss = ok.iter().map(|o| (o[j] - mean).powi(2)).sum::<f64>();
                        (ss / (r - 1.0) / r).sqrt()
                    }
                    Kind::Mean => f64::NAN,
                };
                (mean, se)
            };
            push(m.direction, m.name, value, se, reps);
        }
        if failed > 0 {
            let p = failed as f64 / cfg.replications as f64;
            push("both", "failure_rate", p, (p * (1.0 - p) / cfg.replications as f64).sqrt(), cfg.replications);
        }
    }

    let max_mc_se = rows.iter().map(|r| r.mc_se).filter(|s| s.is_finite()).fold(0.0, f64::max);
    Ok(ExperimentOutput {
        rows,
        manifest: RunManifest {
            config: cfg.clone(),
            version: env!("CARGO_PKG_VERSION"),
            wall_time_secs: start.elapsed().as_secs_f64(),
            cells: n_cells,
            failed_replicates: failed_total,
            max_mc_se,
        },
    })
}

/// Looks up a metric value in the output.
pub fn find_value(rows: &[ResultRow], params: &str, size: usize, direction: &str, metric: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.params == params && r.size == size && r.direction == direction && r.metric == metric)
        .map(|r| r.value)
}
