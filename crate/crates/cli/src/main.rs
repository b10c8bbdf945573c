//! `intrep`: simulation studies and one-shot model assessment.

mod data;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use intrep_core::confsets::confidence_set_models;
use intrep_core::exec::with_threads;
use intrep_core::experiment::{run_experiment, ExperimentConfig, ExperimentOutput, Scenario};
use intrep_core::hazards::assess_ph;
use intrep_core::pairs::{add_mle, assess_pairs, mult_mle, PairModel};
use intrep_core::poisson::{assess_cohort, CohortOptions};
use intrep_core::power::PlugInRule;
use intrep_core::two_group::{assess_strata, Family};
use intrep_core::{AssessmentResult, Direction, Execution, RngStream};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "intrep", version, about = "Model assessment by internal replication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Base seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores (overrides the config file).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Test size (overrides the config file).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation study from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Assess a postulated model on a CSV dataset.
    Assess {
        #[arg(long, value_enum)]
        scenario: DataKind,
        /// CSV file (see README for the columns of each scenario).
        #[arg(long)]
        data: PathBuf,
        /// Pair model to assess.
        #[arg(long, value_enum, default_value_t = PairModelArg::Mult)]
        model: PairModelArg,
        /// Stratum family for `strata` data.
        #[arg(long, value_enum, default_value_t = FamilyArg::Normal)]
        family: FamilyArg,
        /// Observation window for `events` data.
        #[arg(long)]
        t0: Option<f64>,
        /// Number of blocks for `survival` data.
        #[arg(long, default_value_t = 10)]
        blocks: usize,
        /// Monte Carlo draws per individual for small event counts.
        #[arg(long, default_value_t = 1000)]
        mc_b: usize,
        /// Event count from which the normal approximation is used.
        #[arg(long, default_value_t = 40)]
        normal_threshold: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate log E and log V of the replicate statistic over a shape/ratio grid.
    Power {
        /// Optional `power_grid` config; otherwise a default grid is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RuleArg::FirstOrder)]
        rule: RuleArg,
        #[command(flatten)]
        common: Common,
    },
    /// Confidence set of sparse regression models for a CSV dataset.
    Confset {
        #[arg(long)]
        data: PathBuf,
        /// Synthetic replicates.
        #[arg(long, default_value_t = 8)]
        k: usize,
        /// Largest model size.
        #[arg(long, default_value_t = 5)]
        dmax: usize,
        /// Known noise level; estimated from the full model when absent.
        #[arg(long)]
        sigma: Option<f64>,
        /// Report every tested model, not just the accepted ones.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Pairs,
    Events,
    Survival,
    Strata,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairModelArg {
    Mult,
    Add,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Normal,
    Poisson,
    Gamma,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    FirstOrder,
    Exact,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("intrep: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, common } => {
            let cfg = load_config(&config, &common)?;
            simulate(cfg, &common)
        }
        Command::Power { config, rule, common } => {
            let mut cfg = match config {
                Some(p) => load_config(&p, &common)?,
                None => default_power_config(rule),
            };
            if !matches!(cfg.scenario, Scenario::PowerGrid { .. }) {
                return Err(CliError::Config("`power` expects a config with kind = \"power_grid\"".into()));
            }
            apply_overrides(&mut cfg, &common);
            simulate(cfg, &common)
        }
        Command::Assess { scenario, data, model, family, t0, blocks, mc_b, normal_threshold, common } => {
            let alpha = check_alpha(common.alpha.unwrap_or(0.05))?;
            let rng = RngStream::new(common.seed.unwrap_or(0), 0);
            let report = match scenario {
                DataKind::Pairs => {
                    let pairs = data::load_pairs(&data)?;
                    let (name, estimate, postulated) = match model {
                        PairModelArg::Mult => ("pairs_mult", mult_mle(&pairs).map_err(data_err)?, PairModel::Multiplicative),
                        PairModelArg::Add => ("pairs_add", add_mle(&pairs).map_err(data_err)?, PairModel::Additive),
                    };
                    let res = assess_pairs(&pairs, postulated, alpha).map_err(data_err)?;
                    Report::new(name, vec![estimate], &res)
                }
                DataKind::Events => {
                    let t0 = t0.ok_or_else(|| CliError::Config("`--t0` is required for events data".into()))?;
                    let cohort = data::load_events(&data, t0)?;
                    let opts = CohortOptions { alpha, mc_b, normal_threshold, ..CohortOptions::default() };
                    let a = assess_cohort(&cohort, &opts, &rng).map_err(data_err)?;
                    Report::new("poisson", vec![a.beta], &a.result)
                }
                DataKind::Survival => {
                    let surv = data::load_survival(&data)?;
                    let a = assess_ph(&surv, blocks, alpha, None, &mut rng.clone()).map_err(data_err)?;
                    Report::new("ph", a.beta, &a.result)
                }
                DataKind::Strata => {
                    let family = match family {
                        FamilyArg::Normal => Family::Normal,
                        FamilyArg::Poisson => Family::Poisson,
                        FamilyArg::Gamma => Family::Gamma,
                    };
                    let strata = data::load_strata(&data, family)?;
                    let res = assess_strata(&strata, alpha, &mut rng.clone()).map_err(data_err)?;
                    Report::new("two_group", vec![], &res)
                }
            };
            emit(&common, |w, fmt| match fmt {
                Format::Json => write_json(w, &report),
                Format::Csv => write_csv(w, std::iter::once(&report)),
            })
        }
        Command::Confset { data, k, dmax, sigma, all, common } => {
            let alpha = check_alpha(common.alpha.unwrap_or(0.05))?;
            let reg = data::load_regression(&data, sigma)?;
            let mut rng = RngStream::new(common.seed.unwrap_or(0), 0);
            let set = with_threads(common.threads.unwrap_or(0), || {
                confidence_set_models(&reg, dmax, k, alpha, &mut rng, Execution::Parallel)
            })
            .map_err(data_err)?;
            let rows: Vec<ModelRow> = set
                .verdicts
                .iter()
                .map(|v| ModelRow {
                    model: v.model.label(),
                    size: v.model.d0(),
                    p_left: v.result.p_value(Direction::Left),
                    p_right: v.result.p_value(Direction::Right),
                    accepted_left: !v.result.rejects(Direction::Left),
                    accepted_right: !v.result.rejects(Direction::Right),
                })
                .filter(|r| all || r.accepted_left || r.accepted_right)
                .collect();
            emit(&common, |w, fmt| match fmt {
                Format::Json => write_json(w, &rows),
                Format::Csv => write_csv(w, rows.iter()),
            })
        }
    }
}

fn data_err(e: intrep_core::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn check_alpha(alpha: f64) -> Result<f64, CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(CliError::Config(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn load_config(path: &Path, common: &Common) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    apply_overrides(&mut cfg, common);
    cfg.validate().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

fn apply_overrides(cfg: &mut ExperimentConfig, common: &Common) {
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(a) = common.alpha {
        cfg.alpha = a;
    }
}

fn default_power_config(rule: RuleArg) -> ExperimentConfig {
    let sigma = (0..=35).map(|i| 0.25 + 0.05 * i as f64).collect();
    let psi = (0..=32).map(|i| 2f64.powf(-2.0 + i as f64 / 8.0)).collect();
    let rule = match rule {
        RuleArg::FirstOrder => PlugInRule::FirstOrder,
        RuleArg::Exact => PlugInRule::Exact,
    };
    ExperimentConfig {
        name: Some("power_grid".into()),
        replications: 1,
        alpha: 0.05,
        seed: 0,
        threads: 0,
        scenario: Scenario::PowerGrid { sigma, psi, rule },
    }
}

fn simulate(cfg: ExperimentConfig, common: &Common) -> Result<(), CliError> {
    let exec = Execution::Parallel;
    let out: ExperimentOutput = with_threads(cfg.threads, || run_experiment(&cfg, exec)).map_err(|e| match e {
        intrep_core::Error::InvalidSpec(m) => CliError::Config(m),
        other => CliError::Data(other.to_string()),
    })?;
    emit(common, |w, fmt| match fmt {
        Format::Json => write_json(w, &out),
        Format::Csv => write_csv(w, out.rows.iter()),
    })?;
    // the manifest rides along with CSV output in a sibling file
    if common.format == Format::Csv {
        let manifest = serde_json::to_string_pretty(&out.manifest).map_err(|e| CliError::Io(e.to_string()))?;
        match &common.out {
            Some(p) => {
                let mp = manifest_path(p);
                fs::write(&mp, manifest + "\n").map_err(|e| CliError::Io(format!("{}: {e}", mp.display())))?;
            }
            None => eprintln!("{manifest}"),
        }
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn emit<F>(common: &Common, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write, Format) -> Result<(), CliError>,
{
    match &common.out {
        Some(p) => {
            let mut f = fs::File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            body(&mut f, common.format)
        }
        None => body(&mut std::io::stdout().lock(), common.format),
    }
}

fn write_json<T: Serialize + ?Sized>(w: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w).map_err(|e| CliError::Io(e.to_string()))
}

fn write_csv<'a, T: Serialize + 'a>(w: &mut dyn Write, rows: impl Iterator<Item = &'a T>) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    wtr.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct Report {
    scenario: &'static str,
    /// Semicolon-separated parameter estimates.
    estimate: String,
    m: usize,
    r_u: f64,
    r_comp: f64,
    p_left: f64,
    p_right: f64,
    reject_left: bool,
    reject_right: bool,
    alpha: f64,
}

impl Report {
    fn new(scenario: &'static str, estimate: Vec<f64>, r: &AssessmentResult) -> Self {
        Report {
            scenario,
            estimate: estimate.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";"),
            m: r.m,
            r_u: r.r_u,
            r_comp: r.r_comp,
            p_left: r.p_value(Direction::Left),
            p_right: r.p_value(Direction::Right),
            reject_left: r.rejects(Direction::Left),
            reject_right: r.rejects(Direction::Right),
            alpha: r.alpha,
        }
    }
}

#[derive(Serialize)]
struct ModelRow {
    model: String,
    size: usize,
    p_left: f64,
    p_right: f64,
    accepted_left: bool,
    accepted_right: bool,
}
