//! CSV loaders for user-supplied datasets. Every file needs a header row.

use std::collections::BTreeMap;
use std::path::Path;

use intrep_core::confsets::RegressionData;
use intrep_core::hazards::{SurvData, SurvRecord};
use intrep_core::numerics::linalg::Matrix;
use intrep_core::pairs::PairData;
use intrep_core::poisson::{CohortData, EventHistory};
use intrep_core::two_group::{Family, StratumData};

use crate::CliError;

struct Table {
    headers: Vec<String>,
    /// `(line number, fields)`
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        if rows.is_empty() {
            return Err(CliError::Data(format!("{}: no data rows", path.display())));
        }
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("missing required column `{name}` (found: {})", self.headers.join(", "))))
    }

    fn prefixed(&self, prefix: &str) -> Vec<usize> {
        self.headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.strip_prefix(prefix).is_some_and(|s| s.parse::<u32>().is_ok()))
            .map(|(i, _)| i)
            .collect()
    }
}

fn parse<T: std::str::FromStr>(line: u64, name: &str, field: &str) -> Result<T, CliError> {
    field
        .parse()
        .map_err(|_| CliError::Data(format!("line {line}: column `{name}` has unparsable value `{field}`")))
}

fn core(e: intrep_core::Error) -> CliError {
    CliError::Data(e.to_string())
}

/// Columns `y1` (treated) and `y0` (untreated).
pub fn load_pairs(path: &Path) -> Result<PairData, CliError> {
    let t = Table::read(path)?;
    let (c1, c0) = (t.column("y1")?, t.column("y0")?);
    let mut y1 = Vec::with_capacity(t.rows.len());
    let mut y0 = Vec::with_capacity(t.rows.len());
    for (line, f) in &t.rows {
        y1.push(parse(*line, "y1", &f[c1])?);
        y0.push(parse(*line, "y0", &f[c0])?);
    }
    PairData::new(y1, y0).map_err(core)
}

/// Columns `individual_id` and `event_time`; an empty time records an
/// individual with no events.
pub fn load_events(path: &Path, t0: f64) -> Result<CohortData, CliError> {
    let t = Table::read(path)?;
    let (ci, ct) = (t.column("individual_id")?, t.column("event_time")?);
    let mut by_id: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (line, f) in &t.rows {
        let times = by_id.entry(f[ci].clone()).or_default();
        if !f[ct].is_empty() {
            let v: f64 = parse(*line, "event_time", &f[ct])?;
            if !(v > 0.0 && v <= t0) {
                return Err(CliError::Data(format!("line {line}: event_time {v} lies outside (0, t0 = {t0}]")));
            }
            times.push(v);
        }
    }
    let histories = by_id
        .into_values()
        .map(|mut times| {
            times.sort_by(f64::total_cmp);
            EventHistory::new(times, t0)
        })
        .collect::<intrep_core::Result<Vec<_>>>()
        .map_err(core)?;
    CohortData::new(histories).map_err(core)
}

/// Columns `time`, `status` (1 event, 0 censored) and covariates `x1..xp`.
pub fn load_survival(path: &Path) -> Result<SurvData, CliError> {
    let t = Table::read(path)?;
    let (cy, cs) = (t.column("time")?, t.column("status")?);
    let xs = t.prefixed("x");
    if xs.is_empty() {
        return Err(CliError::Data("missing covariate columns `x1`, `x2`, ...".into()));
    }
    let mut records = Vec::with_capacity(t.rows.len());
    for (line, f) in &t.rows {
        let status: u8 = parse(*line, "status", &f[cs])?;
        if status > 1 {
            return Err(CliError::Data(format!("line {line}: status must be 0 or 1, got {status}")));
        }
        let x = xs.iter().map(|&c| parse(*line, &t.headers[c], &f[c])).collect::<Result<_, _>>()?;
        records.push(SurvRecord { y: parse(*line, "time", &f[cy])?, event: status == 1, x });
    }
    SurvData::new(records).map_err(core)
}

/// Columns `s1`, `s0`, `r1`, `r0` with one stratum per row.
pub fn load_strata(path: &Path, family: Family) -> Result<StratumData, CliError> {
    let t = Table::read(path)?;
    let cols = [t.column("s1")?, t.column("s0")?, t.column("r1")?, t.column("r0")?];
    let (mut s1, mut s0, mut r1, mut r0) = (vec![], vec![], vec![], vec![]);
    for (line, f) in &t.rows {
        s1.push(parse(*line, "s1", &f[cols[0]])?);
        s0.push(parse(*line, "s0", &f[cols[1]])?);
        r1.push(parse(*line, "r1", &f[cols[2]])?);
        r0.push(parse(*line, "r0", &f[cols[3]])?);
    }
    StratumData::new(s1, s0, r1, r0, family).map_err(core)
}

/// Column `y` and covariates `x1..xd`.
pub fn load_regression(path: &Path, sigma: Option<f64>) -> Result<RegressionData, CliError> {
    let t = Table::read(path)?;
    let cy = t.column("y")?;
    let xs = t.prefixed("x");
    if xs.is_empty() {
        return Err(CliError::Data("missing covariate columns `x1`, `x2`, ...".into()));
    }
    let mut y = Vec::with_capacity(t.rows.len());
    let mut cols = vec![Vec::with_capacity(t.rows.len()); xs.len()];
    for (line, f) in &t.rows {
        y.push(parse(*line, "y", &f[cy])?);
        for (col, &c) in cols.iter_mut().zip(&xs) {
            col.push(parse(*line, &t.headers[c], &f[c])?);
        }
    }
    let x = Matrix::from_columns(&cols).map_err(core)?;
    RegressionData::new(x, y, sigma).map_err(core)
}
