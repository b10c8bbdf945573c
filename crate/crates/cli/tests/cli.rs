use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn intrep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intrep")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_PAIRS: &str = r#"
replications = 20
seed = 3
[scenario]
kind = "pairs_mult"
cells = [[0.0, 1.0]]
m = [25]
"#;

#[test]
fn malformed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.toml", "replications = \"many\"\n");
    let o = intrep(&["simulate", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn invalid_config_value_exits_2_and_names_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", &SMALL_PAIRS.replace("replications = 20", "replications = 0"));
    let o = intrep(&["simulate", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replications"), "{}", stderr(&o));
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", &format!("bogus = 1\n{SMALL_PAIRS}"));
    assert_eq!(intrep(&["simulate", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_2() {
    let o = intrep(&["simulate", "--config", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_alpha_exits_2() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "p.csv", "y1,y0\n1.0,2.0\n0.5,0.7\n");
    let o = intrep(&["assess", "--scenario", "pairs", "--data", s(&data), "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_status_column_exits_3_and_names_it() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "surv.csv", "time,x1\n1.0,0.2\n2.0,0.3\n");
    let o = intrep(&["assess", "--scenario", "survival", "--data", s(&data)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("`status`"), "{}", stderr(&o));
}

#[test]
fn unparsable_value_reports_line() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "p.csv", "y1,y0\n1.0,2.0\nabc,0.7\n");
    let o = intrep(&["assess", "--scenario", "pairs", "--data", s(&data)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn negative_pair_value_exits_3() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "p.csv", "y1,y0\n1.0,-2.0\n0.5,0.7\n");
    assert_eq!(intrep(&["assess", "--scenario", "pairs", "--data", s(&data)]).status.code(), Some(3));
}

fn pairs_csv(m: usize) -> String {
    // deterministic exponential draws via inverse CDF on a low-discrepancy sequence
    let mut out = String::from("y1,y0\n");
    for i in 0..m {
        let u1 = ((i as f64 + 0.5) * 0.618_033_988_7).fract();
        let u0 = ((i as f64 + 0.5) * 0.414_213_562_4).fract();
        out += &format!("{},{}\n", -u1.ln() / 2.0, -u0.ln());
    }
    out
}

#[test]
fn assess_pairs_csv_and_json() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "p.csv", &pairs_csv(60));
    let o = intrep(&["assess", "--scenario", "pairs", "--data", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "scenario,estimate,m,r_u,r_comp,p_left,p_right,reject_left,reject_right,alpha");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "pairs_mult");
    assert_eq!(row[2], "60");
    let psi: f64 = row[1].parse().unwrap();
    assert!(psi > 0.0);

    let out = dir.path().join("r.json");
    let o = intrep(&["assess", "--scenario", "pairs", "--model", "add", "--data", s(&data), "--format", "json", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["scenario"], "pairs_add");
    let p = v["p_left"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn events_require_t0_and_respect_it() {
    let dir = TempDir::new().unwrap();
    let mut body = String::from("individual_id,event_time\n");
    for i in 0..30 {
        for j in 0..(i % 4 + 1) {
            body += &format!("id{i},{}\n", 0.3 + 1.1 * j as f64 + 0.01 * i as f64);
        }
    }
    body += "id_none,\n";
    let data = write(&dir, "e.csv", &body);
    assert_eq!(intrep(&["assess", "--scenario", "events", "--data", s(&data)]).status.code(), Some(2));
    let o = intrep(&["assess", "--scenario", "events", "--data", s(&data), "--t0", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = intrep(&["assess", "--scenario", "events", "--data", s(&data), "--t0", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("t0"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_rows_and_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMALL_PAIRS);
    let out = dir.path().join("rows.csv");
    let o = intrep(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = fs::read_to_string(&out).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(rows.starts_with("scenario,params,size,direction,metric,value,mc_se,replications,seed"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("rows.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["replications"], 20);
    assert_eq!(manifest["failed_replicates"], 0);
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMALL_PAIRS);
    let a = intrep(&["simulate", "--config", s(&cfg), "--threads", "1", "--seed", "9"]);
    let b = intrep(&["simulate", "--config", s(&cfg), "--threads", "3", "--seed", "9"]);
    let c = intrep(&["simulate", "--config", s(&cfg), "--seed", "10"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn power_default_grid_json() {
    let o = intrep(&["power", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2 * 36 * 33);
}

#[test]
fn power_rejects_non_grid_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMALL_PAIRS);
    assert_eq!(intrep(&["power", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn confset_lists_accepted_models() {
    let dir = TempDir::new().unwrap();
    let mut body = String::from("y,x1,x2,x3,x4,x5,x6\n");
    for i in 0..40 {
        let x: Vec<f64> = (0..6).map(|j| ((i * 7 + j * 13) as f64 * 0.754_877_666).fract() - 0.5).collect();
        let noise = ((i as f64 + 0.5) * 0.618_033_988_7).fract() - 0.5;
        let y = 3.0 * x[0] - 2.0 * x[2] + 0.3 * noise;
        body += &format!("{y},{}\n", x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    }
    let data = write(&dir, "reg.csv", &body);
    let o = intrep(&["confset", "--data", s(&data), "--dmax", "3", "--sigma", "0.1", "--all"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("model,size,p_left,p_right,accepted_left,accepted_right"));
    assert_eq!(text.lines().count() - 1, 6 + 15 + 20);
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            let cfg: intrep_core::experiment::ExperimentConfig =
                toml::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 9);
}
