use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn shipped() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/six_bus")
}

fn shp(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shp"));
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("SHP_")) {
        cmd.env_remove(k);
    }
    cmd.output().expect("binary runs")
}

fn shp_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shp"));
    cmd.args(args).envs(env.iter().copied());
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn case_arg() -> String {
    shipped().join("case.json").display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

/// Copy of the shipped case in a scratch directory.
fn scratch_case() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = shipped();
    std::fs::create_dir(dir.path().join("series")).unwrap();
    for entry in std::fs::read_dir(&src).unwrap().chain(std::fs::read_dir(src.join("series")).unwrap()) {
        let p = entry.unwrap().path();
        if p.is_file() {
            let rel = p.strip_prefix(&src).unwrap();
            std::fs::copy(&p, dir.path().join(rel)).unwrap();
        }
    }
    dir
}

#[test]
fn shipped_case_validates() {
    let o = shp(&["validate", "--case", &case_arg(), "--days", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("6 buses, 8 lines, 7 generators"));
}

#[test]
fn missing_series_file_is_an_input_error() {
    let dir = scratch_case();
    std::fs::remove_file(dir.path().join("series/demand_actual.csv")).unwrap();
    let o = shp(&["validate", "--case", dir.path().join("case.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("demand_actual.csv"), "{}", stderr(&o));
}

#[test]
fn series_too_short_for_the_run_is_an_input_error() {
    let o = shp(&["validate", "--case", &case_arg(), "--days", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("need"), "{}", stderr(&o));
    let o = shp(&["simulate", "--case", &case_arg(), "--days", "8", "--out", "/nonexistent/never"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flags_are_input_errors() {
    assert_eq!(shp(&["simulate", "--case", &case_arg(), "--setting", "XYZ"]).status.code(), Some(2));
    assert_eq!(shp(&["simulate", "--case", &case_arg(), "--reserve", "0.1/abc"]).status.code(), Some(2));
    assert_eq!(shp(&["simulate"]).status.code(), Some(2));
    assert_eq!(shp(&["report", "--out", "/nonexistent/sweep"]).status.code(), Some(2));
}

#[test]
fn two_day_ddd_matches_golden_metrics_and_is_reproducible() {
    let out = tempfile::tempdir().unwrap();
    let run = |dir: &Path| {
        let o = shp(&["simulate", "--case", &case_arg(), "--setting", "DDD", "--days", "2", "--seed", "7", "--out", dir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    };
    let (a, b) = (out.path().join("a"), out.path().join("b"));
    run(&a);
    run(&b);

    let golden = json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/ddd_2day_seed7_metrics.json"));
    let got = json(&a.join("metrics.json"));
    fn close(g: &Value, x: &Value, at: &str) {
        match (g, x) {
            (Value::Object(g), Value::Object(x)) => {
                assert_eq!(g.len(), x.len(), "{at}: field count");
                for (k, v) in g {
                    close(v, &x[k], &format!("{at}.{k}"));
                }
            }
            (Value::Number(g), Value::Number(x)) => {
                let (g, x) = (g.as_f64().unwrap(), x.as_f64().unwrap());
                assert!((g - x).abs() <= 1e-9 * g.abs().max(1.0), "{at}: {x} vs golden {g}");
            }
            _ => assert_eq!(g, x, "{at}"),
        }
    }
    close(&golden, &got, "metrics");

    for f in ["ledger/ledger_units.csv", "ledger/ledger_buses.csv", "ledger/ledger_lines.csv", "instances.csv", "metrics.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
}

#[test]
fn manifest_echoes_every_resolved_default() {
    let out = tempfile::tempdir().unwrap();
    let o = shp(&["simulate", "--case", &case_arg(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = json(&out.path().join("manifest.json"));
    assert_eq!(m["reserve_level"], "very_low");
    assert_eq!(m["reserve"]["uc_fraction"], 0.05);
    assert_eq!(m["sw"], 1.0);
    assert!(m["series"].as_str().unwrap().ends_with("series"));
    let sim = &m["sim"];
    assert_eq!(sim["setting"], "DDD");
    assert_eq!(sim["n_days"], 1);
    assert_eq!(sim["n_scenarios"], 100);
    assert_eq!(sim["sd_min_samples"], 256);
    assert_eq!(sim["initial"], "cold");
    for key in ["seed", "sd_max_samples", "history_days", "var_max_lag", "mip_gap", "update_schedule"] {
        assert!(!sim[key].is_null(), "manifest lacks {key}");
    }
    let instances = std::fs::read_to_string(out.path().join("instances.csv")).unwrap();
    assert_eq!(instances.lines().count(), 1 + 1 + 8 + 96);
}

#[test]
fn flags_override_environment_and_environment_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, format!(r#"{{"case": "{}", "days": 1, "seed": 3, "reserve": "high", "sw": 1.25, "out": "from_file"}}"#, case_arg())).unwrap();
    let out = dir.path().join("flag_out");
    let o = shp_env(
        &["simulate", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()],
        &[("SHP_SEED", "9"), ("SHP_RESERVE", "0.08/0.02")],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["sim"]["seed"], 5);
    assert_eq!(m["sim"]["n_days"], 1);
    assert_eq!(m["reserve_level"], Value::Null);
    assert_eq!(m["reserve"]["uc_fraction"], 0.08);
    assert_eq!(m["reserve"]["ed_fraction"], 0.02);
    assert_eq!(m["sw"], 1.25);
    assert!(!dir.path().join("from_file").exists());
}

#[test]
fn initial_state_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = shp(&["simulate", "--case", &case_arg(), "--initial", "day_ahead", "--out", first.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let state = first.join("initial_state.json");
    let units = json(&state);
    assert_eq!(units.as_array().unwrap().len(), 7);
    assert!(units.as_array().unwrap().iter().any(|u| u["on"] == true));

    let second = dir.path().join("second");
    let o = shp(&["simulate", "--case", &case_arg(), "--initial", state.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&second.join("initial_state.json")), units);

    let short = dir.path().join("short.json");
    std::fs::write(&short, "[]").unwrap();
    let o = shp(&["simulate", "--case", &case_arg(), "--initial", short.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn failing_cell_is_recorded_and_the_sweep_continues() {
    let dir = tempfile::tempdir().unwrap();
    let o = shp(&["sweep", "--case", &case_arg(), "--settings", "DDD", "--reserves", "very_low", "--sws", "1,-1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let failures = std::fs::read_to_string(dir.path().join("failures.csv")).unwrap();
    assert_eq!(failures.lines().count(), 2, "{failures}");
    assert!(failures.contains("DDD,very_low,-1.0,0,"));
    let table = std::fs::read_to_string(dir.path().join("grid_avg_unmet_mw.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(dir.path().join("cells/DDD_very_low_sw1/cell.json").exists());
}

#[test]
fn full_factor_grid_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = shp(&[
        "sweep", "--case", &case_arg(), "--days", "1", "--scenarios", "4", "--sd-min-samples", "8", "--workers", "1",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let grid = std::fs::read_to_string(out.join("grid_avg_unmet_mw.csv")).unwrap();
    let rows: Vec<&str> = grid.lines().collect();
    assert_eq!(rows[0], "setting,sw,very_low,low,medium,high");
    assert_eq!(rows.len(), 4);
    for (row, code) in rows[1..].iter().zip(["DDD", "DDS", "SDS"]) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], code);
        assert_eq!(fields.len(), 6);
        assert!(fields[2..].iter().all(|v| v.parse::<f64>().is_ok()), "{row}");
    }
    assert_eq!(json(&out.join("metrics.json"))["cells"].as_array().unwrap().len(), 12);
    let zero_table = std::fs::read_to_string(out.join("zero_unmet_reserve.csv")).unwrap();
    assert_eq!(zero_table.lines().count(), 4);

    // stochastic dispatch reacts to the scenarios
    let cell = |name: &str| out.join("cells").join(name).join("seed0/ledger/ledger_units.csv");
    assert_ne!(std::fs::read(cell("DDD_very_low_sw1")).unwrap(), std::fs::read(cell("DDS_very_low_sw1")).unwrap());

    // a single cell reproduces a standalone run
    let single = dir.path().join("single");
    let o = shp(&["simulate", "--case", &case_arg(), "--setting", "DDD", "--reserve", "medium", "--out", single.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cell_dir = out.join("cells/DDD_medium_sw1/seed0");
    for f in ["ledger/ledger_units.csv", "ledger/ledger_buses.csv", "ledger/ledger_lines.csv", "instances.csv", "metrics.json", "initial_state.json"] {
        assert_eq!(std::fs::read(cell_dir.join(f)).unwrap(), std::fs::read(single.join(f)).unwrap(), "{f}");
    }

    std::fs::remove_file(out.join("zero_unmet_reserve.csv")).unwrap();
    let o = shp(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("zero_unmet_reserve.csv")).unwrap(), zero_table);
}
