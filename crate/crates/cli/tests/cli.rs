use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use smoothconf_cli::io::{read_table, table_to_csv};
use smoothconf_core::{ExperimentTable, TableRow};

fn smoothconf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothconf")).args(args).env("SMOOTHCONF_THREADS", "1").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn classify_prints_regime() {
    let cases = [
        (["--p", "1", "--alpha", "2", "--gamma", "0", "--obs", "point"], "ConvergesToTrueBeta"),
        (["--p", "1", "--alpha", "2", "--gamma", "-0.5", "--obs", "point"], "ConvergesToZero"),
        (["--p", "4", "--alpha", "2", "--gamma", "-1", "--obs", "point"], "RandomFiniteLimit"),
        (["--p", "1", "--alpha", "2", "--gamma", "0.5", "--obs", "eigen"], "DivergesSigned"),
        (["--p", "1.5", "--alpha", "1", "--gamma", "0.2", "--obs", "point"], "Unspecified"),
    ];
    for (args, expected) in cases {
        let mut argv = vec!["classify"];
        argv.extend(args);
        let o = smoothconf(&argv);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).starts_with(expected), "{argv:?}: {}", stdout(&o));
    }
}

#[test]
fn bad_arguments_exit_two() {
    let o = smoothconf(&["classify", "--p", "-1", "--alpha", "2", "--gamma", "0"]);
    assert_ne!(o.status.code(), Some(0));
    let o = smoothconf(&["classify", "--p", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = smoothconf(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = smoothconf(&["experiment", "timeseries", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("nope.toml"), "{}", stderr(&o));
}

#[test]
fn malformed_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "replications = 2\nn_grid = [\n").unwrap();
    let o = smoothconf(&["experiment", "timeseries", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml"));
}

fn run_spatial(dir: &Path, seed: &str) -> (Vec<u8>, serde_json::Value) {
    let cfg = dir.join("spatial.toml");
    fs::write(
        &cfg,
        "n_grid = [20, 40]\nreplications = 3\n[spatial]\nn_sites = 40\nnu_x_grid = [0.5, 2.0]\n",
    )
    .unwrap();
    let out = dir.join(format!("out-{seed}"));
    let o = smoothconf(&[
        "experiment",
        "spatial",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read(out.join("spatial_equal_nu.csv")).unwrap();
    let manifest = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    (csv, manifest)
}

#[test]
fn experiments_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, ma) = run_spatial(dir.path(), "11");
    let b = {
        let again = tempfile::tempdir().unwrap();
        run_spatial(again.path(), "11").0
    };
    assert_eq!(a, b);
    let (c, mc) = run_spatial(dir.path(), "12");
    assert_ne!(a, c);
    assert_eq!(ma["base_seed"], 11);
    assert_ne!(ma["config_digest"], mc["config_digest"]);
    assert_eq!(ma["outputs"][0], "spatial_equal_nu.csv");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("n,key,mean_beta,band_lo,band_hi,rmse,failures\n"));
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn simulate_grid_writes_field() {
    let o = smoothconf(&["simulate", "--grid", "5", "--kappa", "2", "--sigma", "1", "--nu", "1.5", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "site_id,x,y,value");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("4,1,0,"));
    let again = smoothconf(&["simulate", "--grid", "5", "--kappa", "2", "--sigma", "1", "--nu", "1.5", "--seed", "3"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn malformed_locations_report_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sites.csv");
    fs::write(&path, "site_id,x,y\na,0,0\nb,1,oops\n").unwrap();
    let o = smoothconf(&["simulate", "--locations", path.to_str().unwrap(), "--kappa", "1", "--sigma", "1", "--nu", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("sites.csv:3:"), "{}", stderr(&o));

    fs::write(&path, "site_id,x,y\na,0,0\na,1,1\n").unwrap();
    let o = smoothconf(&["simulate", "--locations", path.to_str().unwrap(), "--kappa", "1", "--sigma", "1", "--nu", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("sites.csv:3:"), "{}", stderr(&o));
}

fn write_long(path: &Path, sites: usize, reps: usize) {
    let mut s = String::from("site_id,x,y,replicate_id,variable,value\n");
    for r in 0..reps {
        for i in 0..sites {
            let (x, y) = ((i % 5) as f64, (i / 5) as f64);
            let p = (x * 0.7 + r as f64).sin() + 0.3 * y;
            let t = 2.0 * p + 0.1 * ((i * 7 + r * 3) % 5) as f64;
            s.push_str(&format!("s{i},{x},{y},{r},P,{p}\ns{i},{x},{y},{r},T,{t}\n"));
        }
    }
    fs::write(path, s).unwrap();
}

#[test]
fn fit_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("long.csv");
    write_long(&path, 20, 2);
    let o = smoothconf(&["fit", "--data", path.to_str().unwrap(), "--response", "T", "--covariate", "P"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["terms"], serde_json::json!(["intercept", "P"]));
    assert_eq!(v["beta_hat"].as_array().unwrap().len(), 2);
    assert_eq!(v["n_used"], 20);
    assert_eq!(v["replicates"], 2);
    let slope = v["beta_hat"][1].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.2, "{slope}");

    let o = smoothconf(&["fit", "--data", path.to_str().unwrap(), "--response", "Q"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn incomplete_long_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("long.csv");
    write_long(&path, 6, 2);
    let text = fs::read_to_string(&path).unwrap();
    let truncated: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    fs::write(&path, truncated.join("\n") + "\n").unwrap();
    let o = smoothconf(&["fit", "--data", path.to_str().unwrap(), "--response", "T", "--covariate", "P"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1e-6..1e-6f64, Just(0.0), Just(f64::MIN_POSITIVE), Just(1e300)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_csv_round_trips(
        rows in prop::collection::vec(
            (1usize..5000, "[a-z_=0-9.]{1,8}", finite(), finite(), finite(), prop::option::of(finite()), 0usize..10),
            0..12,
        )
    ) {
        let mut table = ExperimentTable::new("t");
        for (n, key, m, lo, hi, rmse, failures) in rows {
            table.push(TableRow { n, key, mean_beta: m, band_lo: lo, band_hi: hi, rmse, failures });
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, table_to_csv(&table).unwrap()).unwrap();
        let back = read_table(&path).unwrap();
        prop_assert_eq!(back.rows, table.rows);
    }
}

#[test]
fn shipped_configs_parse() {
    use smoothconf_cli::config::{load_config, Family};
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let family = if name.starts_with("timeseries") {
            Family::Timeseries
        } else if name.starts_with("spatial") {
            Family::Spatial
        } else {
            Family::Application
        };
        load_config(&path, family, None).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 4);
}
