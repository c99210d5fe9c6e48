use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seeds = [0, 1]
modes = ["full", "strict"]
model_set = ["logreg", "gbdt", "hyb_poly2", "phys_oracle"]

[synth]
n_rows = 500

[pipeline.models.gbdt]
n_trees = 20
"#;

fn uavq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavq")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn small_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let run = |out: &Path, jobs: &str, extra: &[&str]| {
        let mut args = vec!["run", "--config", s(&cfg), "--out", s(out), "--jobs", jobs];
        args.extend_from_slice(extra);
        let o = uavq(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(&a, "1", &[]);
    let first = fs::read(a.join("results.csv")).unwrap();
    let first_cfg = fs::read(a.join("config.toml")).unwrap();
    run(&a, "1", &["--overwrite"]);
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), first);
    assert_eq!(fs::read(a.join("config.toml")).unwrap(), first_cfg);
    // the thread count never changes results
    run(&b, "2", &[]);
    assert_eq!(fs::read(b.join("results.csv")).unwrap(), first);
    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 4);

    let o = uavq(&["run", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(code(&o), 1, "existing run must not be overwritten silently");

    let o = uavq(&["aggregate", s(&a)]);
    assert_eq!(code(&o), 0);
    let agg = a.join("aggregate.csv");
    assert_eq!(fs::read_to_string(&agg).unwrap(), String::from_utf8(o.stdout).unwrap());

    let charts = dir.path().join("charts");
    let o = uavq(&["report", s(&agg), "--out", s(&charts)]);
    assert_eq!(code(&o), 0);
    let svg = fs::read_to_string(charts.join("f1_macro.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    assert_eq!(code(&uavq(&["frobnicate"])), 1);
    assert_eq!(code(&uavq(&["run", "--seeds", "5-2"])), 1);
    assert_eq!(code(&uavq(&["run", "--models", "svm"])), 1);
    assert_eq!(code(&uavq(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&uavq(&["aggregate", s(dir.path())])), 2);
    let missing = dir.path().join("nope.csv");
    let out = dir.path().join("out");
    assert_eq!(code(&uavq(&["run", "--table", s(&missing), "--out", s(&out)])), 2);
}

#[test]
fn single_class_table_exits_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("flat.csv");
    let mut text = String::from("TimeUS,a,b,label\n");
    for i in 0..200 {
        text.push_str(&format!("{i},{},{},0\n", i % 7, i % 11));
    }
    fs::write(&table, text).unwrap();
    let lists = dir.path().join("lists.toml");
    fs::write(&lists, "version = \"t\"\nloose_drop = []\nstrict_keep = [\"a\", \"b\"]\n").unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        format!(
            "dataset = {:?}\nmode_lists = {:?}\nseeds = [0, 1]\nmodes = [\"full\"]\nmodel_set = [\"logreg\"]\n[pipeline]\ntop_k = 2\n[pipeline.dru]\nn_qubits = 2\n",
            s(&table),
            s(&lists)
        ),
    )
    .unwrap();
    let o = uavq(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("r"))]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn ingest_then_fusion_audit() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    fs::create_dir(&raw).unwrap();
    let mut imu = String::from("TimeUS,AccX,AccY,label\n");
    let mut gps = String::from("TimeUS,Spd\n");
    for i in 0..60u32 {
        let x = f64::from((i * 37) % 23) / 7.0;
        imu.push_str(&format!("{},{x},{},{}\n", 1000 + i * 100, f64::from(i % 5), u32::from(i >= 30)));
        gps.push_str(&format!("{},{x}\n", 950 + i * 100));
    }
    fs::write(raw.join("IMU.csv"), imu).unwrap();
    fs::write(raw.join("GPS.csv"), gps).unwrap();
    let table = dir.path().join("table.csv");
    let o = uavq(&["ingest", s(&raw), "--out", s(&table), "--base", "IMU"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    // Spd copies AccX at every aligned row
    let report_dir = dir.path().join("audit");
    let o = uavq(&["audit", "fusion", "--table", s(&table), "--out", s(&report_dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("AccX == Spd"), "{text}");
    assert!(report_dir.join("fusion_audit.csv").exists());

    let o = uavq(&["audit", "fusion", "--table", s(&table), "--pair", "AccX"]);
    assert_eq!(code(&o), 1);
}
