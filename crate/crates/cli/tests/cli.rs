use std::fs;
use std::path::Path;
use std::process::Command;

use clap::Parser;
use frontier_cli::config::{ExperimentKind, HurstInput};
use frontier_cli::output::{CliError, Table, THRESHOLD_PLOT_COLUMNS};
use frontier_cli::{
    emit_plot_data, execute, load_config, parse_config, parse_hurst, parse_n_range, read_results_csv, resolve_out_dir,
    Cli, ExperimentConfig,
};
use frontier_core::FrontierError;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frontier"))
}

fn run_args(args: &[&str]) -> (i32, String, String) {
    let cli = Cli::try_parse_from(std::iter::once("frontier").chain(args.iter().copied())).expect("valid flags");
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = execute(&cli, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn hurst_lists_parse_and_name_bad_entries() {
    assert_eq!(parse_hurst("0.5, 0.25,0.1").unwrap(), vec![0.5, 0.25, 0.1]);
    let e = parse_hurst("0.5,x").unwrap_err();
    assert_eq!(e.field, "hurst[1]");
    assert!(parse_hurst("").is_err());
    assert_eq!(parse_hurst("0.5,NaN").unwrap_err().field, "hurst[1]");
    assert_eq!(parse_hurst("inf").unwrap_err().field, "hurst[0]");
}

#[test]
fn n_ranges_parse_inclusively() {
    assert_eq!(parse_n_range("4..12").unwrap(), (4, 12));
    assert_eq!(parse_n_range("4..=12").unwrap(), (4, 12));
    assert_eq!(parse_n_range(" 7 ").unwrap(), (7, 7));
    assert!(parse_n_range("12..4").is_err());
    assert!(parse_n_range("-1..4").is_err());
    assert!(parse_n_range("4..").is_err());
    assert!(parse_n_range("1..2000000").is_err());
}

#[test]
fn config_files_reject_unknown_fields_with_their_name() {
    let e = parse_config("d = 1\nbogus = 3\n").unwrap_err();
    assert!(e.message.contains("bogus"), "{e}");
    let e = parse_config("[wave]\nquantity = \"ia\"\nwhat = 1\n").unwrap_err();
    assert!(e.message.contains("what"), "{e}");
    let e = parse_config("d = \"one\"\n").unwrap_err();
    assert_eq!(e.field, "d");
}

#[test]
fn config_files_accept_the_documented_schema() {
    let text = r#"
        experiment = "wave-moment"
        d = 1
        hurst = [0.4, 0.4]
        n_range = "6..8"
        samples = 1000
        seed = 7
        [test_function]
        phi_support = [0.5, 1.0]
        psi_width = 0.5
        [mollifier]
        kind = "bump"
        scale = 2.0
        [grid]
        cells_per_axis = 16
        [wave]
        quantity = "kh"
        alpha = 0.24
        [scan]
        uniform = [0.1, 0.2]
        [simulate]
        mode = "none"
    "#;
    let c = parse_config(text).unwrap();
    assert_eq!(c.experiment, Some(ExperimentKind::WaveMoment));
    assert_eq!(c.hurst, Some(HurstInput::List(vec![0.4, 0.4])));
    let v = c.validate(ExperimentKind::WaveMoment).unwrap();
    assert_eq!(v.n_range, (6, 8));
    assert_eq!(v.mollifier.scale, 2.0);
    assert_eq!(v.grid.cells_per_axis, 16);
}

#[test]
fn hurst_out_of_range_is_a_config_error_naming_the_index() {
    let mut c = ExperimentConfig {
        d: Some(1),
        hurst: Some(HurstInput::Text("0.5,0.9".into())),
        ..Default::default()
    };
    let e = c.validate(ExperimentKind::Classify).unwrap_err();
    assert_eq!(e.field, "hurst[1]");
    c.hurst = Some(HurstInput::List(vec![1.0, 0.3]));
    assert_eq!(c.validate(ExperimentKind::Diverge).unwrap_err().field, "hurst[0]");
    c.hurst = Some(HurstInput::List(vec![0.5, 0.3, 0.3]));
    assert_eq!(c.validate(ExperimentKind::Diverge).unwrap_err().field, "hurst");
}

#[test]
fn validation_checks_the_other_sections() {
    let base = ExperimentConfig {
        d: Some(1),
        hurst: Some(HurstInput::List(vec![0.3, 0.3])),
        ..Default::default()
    };
    let field = |f: &dyn Fn(&mut ExperimentConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c.validate(ExperimentKind::Simulate).unwrap_err().field
    };
    assert_eq!(field(&|c| c.replicas = Some(1)), "replicas");
    assert_eq!(field(&|c| c.tol = Some(-1.0)), "tol");
    assert_eq!(field(&|c| c.threads = Some(0)), "threads");
    assert_eq!(field(&|c| c.grid.cells_per_axis = 7), "grid.cells_per_axis");
    assert_eq!(field(&|c| c.mollifier.kind = "box".into()), "mollifier.kind");
    assert_eq!(
        field(&|c| c.test_function.phi_support = [1.0, 0.5]),
        "test_function.phi_support"
    );
    assert_eq!(field(&|c| c.simulate.mode = "custom".into()), "simulate.mode");
    assert_eq!(field(&|c| c.d = Some(3)), "d");
    assert_eq!(field(&|c| c.n_range = Some("0..3".into())), "n_range");
    assert_eq!(field(&|c| c.n_range = Some("4..99".into())), "n_range");
}

#[test]
fn config_hash_tracks_content_only() {
    let c = ExperimentConfig {
        d: Some(1),
        hurst: Some(HurstInput::Text("0.3,0.3".into())),
        ..Default::default()
    };
    let a = c.validate(ExperimentKind::Diverge).unwrap();
    let mut c2 = c.clone();
    c2.hurst = Some(HurstInput::List(vec![0.3, 0.3]));
    c2.threads = Some(3);
    c2.out = Some("elsewhere".into());
    assert_eq!(a.hash(), c2.validate(ExperimentKind::Diverge).unwrap().hash());
    c2.seed = Some(1);
    assert_ne!(a.hash(), c2.validate(ExperimentKind::Diverge).unwrap().hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    fs::write(&file, "d = 2\nhurst = \"0.5,0.5,0.5\"\nseed = 5\nout = \"from-file\"\n").unwrap();
    let cli = Cli::try_parse_from([
        "frontier",
        "classify",
        "--config",
        path_str(&file),
        "--seed",
        "9",
        "--d",
        "1",
    ])
    .unwrap();
    let c = load_config(cli.command.parts().1).unwrap();
    assert_eq!(c.seed, Some(9));
    assert_eq!(c.d, Some(1));
    assert_eq!(c.hurst, Some(HurstInput::Text("0.5,0.5,0.5".into())));
    assert_eq!(resolve_out_dir(&c), Path::new("from-file"));
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let c = ExperimentConfig::default();
    std::env::set_var(frontier_cli::OUT_DIR_ENV, "/tmp/env-out");
    assert_eq!(resolve_out_dir(&c), Path::new("/tmp/env-out"));
    std::env::remove_var(frontier_cli::OUT_DIR_ENV);
    assert_eq!(resolve_out_dir(&c), Path::new(frontier_cli::DEFAULT_OUT_DIR));
}

#[test]
fn tables_round_trip_exactly() {
    let vals = [0.1, 1.0 / 3.0, 5e-324, f64::MAX, -2.5e-17, 1e21, 123_456_789.123_456_79];
    let mut t = Table::new(&["name", "x"]);
    for (i, v) in vals.iter().enumerate() {
        t.push(vec![format!("r{i}, \"q\""), frontier_cli::output::fmt_f64(*v)]);
    }
    t.push(vec![String::new(), String::new()]);
    let back = read_results_csv(&t.to_csv()).unwrap();
    assert_eq!(back, t);
    for (i, v) in vals.iter().enumerate() {
        assert_eq!(back.f64_at(i, "x").unwrap().to_bits(), v.to_bits());
    }
    assert!(read_results_csv("").is_err());
    assert!(read_results_csv("a,b\n1,2,3\n").is_err());
}

#[test]
fn plot_data_refuses_empty_results_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let empty = Table::new(&THRESHOLD_PLOT_COLUMNS);
    match emit_plot_data(dir.path(), "x", &empty) {
        Err(CliError::Compute(FrontierError::DegenerateInput(_))) => {}
        other => panic!("expected DegenerateInput, got {other:?}"),
    }
    let mut t = Table::new(&THRESHOLD_PLOT_COLUMNS);
    t.push(vec![
        "0.1".into(),
        "0.2".into(),
        "wick".into(),
        "0.01".into(),
        "".into(),
    ]);
    let p = emit_plot_data(dir.path(), "x", &t).unwrap();
    assert_eq!(frontier_cli::output::read_results_file(&p).unwrap(), t);
}

#[test]
fn classify_prints_the_label() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path());
    let (code, stdout, _) = run_args(&["classify", "--d", "4", "--hurst", "0.5,0.5,0.5,0.5,0.5", "--out", out]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "IllPosed");
    let (_, stdout, _) = run_args(&["classify", "--d", "2", "--hurst", "0.3,0.4,0.4", "--out", out]);
    assert_eq!(stdout.trim(), "WickRenormalizable");
    let (_, stdout, _) = run_args(&["classify", "--d", "1", "--hurst", "0.5,0.3", "--out", out]);
    assert_eq!(stdout.trim(), "RegularNoRenorm");
    let t = frontier_cli::output::read_results_file(&dir.path().join("classify.csv")).unwrap();
    assert_eq!(t.rows.len(), 1);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("classify.manifest.json")).unwrap()).unwrap();
    assert_eq!(t.rows[0][0], manifest["config_hash"].as_str().unwrap());
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["records"].as_array().unwrap().len(), 1);
}

#[test]
fn malformed_hurst_exits_nonzero_with_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "classify",
            "--d",
            "1",
            "--hurst",
            "0.5,0.9",
            "--out",
            path_str(dir.path()),
        ])
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(0));
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(rec["kind"], "ConfigError");
    assert_eq!(rec["field"], "hurst[1]");
    let file: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("error.json")).unwrap()).unwrap();
    assert_eq!(file, rec);
}

#[test]
fn config_for_another_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    fs::write(&file, "experiment = \"simulate\"\n").unwrap();
    let (code, _, err) = run_args(&["classify", "--config", path_str(&file), "--out", path_str(dir.path())]);
    assert_eq!(code, 2);
    assert!(err.contains("\"field\":\"experiment\""), "{err}");
}

#[test]
fn missing_config_file_is_an_io_error_with_its_path() {
    let (code, _, err) = run_args(&["classify", "--config", "/nonexistent/frontier.toml"]);
    assert_eq!(code, 3);
    assert!(err.contains("/nonexistent/frontier.toml"), "{err}");
}

fn simulate_into(dir: &Path, threads: &str) -> String {
    let (code, _, err) = run_args(&[
        "simulate",
        "--d",
        "1",
        "--hurst",
        "0.2,0.2",
        "--n",
        "2..3",
        "--replicas",
        "50",
        "--seed",
        "11",
        "--threads",
        threads,
        "--config",
        path_str(&dir.join("c.toml")),
        "--out",
        path_str(dir),
    ]);
    assert_eq!(code, 0, "{err}");
    fs::read_to_string(dir.join("simulate.csv")).unwrap()
}

#[test]
fn simulate_tables_are_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        fs::write(d.path().join("c.toml"), "[grid]\ncells_per_axis = 8\n").unwrap();
    }
    let x = simulate_into(a.path(), "1");
    let y = simulate_into(b.path(), "2");
    assert_eq!(x, y);
    let t = read_results_csv(&x).unwrap();
    assert_eq!(t.rows.len(), 2);
    for name in ["run_id", "n", "replicas", "mean", "std_error", "seed", "grid_hash"] {
        assert!(t.column(name).is_some(), "missing {name}");
    }
    assert_eq!(t.f64_at(0, "seed"), Some(11.0));
    let ma: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("simulate.manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["threads"], 1);
    assert!(a.path().join("simulate.plot.csv").exists());
}

#[test]
fn threshold_scan_isolates_failed_points() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    // two levels cannot support a growth fit, so every point fails its fit
    fs::write(
        &file,
        "d = 1\nn_range = \"2..3\"\nsamples = 200\n[scan]\nuniform = [0.1, 0.3]\n",
    )
    .unwrap();
    let (code, stdout, err) = run_args(&[
        "threshold-scan",
        "--config",
        path_str(&file),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("0 of 0"), "{stdout}");
    let t = frontier_cli::output::read_results_file(&dir.path().join("threshold-scan.csv")).unwrap();
    assert_eq!(t.rows.len(), 2);
    let e = t.column("error").unwrap();
    assert!(t.rows.iter().all(|r| !r[e].is_empty()));
    let plot = frontier_cli::output::read_results_file(&dir.path().join("threshold-scan.plot.csv")).unwrap();
    assert_eq!(plot.columns, THRESHOLD_PLOT_COLUMNS);
    assert_eq!(plot.rows.len(), 2);
    assert_eq!(plot.rows[0][2], "ill-posed");
    assert_eq!(plot.rows[1][2], "regular");
}

#[test]
fn levy_scan_emits_nine_rows_and_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, err) = run_args(&[
        "levy-scan",
        "--hurst",
        "0.125",
        "--n",
        "4..12",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("slope"), "{stdout}");
    let t = frontier_cli::output::read_results_file(&dir.path().join("levy-scan.csv")).unwrap();
    let kind = t.column("row").unwrap();
    let data: Vec<_> = t.rows.iter().filter(|r| r[kind] == "data").collect();
    assert_eq!(data.len(), 9);
    let fit = t.rows.iter().filter(|r| r[kind] == "fit").count();
    assert_eq!(fit, 1);
    for name in ["n", "A_n", "J_M", "J_MR", "slope"] {
        assert!(t.column(name).is_some(), "missing {name}");
    }
    let plot = frontier_cli::output::read_results_file(&dir.path().join("levy-scan.plot.csv")).unwrap();
    let y = plot.column("y").unwrap();
    let l = plot.column("log2_y").unwrap();
    for r in &plot.rows {
        let v: f64 = r[y].parse().unwrap();
        if v > 0.0 {
            assert_eq!(r[l].parse::<f64>().unwrap(), v.log2());
        }
    }
}

#[test]
fn wave_probe_reports_the_decay_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    fs::write(
        &file,
        "d = 1\nhurst = [0.5, 0.5]\nn_range = \"1000\"\n[wave]\nquantity = \"probe\"\n",
    )
    .unwrap();
    let (code, stdout, err) = run_args(&[
        "wave-moment",
        "--config",
        path_str(&file),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("decay exponent"), "{stdout}");
    let t = frontier_cli::output::read_results_file(&dir.path().join("wave-moment.csv")).unwrap();
    let comp = t.column("component").unwrap();
    let row = t.rows.iter().position(|r| r[comp] == "decay_exponent").unwrap();
    assert!(t.f64_at(row, "value").unwrap() > 1.96 - 0.1);
}
