//! End-to-end CLI checks, run in-process.

use lfit::cli::main_with_args;
use std::path::Path;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("lfit").chain(args.iter().copied()))
}

#[test]
fn simulate_writes_a_loadable_ricker_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let code = run(&[
        "simulate",
        "--model",
        "ricker",
        "--n",
        "1000",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let table = lfit::io::load_table(&out).unwrap();
    assert_eq!(table.n_sims(), 1000);
    assert_eq!(table.param_dim(), 3);
    assert_eq!(table.summary_dim(), 124);
    assert_eq!(table.meta().model, "ricker");
    assert!(out.with_extension("csv.columns.txt").exists());
}

#[test]
fn simulate_binary_and_csv_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let bin = dir.path().join("t.bin");
    for out in [&csv, &bin] {
        let code = run(&[
            "simulate",
            "--model",
            "gk",
            "--n",
            "50",
            "--seed",
            "3",
            "--n-obs",
            "400",
            "--n-quantiles",
            "10",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let a = lfit::io::load_table(&csv).unwrap();
    let b = lfit::io::load_table(&bin).unwrap();
    assert_eq!(a, b);
}

#[test]
fn run_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("toy.cfg");
    std::fs::write(
        &config_path,
        "model = toy\nn_sims = 1000\nn_test = 2\nmethods = Reg,localReg\n",
    )
    .unwrap();

    let mut outputs = Vec::new();
    for name in ["run1", "run2"] {
        let out = dir.path().join(name);
        let code = run(&[
            "run",
            "--config",
            config_path.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        outputs.push(std::fs::read(out.join("report.csv")).unwrap());
        for plot in ["srmse_by_method.csv", "relative_srmse.csv", "chosen_lambda.csv"] {
            assert!(out.join(plot).exists(), "{plot} missing");
        }
        assert!(out.join("timings.csv").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn plot_data_recomputes_from_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("toy.cfg");
    std::fs::write(
        &config_path,
        "model = toy\nn_sims = 800\nn_test = 2\nseed = 9\nmethods = Reg,localRegopt\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        run(&[
            "run",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    let replot = dir.path().join("replot");
    assert_eq!(
        run(&[
            "plot-data",
            "--report",
            out.join("report.csv").to_str().unwrap(),
            "--out",
            replot.to_str().unwrap(),
        ]),
        0
    );
    for name in ["srmse_by_method.csv", "relative_srmse.csv", "chosen_lambda.csv"] {
        let a = std::fs::read(out.join(name)).unwrap();
        let b = std::fs::read(replot.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs after replotting");
    }
}

#[test]
fn missing_config_is_a_usage_failure() {
    let code = run(&["run", "--config", "/nonexistent/path.cfg"]);
    assert_ne!(code, 0);
}

#[test]
fn unknown_flags_fail_with_nonzero_exit() {
    assert_ne!(run(&["run", "--confg", "x"]), 0);
    assert_ne!(run(&["frobnicate"]), 0);
}

#[test]
fn transform_bundle_round_trips_and_applies() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = dir.path().join("t.csv");
    assert_eq!(
        run(&[
            "simulate",
            "--model",
            "gk",
            "--n",
            "300",
            "--seed",
            "5",
            "--n-obs",
            "500",
            "--n-quantiles",
            "8",
            "--out",
            table_path.to_str().unwrap(),
        ]),
        0
    );

    // Raw summary vectors to transform: reuse two table rows.
    let table = lfit::io::load_table(&table_path).unwrap();
    let apply_path = dir.path().join("raw.csv");
    let mut lines = String::new();
    for i in 0..2 {
        let row: Vec<String> = table.summary_row(i).iter().map(|v| v.to_string()).collect();
        lines.push_str(&row.join(","));
        lines.push('\n');
    }
    std::fs::write(&apply_path, lines).unwrap();

    let bundle_path = dir.path().join("transform.json");
    let transformed_path = dir.path().join("transformed.csv");
    assert_eq!(
        run(&[
            "transform",
            "--table",
            table_path.to_str().unwrap(),
            "--method",
            "pls",
            "--components",
            "3",
            "--out",
            bundle_path.to_str().unwrap(),
            "--apply",
            apply_path.to_str().unwrap(),
            "--transformed",
            transformed_path.to_str().unwrap(),
        ]),
        0
    );

    let json = std::fs::read_to_string(&bundle_path).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(parsed.get("preprocessor").is_some());
    assert!(parsed.get("transformation").is_some());

    let transformed = std::fs::read_to_string(&transformed_path).unwrap();
    let mut lines = transformed.lines();
    assert_eq!(lines.next().unwrap(), "t_1,t_2,t_3");
    assert_eq!(lines.count(), 2);
}

#[test]
fn run_writes_diagnostics_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let diag_dir = dir.path().join("diag");
    let config_path = dir.path().join("toy.cfg");
    std::fs::write(
        &config_path,
        format!(
            "model = toy\nn_sims = 900\nn_test = 1\nseed = 2\nmethods = localRegopt\n\
             diagnostics_dir = {}\n",
            diag_dir.display()
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        run(&[
            "run",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    assert!(Path::new(&diag_dir.join("test0_localRegopt.surface.csv")).exists());
    assert!(Path::new(&diag_dir.join("test0_localRegopt.ivalid.csv")).exists());
}

#[test]
fn test_data_subcommand_writes_truths_and_observations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tests.csv");
    assert_eq!(
        run(&[
            "test-data",
            "--model",
            "ricker",
            "--n-test",
            "4",
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("test_idx,theta_1,theta_2,theta_3,y_1"));
    assert_eq!(lines.count(), 4);
}
