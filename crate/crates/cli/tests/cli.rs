use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn densfts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densfts"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic panel written by the `simulate` subcommand.
fn sample(dir: &TempDir) -> String {
    let out = densfts(&["simulate", "--states", "2", "--years", "20", "--outdir", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.path().join("panel.csv").to_str().unwrap().to_string()
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let p = dir.path().join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_prints_panel_shape() {
    let dir = TempDir::new().unwrap();
    let input = sample(&dir);
    let out = densfts(&["validate", "--input", &input]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("ok states=2 years=20 ages=111"), "{stdout}");
    assert!(!dir.path().join("gini.csv").exists());

    let out = densfts(&["validate", "--input", &input, "--outdir", path(dir.path())]);
    assert!(out.status.success());
    let gini = fs::read_to_string(dir.path().join("gini.csv")).unwrap();
    assert_eq!(gini.lines().next(), Some("state,gender,year,gini"));
    assert_eq!(gini.lines().count(), 1 + 2 * 2 * 20);
}

#[test]
fn backtest_is_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let input = sample(&dir);
    let config = write_config(&dir, "train_window = 15\nhorizon = 2\nseed = 4\n");
    let mut outputs = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let outdir = dir.path().join(run);
        let out = densfts(&[
            "backtest",
            "--config",
            &config,
            "--input",
            &input,
            "--outdir",
            path(&outdir),
            "--parallel",
            threads,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let files: Vec<Vec<u8>> = ["errors.csv", "plot.csv", "manifest.json"]
            .iter()
            .map(|f| fs::read(outdir.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let errors = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert_eq!(errors.lines().next(), Some("method,gender,horizon,kld_x100,jsd_x100"));
    assert!(errors.lines().any(|l| l.starts_with("fm,F,mean,")));
}

#[test]
fn fixed_order_is_recorded_for_every_state() {
    let dir = TempDir::new().unwrap();
    let input = sample(&dir);
    let config = write_config(&dir, "train_window = 15\nhorizon = 2\nk_rule = fixed:6\nmethods = fm,fmp\n");
    let outdir = dir.path().join("out");
    let out = densfts(&["backtest", "--config", &config, "--input", &input, "--outdir", path(&outdir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("manifest.json")).unwrap()).unwrap();
    let fits = manifest["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 2 * 4);
    for fit in fits {
        for state in fit["states"].as_array().unwrap() {
            assert_eq!(state["k"], 6);
            assert_eq!(state["orders"].as_array().unwrap().len(), 12);
            assert!(state["bandwidth"].as_f64().unwrap() >= 1.0);
        }
    }
    assert!(manifest["config_text"].as_str().unwrap().contains("k_rule = fixed:6"));
}

#[test]
fn manifest_config_reruns_the_same_backtest() {
    let dir = TempDir::new().unwrap();
    let input = sample(&dir);
    let config = write_config(&dir, "train_window = 16\nhorizon = 2\nmethods = fm,naive\nscheme = rolling\n");
    let first = dir.path().join("first");
    assert!(densfts(&["backtest", "--config", &config, "--input", &input, "--outdir", path(&first)])
        .status
        .success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    let echoed = dir.path().join("echo.cfg");
    fs::write(&echoed, manifest["config_text"].as_str().unwrap()).unwrap();
    let second = dir.path().join("second");
    assert!(densfts(&["backtest", "--config", path(&echoed), "--input", &input, "--outdir", path(&second)])
        .status
        .success());
    assert_eq!(
        fs::read(first.join("errors.csv")).unwrap(),
        fs::read(second.join("errors.csv")).unwrap()
    );
}

#[test]
fn inspection_commands_write_their_tables() {
    let dir = TempDir::new().unwrap();
    let input = sample(&dir);
    let out_dir = dir.path().join("inspect");
    let outdir = path(&out_dir);
    for cmd in ["transform", "decompose", "fpca"] {
        let out = densfts(&[cmd, "--input", &input, "--outdir", outdir]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let lines = |f: &str| fs::read_to_string(out_dir.join(f)).unwrap().lines().count();
    assert_eq!(lines("clr.csv"), 1 + 2 * 2 * 20);
    assert_eq!(lines("mu.csv"), 2);
    assert_eq!(lines("alpha.csv"), 3);
    assert_eq!(lines("beta.csv"), 3);
    assert_eq!(lines("residuals.csv"), 1 + 2 * 2 * 20);
    assert_eq!(lines("fpca_summary.csv"), 3);
    assert_eq!(lines("fpca_eigenvalues.csv"), 1 + 2 * 2 * 111);
    let header = fs::read_to_string(out_dir.join("beta.csv")).unwrap();
    assert!(header.starts_with("gender,0,1,2,"));
}

#[test]
fn forecast_and_report() {
    let dir = TempDir::new().unwrap();
    let input = sample(&dir);
    let config = write_config(&dir, "horizon = 3\nmethods = fm,gsy,naive\nclr = off\n");
    let outdir = dir.path().join("fc");
    let out = densfts(&["forecast", "--config", &config, "--input", &input, "--outdir", path(&outdir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(outdir.join("forecast.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2 * 3);
    assert!(text.lines().any(|l| l.starts_with("gsy_noclr,S01,F,1979,1,")));

    let errors = dir.path().join("errors.csv");
    fs::write(
        &errors,
        "method,gender,horizon,kld_x100,jsd_x100\nfm,F,1,2.0,0.5\nfm,F,mean,2.0,0.5\n",
    )
    .unwrap();
    let out = densfts(&["report", "--input", path(&errors)]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.contains("fm.F.kld"));
    assert!(table.lines().last().unwrap().trim_start().starts_with("mean"));
}

#[test]
fn errors_are_single_machine_readable_lines() {
    let dir = TempDir::new().unwrap();
    let input = sample(&dir);

    let bad = write_config(&dir, "horizon = 2\nwindowz = 3\n");
    let out = densfts(&["backtest", "--config", &bad, "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error kind=usage key=windowz "), "{stderr}");

    let short = write_config(&dir, "train_window = 19\nhorizon = 5\n");
    let out = densfts(&["backtest", "--config", &short, "--input", &input]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error kind=insufficient_data"));

    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "state,gender,year,age,dx\nA,F,2000,0,10\nA,X,2000,1,10\n").unwrap();
    let out = densfts(&["validate", "--input", path(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error kind=data"), "{stderr}");
    assert!(stderr.contains("broken.csv") && stderr.contains("row 3"), "{stderr}");

    let out = densfts(&["fpca", "--outdir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
