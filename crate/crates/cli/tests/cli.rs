//! Black-box checks of the binary surface: help, the exit-code contract,
//! and a tiny end-to-end pass. Deeper behavior lives in the acceptance
//! gates; this file only pins what a shell script would see.

use std::fs;
use std::process::{Command, Output};

fn facephq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facephq"))
        .args(args)
        .output()
        .expect("spawn facephq")
}

#[test]
fn help_exits_zero() {
    assert_eq!(facephq(&["--help"]).status.code(), Some(0));
    for cmd in ["ingest", "validate", "experiment", "ablate", "explain", "bias", "annotations", "synth", "report"] {
        let out = facephq(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd} --help");
    }
}

#[test]
fn usage_errors_exit_one() {
    // Unknown subcommand and unknown flag are clap usage errors.
    assert_eq!(facephq(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(facephq(&["ingest", "--bogus"]).status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");

    // Required input missing: named in the message, exit 1.
    let out = facephq(&["ingest", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("inputs.ema"), "stderr: {stderr}");

    // Malformed config file.
    let cfg = tmp.path().join("broken.toml");
    fs::write(&cfg, "[model\nkind=").unwrap();
    let out = facephq(&[
        "report",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    // Config field outside its domain for the command being run.
    let cfg = tmp.path().join("badsynth.toml");
    fs::write(&cfg, "[synth]\nimages_per_session = 9\n").unwrap();
    let out = facephq(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two_and_clean_runs_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "[synth]\n\
         n_participants = 4\n\
         sessions_mean = 6.0\n\
         sessions_std = 1.0\n\
         images_per_session = 1\n\
         signal_strength = 2.0\n\
         item_noise_std = 4.0\n\
         seed = 11\n\n\
         [model]\n\
         n_trees = 8\n\
         max_depth = 4\n\
         max_bins = 16\n\n\
         [split]\n\
         folds = 2\n\
         seed = 1\n",
    )
    .unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let cohort = tmp.path().join("cohort");
    let out_dir = tmp.path().join("out");
    let cohort_s = cohort.to_str().unwrap();
    let out_s = out_dir.to_str().unwrap();

    let out = facephq(&["synth", "--config", cfg_s, "--out", cohort_s]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let ema = cohort.join("ema.csv");
    let features = cohort.join("features.csv");
    let demographics = cohort.join("demographics.csv");
    let inputs = [
        "--ema",
        ema.to_str().unwrap(),
        "--features",
        features.to_str().unwrap(),
        "--demographics",
        demographics.to_str().unwrap(),
    ];

    // Clean end-to-end pass: experiment summary is JSON on stdout.
    let mut args = vec!["experiment", "--config", cfg_s, "--out", out_s];
    args.extend_from_slice(&inputs);
    let out = facephq(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["command"], "experiment");
    assert!(summary["metrics"]["balanced_accuracy"]["mean"].is_number());
    assert!(out_dir.join("manifest.json").exists());
    assert!(out_dir.join("experiment_report.json").exists());

    // A flag value the command actually parses: usage error, exit 1.
    let mut args = vec!["experiment", "--config", cfg_s, "--out", out_s, "--feature-set", "??"];
    args.extend_from_slice(&inputs);
    assert_eq!(facephq(&args).status.code(), Some(1));

    // Drop the last column: schema violation, exit 2.
    let text = fs::read_to_string(&features).unwrap();
    let broken: String = text
        .lines()
        .map(|line| line.rsplit_once(',').unwrap().0)
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&features, broken + "\n").unwrap();
    let mut args = vec!["ingest", "--config", cfg_s, "--out", out_s];
    args.extend_from_slice(&inputs);
    let out = facephq(&args);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("schema error: missing"), "stderr: {stderr}");
}
