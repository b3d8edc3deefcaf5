//! Pipeline smoke tests through the real binary: subcommand chaining,
//! exit codes, determinism, file contracts.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dualview")
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) {
    let (code, _, stderr) = run(args);
    assert_eq!(code, 0, "command {args:?} failed:\n{stderr}");
}

fn write_tiny_train_config(path: &Path) {
    std::fs::write(
        path,
        r#"{
  "learning_rate": 1e-3, "batch_size": 2, "epochs": 2, "seed": 5,
  "timesteps": 8, "beta_start": 0.01, "beta_end": 0.3,
  "model": {"base_width": 4, "depth": 1, "time_embed_dim": 8}
}"#,
    )
    .unwrap();
}

#[test]
fn phantom_then_encode_produces_triples() {
    let dir = tmpdir("pipe_phantom_encode");
    let ph = dir.join("ph");
    let enc = dir.join("enc");
    ok(&[
        "phantom", "-n", "4", "--size", "32", "--seed", "1",
        "--out", ph.to_str().unwrap(),
    ]);
    ok(&[
        "encode",
        "--manifest", ph.join("manifest.json").to_str().unwrap(),
        "--out", enc.to_str().unwrap(),
    ]);
    let stems = dualview_cli::container::scan_stems(&enc).unwrap();
    assert_eq!(stems.len(), 4);
    // manifests chain without manual editing
    let (man, base) =
        dualview_cli::manifest::Manifest::load(&enc.join("manifest.json")).unwrap();
    assert_eq!(man.entries.len(), 4);
    man.load_pairs(&base).unwrap();
}

#[test]
fn unknown_flags_are_usage_errors() {
    let (code, _, stderr) = run(&["phantom", "--bogus-flag", "1"]);
    assert_eq!(code, 1);
    assert!(!stderr.is_empty());

    let (code, _, _) = run(&["not-a-command"]);
    assert_eq!(code, 1);

    let (code, _, _) = run(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tmpdir("pipe_data_err");
    // nonexistent manifest
    let (code, _, stderr) = run(&[
        "encode",
        "--manifest", dir.join("absent.json").to_str().unwrap(),
        "--out", dir.join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stderr}");

    // invalid phantom config (correlation out of range)
    let (code, _, _) = run(&[
        "phantom", "-n", "1", "--correlation", "1.5",
        "--out", dir.join("p").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);

    // evaluate with a bad source label
    let (code, _, _) = run(&[
        "evaluate", "--in", dir.to_str().unwrap(), "--source", "fake",
        "--out", dir.join("m.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn sample_writes_exactly_four_files_per_sample() {
    let dir = tmpdir("pipe_sample_files");
    let ph = dir.join("ph");
    let ckpt = dir.join("run").join("m.ckpt");
    ok(&[
        "phantom", "-n", "4", "--size", "16", "--seed", "2",
        "--out", ph.to_str().unwrap(),
    ]);
    let cfg = dir.join("train.json");
    write_tiny_train_config(&cfg);
    ok(&[
        "train",
        "--data", ph.to_str().unwrap(),
        "--config", cfg.to_str().unwrap(),
        "--out", ckpt.to_str().unwrap(),
    ]);

    let samp = dir.join("samp");
    ok(&[
        "sample", "--ckpt", ckpt.to_str().unwrap(),
        "-n", "1", "--seed", "3", "--out", samp.to_str().unwrap(),
    ]);
    let mut files: Vec<String> = std::fs::read_dir(&samp)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(
        files,
        vec![
            "sample-0000_cc.png",
            "sample-0000_diff.png",
            "sample-0000_mlo.png",
            "sample-0000_preview.png"
        ]
    );
}

#[test]
fn sampling_is_reproducible_and_seed_sensitive() {
    let dir = tmpdir("pipe_sample_repro");
    let ph = dir.join("ph");
    let ckpt = dir.join("run").join("m.ckpt");
    ok(&[
        "phantom", "-n", "4", "--size", "16", "--seed", "2",
        "--out", ph.to_str().unwrap(),
    ]);
    let cfg = dir.join("train.json");
    write_tiny_train_config(&cfg);
    ok(&[
        "train",
        "--data", ph.to_str().unwrap(),
        "--config", cfg.to_str().unwrap(),
        "--out", ckpt.to_str().unwrap(),
    ]);

    let (a, b, c) = (dir.join("a"), dir.join("b"), dir.join("c"));
    for (out, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        ok(&[
            "sample", "--ckpt", ckpt.to_str().unwrap(),
            "-n", "2", "--seed", seed, "--out", out.to_str().unwrap(),
        ]);
    }
    for name in ["sample-0000_cc.png", "sample-0001_mlo.png", "sample-0000_preview.png"] {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fb = std::fs::read(b.join(name)).unwrap();
        assert_eq!(fa, fb, "same seed must give identical bytes for {name}");
    }
    let fa = std::fs::read(a.join("sample-0000_cc.png")).unwrap();
    let fc = std::fs::read(c.join("sample-0000_cc.png")).unwrap();
    assert_ne!(fa, fc, "different seeds must differ");
}

#[test]
fn full_pipeline_emits_report() {
    let dir = tmpdir("pipe_full");
    let ph = dir.join("ph");
    let ckpt = dir.join("run").join("m.ckpt");
    ok(&[
        "phantom", "-n", "6", "--size", "16", "--seed", "8",
        "--out", ph.to_str().unwrap(),
    ]);
    let cfg = dir.join("train.json");
    write_tiny_train_config(&cfg);
    ok(&[
        "train",
        "--data", ph.to_str().unwrap(),
        "--config", cfg.to_str().unwrap(),
        "--out", ckpt.to_str().unwrap(),
    ]);
    assert!(ckpt.with_extension("losses.csv").exists());
    assert!(ckpt.with_extension("report.json").exists());

    let samp = dir.join("samp");
    ok(&[
        "sample", "--ckpt", ckpt.to_str().unwrap(),
        "-n", "4", "--seed", "1", "--out", samp.to_str().unwrap(),
    ]);

    let post = dir.join("post");
    ok(&[
        "postprocess", "--in", samp.to_str().unwrap(),
        "--out", post.to_str().unwrap(),
    ]);

    let masks = dir.join("masks");
    ok(&["segment", "--in", post.to_str().unwrap(), "--out", masks.to_str().unwrap()]);
    assert_eq!(std::fs::read_dir(&masks).unwrap().count(), 8);

    let real_csv = dir.join("real.csv");
    let syn_csv = dir.join("syn.csv");
    ok(&[
        "evaluate", "--in", ph.to_str().unwrap(),
        "--source", "real", "--out", real_csv.to_str().unwrap(),
    ]);
    ok(&[
        "evaluate", "--in", post.to_str().unwrap(),
        "--source", "synthetic", "--out", syn_csv.to_str().unwrap(),
    ]);

    let report = dir.join("report.json");
    ok(&[
        "stats", "--real", real_csv.to_str().unwrap(),
        "--synthetic", syn_csv.to_str().unwrap(),
        "--out", report.to_str().unwrap(),
    ]);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(doc["groups"]["real"]["iou"]["mean"].is_number());
    assert!(doc["distribution_tests"]["dsc"]["ks_d"].is_number());
    assert_eq!(doc["plot"].as_array().unwrap().len(), 4);
}

#[test]
fn preprocess_resizes_and_chains() {
    let dir = tmpdir("pipe_preprocess");
    let ph = dir.join("ph");
    ok(&[
        "phantom", "-n", "3", "--size", "32", "--seed", "4",
        "--out", ph.to_str().unwrap(),
    ]);

    // default reference: the first image of the dataset
    let prep = dir.join("prep");
    ok(&[
        "preprocess",
        "--manifest", ph.join("manifest.json").to_str().unwrap(),
        "--out", prep.to_str().unwrap(),
        "--size", "16",
    ]);
    let (man, base) =
        dualview_cli::manifest::Manifest::load(&prep.join("manifest.json")).unwrap();
    let pairs = man.load_pairs(&base).unwrap();
    assert_eq!(pairs.len(), 3);
    for p in &pairs {
        assert_eq!(p.cc.dims(), (16, 16));
        assert!(p.cc.in_unit_range());
    }

    // explicit reference-CDF file
    let refpath = dir.join("uniform.cdf");
    dualview_cli::refcdf::save(
        &dualview_core::preprocess::ReferenceCdf::uniform(),
        &refpath,
    )
    .unwrap();
    let prep2 = dir.join("prep2");
    ok(&[
        "preprocess",
        "--manifest", ph.join("manifest.json").to_str().unwrap(),
        "--out", prep2.to_str().unwrap(),
        "--reference", refpath.to_str().unwrap(),
        "--size", "16",
    ]);
    // a matched-to-uniform dataset differs from the self-referenced one
    let (man2, base2) =
        dualview_cli::manifest::Manifest::load(&prep2.join("manifest.json")).unwrap();
    let pairs2 = man2.load_pairs(&base2).unwrap();
    assert_ne!(pairs[0].cc, pairs2[0].cc);

    // encode accepts the preprocessed manifest directly
    let enc = dir.join("enc");
    ok(&[
        "encode",
        "--manifest", prep.join("manifest.json").to_str().unwrap(),
        "--out", enc.to_str().unwrap(),
    ]);
    assert_eq!(dualview_cli::container::scan_stems(&enc).unwrap().len(), 3);
}

#[test]
fn train_reports_and_periodic_checkpoints() {
    let dir = tmpdir("pipe_train_report");
    let ph = dir.join("ph");
    ok(&[
        "phantom", "-n", "4", "--size", "16", "--seed", "6",
        "--out", ph.to_str().unwrap(),
    ]);
    let cfg = dir.join("train.json");
    std::fs::write(
        &cfg,
        r#"{
  "learning_rate": 1e-3, "batch_size": 2, "epochs": 3, "seed": 5,
  "timesteps": 8, "beta_start": 0.01, "beta_end": 0.3,
  "model": {"base_width": 4, "depth": 1, "time_embed_dim": 8},
  "checkpoint_every": 1
}"#,
    )
    .unwrap();
    let ckpt = dir.join("m.ckpt");
    ok(&[
        "train",
        "--data", ph.to_str().unwrap(),
        "--config", cfg.to_str().unwrap(),
        "--out", ckpt.to_str().unwrap(),
    ]);

    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ckpt.with_extension("report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["epochs"], 3);
    assert_eq!(report["epoch_losses"].as_array().unwrap().len(), 3);
    assert!(report["wall_time_secs"].as_f64().unwrap() >= 0.0);

    let losses = std::fs::read_to_string(ckpt.with_extension("losses.csv")).unwrap();
    assert!(losses.starts_with("epoch,mean_loss\n"));
    assert_eq!(losses.lines().count(), 4);

    let loaded = dualview_cli::checkpoint::load(&ckpt).unwrap();
    assert_eq!(loaded.header.step, 6); // 3 epochs × ceil(4/2) steps
    assert_eq!(loaded.header.train_height, 16);
}

#[test]
fn schedule_dump_matches_core_schedule() {
    let dir = tmpdir("pipe_sched");
    let out = dir.join("sched.csv");
    ok(&[
        "schedule-dump", "--timesteps", "10",
        "--beta-start", "0.001", "--beta-end", "0.2",
        "--out", out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,beta,alpha,alpha_bar"));
    let sched = dualview_core::diffusion::NoiseSchedule::linear(10, 0.001, 0.2).unwrap();
    for (t, line) in (1..=10).zip(lines) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0].parse::<usize>().unwrap(), t);
        assert_eq!(fields[1].parse::<f64>().unwrap(), sched.beta(t));
        assert_eq!(fields[3].parse::<f64>().unwrap(), sched.alpha_bar(t));
    }
}

#[test]
fn threads_flag_does_not_change_results() {
    let dir = tmpdir("pipe_threads");
    let (p1, p2) = (dir.join("t1"), dir.join("t2"));
    ok(&[
        "phantom", "-n", "4", "--size", "16", "--seed", "5",
        "--out", p1.to_str().unwrap(), "--threads", "1",
    ]);
    ok(&[
        "phantom", "-n", "4", "--size", "16", "--seed", "5",
        "--out", p2.to_str().unwrap(), "--threads", "2",
    ]);
    for stem in ["phantom-0000", "phantom-0003"] {
        for suffix in ["_cc.png", "_mlo.png", "_diff.png"] {
            let a = std::fs::read(p1.join(format!("{stem}{suffix}"))).unwrap();
            let b = std::fs::read(p2.join(format!("{stem}{suffix}"))).unwrap();
            assert_eq!(a, b);
        }
    }
}
