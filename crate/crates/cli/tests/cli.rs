use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/clicks.csv")
}

fn seqrec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqrec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = seqrec(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn value(kv: &str, key: &str) -> String {
    kv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {kv}"))
        .to_string()
}

fn small_synth(dir: &Path) {
    ok(
        dir,
        &["synth", "--n-items", "60", "--n-sequences", "2000", "--fanout", "6", "--max-len", "15", "--seed", "5", "--run-dir", "syn"],
    );
}

#[test]
fn preprocess_fixture_splits_by_week_and_counts_by_hand() {
    let tmp = tempfile::tempdir().unwrap();
    let input = fixture();
    ok(tmp.path(), &["preprocess", input.to_str().unwrap(), "--run-dir", "a"]);
    let d = tmp.path().join("a");
    for split in ["train", "valid", "test"] {
        assert!(d.join(format!("stats_{split}.txt")).is_file());
    }
    let train = read(d.join("stats_train.txt"));
    assert_eq!(value(&train, "sequences"), "4");
    assert_eq!(value(&train, "events"), "11");
    assert_eq!(value(&train, "distinct_items"), "5");
    let valid = read(d.join("stats_valid.txt"));
    assert_eq!((value(&valid, "sequences"), value(&valid, "events")), ("1".into(), "2".into()));
    let test = read(d.join("stats_test.txt"));
    assert_eq!((value(&test, "sequences"), value(&test, "events")), ("1".into(), "3".into()));

    ok(tmp.path(), &["preprocess", input.to_str().unwrap(), "--run-dir", "b"]);
    assert_eq!(std::fs::read(d.join("dataset.bin")).unwrap(), std::fs::read(tmp.path().join("b/dataset.bin")).unwrap());
}

#[test]
fn missing_input_exits_two_and_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = seqrec(tmp.path(), &["preprocess", "no/such/clicks.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/clicks.csv"));
}

#[test]
fn bad_flags_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(seqrec(tmp.path(), &["train", "--model", "lstm"]).status.code(), Some(2));
    assert_eq!(seqrec(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(seqrec(tmp.path(), &["params"]).status.code(), Some(2));
}

#[test]
fn default_run_directory_and_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path());
    ok(tmp.path(), &["train", "--data", "syn", "--model", "pop"]);
    let runs: Vec<_> = std::fs::read_dir(tmp.path().join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let name = runs[0].file_name().unwrap().to_str().unwrap().to_string();
    // train-<timestamp>-<hash>
    let parts: Vec<&str> = name.split('-').collect();
    assert_eq!(parts[0], "train");
    assert_eq!(parts[2].len(), 10);
    let cfg = read(runs[0].join("config.toml"));
    assert!(cfg.contains("start_lr = 0.01"), "{cfg}");
    assert!(cfg.contains("batch_size = 128"), "{cfg}");
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path());
    std::fs::write(tmp.path().join("run.toml"), "seed = 9\n[model]\nkind = \"gru\"\nn_e = 3\nn_h = 3\n[train]\nepochs = 1\nbatch_size = 64\n").unwrap();
    ok(tmp.path(), &["train", "--config", "run.toml", "--data", "syn", "--batch-size", "100", "--run-dir", "t"]);
    let cfg = read(tmp.path().join("t/config.toml"));
    for line in ["seed = 9", "kind = \"gru\"", "batch_size = 100", "epochs = 1"] {
        assert!(cfg.contains(line), "{line} missing from {cfg}");
    }
    std::fs::write(tmp.path().join("bad.toml"), "sede = 1\n").unwrap();
    assert_eq!(seqrec(tmp.path(), &["params", "--config", "bad.toml", "--n-items", "5"]).status.code(), Some(2));
}

/// Mean of consecutive blocks of the per-step loss.
fn block_means(log: &str, blocks: usize) -> Vec<f64> {
    let losses: Vec<f64> = log.lines().skip(1).map(|l| l.split('\t').nth(4).unwrap().parse().unwrap()).collect();
    let size = losses.len() / blocks;
    (0..blocks).map(|b| losses[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect()
}

#[test]
fn two_epoch_training_writes_checkpoints_and_a_falling_loss() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path());
    ok(
        tmp.path(),
        &["train", "--data", "syn", "--model", "gru", "--n-e", "16", "--n-h", "16", "--epochs", "2", "--batch-size", "32", "--run-dir", "t"],
    );
    let d = tmp.path().join("t");
    for f in ["epoch_000.ckpt", "epoch_001.ckpt", "best.ckpt", "loss_log.tsv", "epochs.tsv", "train_summary.txt"] {
        assert!(d.join(f).is_file(), "{f}");
    }
    let means = block_means(&read(d.join("loss_log.tsv")), 5);
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
    let summary = read(d.join("train_summary.txt"));
    let best: usize = value(&summary, "best_epoch").parse().unwrap();
    assert_eq!(
        std::fs::read(d.join("best.ckpt")).unwrap(),
        std::fs::read(d.join(format!("epoch_{best:03}.ckpt"))).unwrap()
    );
}

#[test]
fn training_is_deterministic_at_64_bit() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path());
    for run in ["r1", "r2"] {
        ok(
            tmp.path(),
            &[
                "train", "--data", "syn", "--model", "gru+re+ln", "--n-e", "8", "--n-h", "8", "--epochs", "2", "--precision", "f64",
                "--seed", "4", "--run-dir", run,
            ],
        );
    }
    for f in ["loss_log.tsv", "epochs.tsv", "best.ckpt", "epoch_001.ckpt"] {
        let a = std::fs::read(tmp.path().join("r1").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("r2").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn mismatched_tied_sizes_fail_before_training() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path());
    let out = seqrec(tmp.path(), &["train", "--data", "syn", "--model", "gru+re", "--n-e", "8", "--n-h", "9", "--run-dir", "t"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("t").exists());
}

#[test]
fn eval_reports_are_stable_and_keyed_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let input = fixture();
    ok(tmp.path(), &["preprocess", input.to_str().unwrap(), "--run-dir", "data"]);
    ok(tmp.path(), &["train", "--data", "data", "--model", "pop", "--run-dir", "pop"]);
    for run in ["e1", "e2"] {
        ok(tmp.path(), &["eval", "--data", "data", "--checkpoint", "pop", "--k", "20", "--n", "1", "--n", "5", "--run-dir", run]);
    }
    let report = read(tmp.path().join("e1/report.json"));
    assert!(report.contains("\"Recall@20,1\"") && report.contains("\"Recall@20,5\""));
    for f in ["report.json", "summary.txt", "per_offset.tsv", "buckets.tsv"] {
        assert_eq!(read(tmp.path().join("e1").join(f)), read(tmp.path().join("e2").join(f)), "{f}");
    }
    // Test sequence [i3, i4, i5] over five training items: POP's list holds
    // all of them, whatever the context.
    assert_eq!(value(&read(tmp.path().join("e1/summary.txt")), "Recall@20,1"), "1.000000");
}

#[test]
fn uplift_against_a_baseline_report() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path());
    ok(tmp.path(), &["train", "--data", "syn", "--model", "pop", "--run-dir", "pop"]);
    ok(tmp.path(), &["train", "--data", "syn", "--model", "item_knn", "--run-dir", "knn"]);
    ok(tmp.path(), &["eval", "--data", "syn", "--checkpoint", "pop", "--k", "5", "--run-dir", "pe"]);
    let missing = seqrec(tmp.path(), &["eval", "--data", "syn", "--checkpoint", "knn", "--k", "5", "--baseline-report", "nope"]);
    assert_eq!(missing.status.code(), Some(2));
    ok(tmp.path(), &["eval", "--data", "syn", "--checkpoint", "knn", "--k", "5", "--baseline-report", "pe", "--run-dir", "ke"]);
    let uplift = read(tmp.path().join("ke/uplift.tsv"));
    assert_eq!(uplift.lines().count(), 3, "{uplift}");
}

#[test]
fn params_table_reproduces_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["params", "--n-items", "37483", "--n-items", "1000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("coevent_mf\t37483\t7496600\t7.50"));
    assert!(text.contains("hm_lstm+re+ln\t37483\t3971602\t3.97"));
    assert!(text.contains("gru\t1000\t260000\t"));
    assert_eq!(text.lines().count(), 17);
}

#[test]
fn stats_and_eval_on_synthetic_data() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path());
    let syn = read(tmp.path().join("syn/synth.txt"));
    let bayes: f64 = value(&syn, "expected_test_recall").parse().unwrap();
    assert!(bayes > 0.99, "fanout 6 < K");
    let out = ok(tmp.path(), &["stats", "--data", "syn/dataset.bin", "--run-dir", "s"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("sequences=1600"));
}
