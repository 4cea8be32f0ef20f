use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn omrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omrf"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn omrf")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = omrf(&["synth", "--out", p(d), "--n", "6", "--seed", "11"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = dir_bytes(&a);
    assert_eq!(files.len(), 18);
    assert_eq!(files, dir_bytes(&b));
}

#[test]
fn score_of_identical_dirs_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    assert!(omrf(&["synth", "--out", p(&corpus), "--n", "5"]).status.success());
    let o = omrf(&["score", "--gt", p(&corpus), "--pred", p(&corpus)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for key in ["seer=0.0000", "syer=0.0000", "note_acc=100.0000", "omr_ned=0.0000"] {
        assert!(out.lines().any(|l| l == key), "missing {key} in\n{out}");
    }
}

#[test]
fn score_report_matches_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt, pred) = (tmp.path().join("gt"), tmp.path().join("pred"));
    fs::create_dir_all(&gt).unwrap();
    fs::create_dir_all(&pred).unwrap();
    fs::write(gt.join("a.semantic"), "clef-G2 note-C4_quarter barline\n").unwrap();
    fs::write(pred.join("a.semantic"), "clef-G2 note-D4_quarter barline\n").unwrap();
    fs::write(gt.join("b.semantic"), "note-E4_half\n").unwrap();
    fs::write(pred.join("b.semantic"), "note-E4_half barline\n").unwrap();
    let o = omrf(&["score", "--gt", p(&gt), "--pred", p(&pred)]);
    assert!(o.status.success());
    let golden = include_str!("golden/score_report.txt");
    assert_eq!(stdout(&o).trim_end(), golden.trim_end());
}

#[test]
fn missing_corpus_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("nowhere");
    let o = omrf(&["train", "--corpus", p(&root), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(p(&root)));
}

#[test]
fn empty_corpus_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("empty");
    fs::create_dir_all(&root).unwrap();
    let o = omrf(&["train", "--corpus", p(&root), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(p(&root)));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(omrf(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(omrf(&["score", "--gt", "x"]).status.code(), Some(1));
    assert_eq!(
        omrf(&["score", "--gt", "x", "--pred", "y", "--encoding", "midi"]).status.code(),
        Some(1)
    );
    assert_eq!(
        omrf(&["score", "--gt", "x", "--pred", "y", "--split", "50,50,50"]).status.code(),
        Some(1)
    );
}

#[test]
fn bad_config_file_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[train]\nlearning_rate = 3\n").unwrap();
    let o = omrf(&["synth", "--config", p(&cfg), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n[synth]\nvocab_size = 8\n").unwrap();
    let (from_file, from_flag, plain) = (tmp.path().join("f"), tmp.path().join("g"), tmp.path().join("h"));
    assert!(omrf(&["synth", "--config", p(&cfg), "--out", p(&from_file), "--n", "3"]).status.success());
    assert!(omrf(&["synth", "--config", p(&cfg), "--seed", "4", "--out", p(&from_flag), "--n", "3"])
        .status
        .success());
    assert!(omrf(&["synth", "--seed", "4", "--vocab-size", "8", "--out", p(&plain), "--n", "3"])
        .status
        .success());
    assert_ne!(dir_bytes(&from_file), dir_bytes(&from_flag));
    assert_eq!(dir_bytes(&from_flag), dir_bytes(&plain));
}

#[test]
fn train_evaluate_predict_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    let run = tmp.path().join("run");
    let cfg = tmp.path().join("tiny.toml");
    fs::write(
        &cfg,
        "seed = 2\n[model]\ngru_layers = 1\ngru_hidden = 4\n[model.encoder]\nchannels = [2, 2, 2, 2, 2]\n\
         [train]\nmax_iters = 4\nbatch_size = 2\neval_every = 2\nlog_every = 1\n",
    )
    .unwrap();
    assert!(omrf(&["synth", "--out", p(&corpus), "--n", "12"]).status.success());
    let o = omrf(&["train", "--config", p(&cfg), "--corpus", p(&corpus), "--out", p(&run), "--augment", "off"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("iterations=4"));
    for f in ["last.ckpt", "vocab.txt", "config.json", "train.log"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    assert_eq!(fs::read_to_string(run.join("train.log")).unwrap().lines().count(), 4);

    let ckpt = run.join("last.ckpt");
    let o = omrf(&["evaluate", "--corpus", p(&corpus), "--checkpoint", p(&ckpt), "--subset", "all"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().any(|l| l == "sequences=12"));

    let preds = tmp.path().join("pred");
    let o = omrf(&["predict", "--checkpoint", p(&ckpt), "--input", p(&corpus), "--out", p(&preds)]);
    assert!(o.status.success());
    assert_eq!(fs::read_dir(&preds).unwrap().count(), 12);

    fs::write(&ckpt, b"not a checkpoint").unwrap();
    let o = omrf(&["predict", "--checkpoint", p(&ckpt), "--input", p(&corpus), "--out", p(&preds)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn augment_preview_writes_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    let out = tmp.path().join("aug");
    assert!(omrf(&["synth", "--out", p(&corpus), "--n", "3"]).status.success());
    let o = omrf(&["augment-preview", "--input", p(&corpus), "--out", p(&out), "--n", "2"]);
    assert!(o.status.success());
    assert_eq!(fs::read_dir(&out).unwrap().count(), 4);
    assert!(out.join("synth-00000_original.png").is_file());
    assert!(out.join("synth-00000_augmented.png").is_file());
}
