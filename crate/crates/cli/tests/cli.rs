use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lingen::config::extract_echo;

fn lingen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lingen"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth_pair(dir: &Path) {
    let o = lingen(
        dir,
        &["synth", "--kind", "pair", "--seed", "2", "--sentences", "40", "--out-dir", "syn", "--output", "manifest.out"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = lingen(dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    let o = lingen(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(lingen(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn exit_codes_separate_usage_data_and_verification() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[train]\nlambada = 1\n").unwrap();
    let o = lingen(dir.path(), &["gradcheck", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = lingen(dir.path(), &["train", "--source", "X=missing/X", "--checkpoint", "m.ckpt"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = lingen(dir.path(), &["train", "--source", "X=missing/X", "--checkpoint", "m.ckpt", "--lambda", "x"]);
    assert_eq!(o.status.code(), Some(1));

    synth_pair(dir.path());
    fs::write(dir.path().join("syn/X.test.vemb"), b"NOPE").unwrap();
    let o = lingen(dir.path(), &["analyze-cka", "--corpus", "X=syn/X.test", "--corpus", "Y=syn/Y.test"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes_on_the_shipped_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let o = lingen(dir.path(), &["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 13);
    assert!(table.lines().skip(1).all(|l| l.ends_with("\tpass")));
}

#[test]
fn single_candidate_wins_both_criteria() {
    let dir = tempfile::tempdir().unwrap();
    synth_pair(dir.path());
    let o = lingen(dir.path(), &["select-sources", "--target", "X=syn/X.test", "--candidate", "Y=syn/Y.train"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().next(), Some("variety_id\tcentroid_distance\ttj_score"));
    assert_eq!(table.lines().last(), Some("pair\tY\tY"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[gradcheck]\nfixtures = 2\nseed = 5\n").unwrap();
    let o = lingen(dir.path(), &["gradcheck", "--config", "run.toml", "--seed", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let echoed = stderr(&o);
    let cfg = lingen::config::parse_config(extract_echo(&echoed).unwrap()).unwrap();
    let g = cfg.gradcheck.unwrap();
    assert_eq!((g.fixtures, g.seed), (Some(2), Some(6)));
}

fn snapshot(dir: &Path, files: &[&str], o: &Output) -> Vec<Vec<u8>> {
    let mut out = vec![o.stdout.clone()];
    for f in files {
        let p: PathBuf = dir.join(f);
        out.push(fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display())));
    }
    out
}

/// Runs a command, then replays it from its echoed configuration alone and
/// compares standard output and every named output file byte for byte.
fn assert_replays(dir: &Path, args: &[&str], files: &[&str]) {
    let first = lingen(dir, args);
    assert_eq!(first.status.code(), Some(0), "{args:?}: {}", stderr(&first));
    let before = snapshot(dir, files, &first);
    let echoed = stderr(&first);
    fs::write(dir.join("replay.toml"), extract_echo(&echoed).expect("config echo")).unwrap();
    let second = lingen(dir, &[args[0], "--config", "replay.toml"]);
    assert_eq!(second.status.code(), Some(0), "{}", stderr(&second));
    assert_eq!(snapshot(dir, files, &second), before, "{} is not replayable", args[0]);
    assert_eq!(extract_echo(&stderr(&second)), extract_echo(&echoed));
}

#[test]
fn every_subcommand_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_replays(
        d,
        &["synth", "--kind", "pair", "--seed", "2", "--sentences", "40", "--out-dir", "syn", "--output", "manifest.out"],
        &["manifest.out", "syn/X.train.vemb", "syn/Y.test.conllu", "syn/Y.dev.tokens", "syn/manifest.tsv"],
    );
    let train = [
        "--source", "X=syn/X.train", "--source", "Y=syn/Y.train", "--dev", "X=syn/X.dev", "--max-steps", "12",
        "--eval-every", "4", "--batch-size", "16", "--seed", "3",
    ];
    let mut args = vec!["train"];
    args.extend(train);
    args.extend(["--checkpoint", "out/m.ckpt", "--trace", "out/trace.tsv", "--mode", "alignment"]);
    assert_replays(d, &args, &["out/m.ckpt", "out/trace.tsv"]);
    assert_replays(
        d,
        &["evaluate", "--checkpoint", "out/m.ckpt", "--test", "X=syn/X.test", "--per-sentence", "out/ps.tsv"],
        &["out/ps.tsv"],
    );
    assert_replays(
        d,
        &[
            "analyze-cka", "--corpus", "X=syn/X.test", "--corpus", "Y=syn/Y.test", "--checkpoint", "out/m.ckpt",
            "--sample-size", "30", "--seed", "9", "--features-dir", "out/feat", "--output", "out/cka.tsv",
        ],
        &["out/cka.tsv", "out/feat/X.csv"],
    );
    assert_replays(
        d,
        &["select-sources", "--target", "X=syn/X.test", "--candidate", "Y=syn/Y.train", "--candidate", "X=syn/X.train"],
        &[],
    );
    assert_replays(d, &["gradcheck", "--fixtures", "2", "--seed", "1", "--output", "out/gc.tsv"], &["out/gc.tsv"]);
    let mut args = vec!["sweep-lambda"];
    args.extend(train);
    args.extend(["--test", "Y=syn/Y.test", "--output", "out/sweep.tsv"]);
    assert_replays(d, &args, &["out/sweep.tsv"]);
    let sweep = fs::read_to_string(d.join("out/sweep.tsv")).unwrap();
    assert_eq!(sweep.lines().count(), 4, "{sweep}");
    let mut args = vec!["ablate"];
    args.extend(train);
    args.extend(["--test", "Y=syn/Y.test", "--output", "out/ablate.tsv"]);
    assert_replays(d, &args, &["out/ablate.tsv"]);
    assert_eq!(fs::read_to_string(d.join("out/ablate.tsv")).unwrap().lines().count(), 5);
}

#[test]
fn checkpoints_reload_to_the_same_scores() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_pair(d);
    let o = lingen(
        d,
        &[
            "train", "--task", "pos", "--source", "X=syn/X.train", "--max-steps", "10", "--checkpoint", "pos.ckpt",
            "--output", "summary.tsv",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = lingen(d, &["evaluate", "--checkpoint", "pos.ckpt", "--test", "X=syn/X.test"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("variety\ttask\tsentences\twords\tf1\n"), "{table}");
    assert!(table.contains("X\tpos\t40\t"));
}
