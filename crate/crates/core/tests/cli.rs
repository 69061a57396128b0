use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_somnogray"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("SOMNOGRAY_THREADS", "2").output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_small(dir: &Path, signals: bool) {
    let cfg = dir.join("synth.toml");
    std::fs::write(&cfg, "n_recordings = 3\nepochs_per_recording = 120\nn_scorers = 5\n").unwrap();
    let out = dir.join("ds");
    let mut args = vec!["synth", "--config", p(&cfg), "-o", p(&out)];
    if signals {
        args.push("--signals");
    }
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_documents_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        ("preprocess", &["--channels", "--output", "--config", "--recording-id", "--features"]),
        ("train", &["--data", "--config", "--seed", "--output"]),
        ("stage", &["--model", "--hypnodensity", "--channels", "--config", "--recording-id", "--output"]),
        ("uncertainty", &["--metric", "--output"]),
        ("gray", &["--metric", "--mode", "--value", "--pooling", "--output", "--svg"]),
        ("consensus", &["--panel", "--output", "--report"]),
        ("eval", &["--ref", "--pred", "--exclude", "--output"]),
        ("curve", &["--data", "--metric", "--grid", "--exclude", "--output"]),
        ("agreement", &["--panel", "--model", "--data", "--threshold", "--output"]),
        ("synth", &["--config", "--seed", "--signals", "--output"]),
        ("serve", &["--data", "--port", "--bind"]),
    ];
    for (cmd, flags) in expected {
        let o = run(&[cmd, "--help"]);
        assert!(o.status.success());
        let text = String::from_utf8_lossy(&o.stdout);
        for flag in *flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["uncertainty", "x.csv", "--metric", "bogus", "-o", "y"]).status.code(), Some(2));
    assert_eq!(run(&["gray", "x.csv", "--mode", "sideways", "--value", "0.1", "-o", "y"]).status.code(), Some(2));
}

#[test]
fn missing_and_malformed_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "epoch,p_wake\n0,1\n").unwrap();
    let out = dir.path().join("u.csv");
    let o = run(&["uncertainty", p(&bad), "--metric", "uu", "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    assert!(!out.exists());
    let o = run(&["edf", "info", p(&dir.path().join("missing.edf"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_of_reference_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), false);
    let truth = dir.path().join("ds/rec_000/truth.csv");
    let o = run(&["eval", "--ref", p(&truth), "--pred", p(&truth)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema"], "somnogray.report/1");
    assert_eq!(v["accuracy"], 1.0);
    assert_eq!(v["cohen_kappa"], 1.0);
}

#[test]
fn gray_rank_selects_rounded_share() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), false);
    let model = dir.path().join("ds/rec_000/model.csv");
    let mask = dir.path().join("gray.csv");
    let svg = dir.path().join("gray.svg");
    let o = run(&["gray", p(&model), "--metric", "ue", "--mode", "rank", "--value", "0.1", "-o", p(&mask), "--svg", p(&svg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&mask).unwrap();
    assert_eq!(text.lines().next(), Some("epoch,gray"));
    assert_eq!(text.lines().skip(1).filter(|l| l.ends_with(",1")).count(), 12);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn synth_is_reproducible_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth_small(a.path(), false);
    synth_small(b.path(), false);
    for f in ["rec_001/model.csv", "rec_001/truth.csv", "rec_001/scorer_03.csv"] {
        let x = std::fs::read(a.path().join("ds").join(f)).unwrap();
        let y = std::fs::read(b.path().join("ds").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn curve_and_agreement_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), false);
    let ds = dir.path().join("ds");
    let out = dir.path().join("curves");
    let o = run(&["curve", "--data", p(&ds), "--metric", "uu", "--metric", "ul", "--grid", "0:0.5:0.1", "-o", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("curves.json")).unwrap()).unwrap();
    assert_eq!(v["kind"], "curves");
    assert_eq!(v["exclusion"].as_array().unwrap().len(), 2);
    assert_eq!(v["exclusion"][0]["points"].as_array().unwrap().len(), 6);
    assert!(out.join("exclusion.svg").is_file() && out.join("capture.svg").is_file());

    let o = run(&["agreement", "--data", p(&ds)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "gray_agreement");
    assert_eq!(v["recordings"].as_array().unwrap().len(), 3);
}

#[test]
fn consensus_and_stage_from_hypnodensities() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), false);
    let rec = dir.path().join("ds/rec_000");
    let hyp = dir.path().join("cons.csv");
    let o = run(&["consensus", "--panel", p(&rec.join("panel.toml")), "-o", p(&hyp)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["scorers"], 5);

    let avg = dir.path().join("avg.csv");
    let model = rec.join("model.csv");
    let o = run(&["stage", "--hypnodensity", p(&model), "--hypnodensity", p(&model), "-o", p(&avg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&avg).unwrap(), std::fs::read_to_string(&model).unwrap());
}

#[test]
fn signals_train_and_stage_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), true);
    let ds = dir.path().join("ds");
    let edf = ds.join("rec_000/signals.edf");
    let o = run(&["edf", "info", p(&edf)]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("EEG C4-M1"));

    let pre = dir.path().join("pre");
    let o = run(&["preprocess", p(&edf), "--channels", "EEG F4-M1", "--features", "-o", p(&pre)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(pre.join("EEG_F4-M1.epochs.json").is_file());
    let features = pre.join("EEG_F4-M1.features.json");

    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, "[train]\nmax_epochs = 10\n").unwrap();
    let model = dir.path().join("model.json");
    let o = run(&["train", "--data", p(&ds), "--config", p(&cfg), "-o", p(&model)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = run(&["stage", p(&features), "--model", p(&model), "--recording-id", "rec_000", "-o", p(&a)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["stage", p(&edf), "--channels", "EEG F4-M1", "--model", p(&model), "--recording-id", "rec_000", "-o", p(&b)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
