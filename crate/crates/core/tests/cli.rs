use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn partgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_partgnn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// synth + featurize into `dir/meshes` and `dir/graphs`.
fn small_dataset(dir: &Path) {
    let o = partgnn(&["synth", "--out", &path(dir, "meshes"), "--per-class", "3", "--test-per-class", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = partgnn(&[
        "featurize", "--dataset", &path(dir, "meshes"), "--out", &path(dir, "graphs"), "--points", "16",
        "--max-parts", "6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [&["train", "--bogus"][..], &["frobnicate"], &[], &["synth", "--seed", "x", "--out", "/tmp/x"]] {
        let o = partgnn(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    let o = partgnn(&["train", "--bogus"]);
    assert!(stderr(&o).contains("Usage"));
    let o = partgnn(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["synth", "sample", "featurize", "train", "eval", "gradcheck", "inspect"] {
        assert!(stdout(&o).contains(sub));
    }
}

#[test]
fn runtime_errors_exit_with_two() {
    let o = partgnn(&["sample", "--input", "/nonexistent/mesh.off"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/mesh.off"));
}

#[test]
fn gradcheck_reports_every_layer() {
    let o = partgnn(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# effective config (gradcheck)\nseed=0\n"));
    for layer in ["dense", "batch_norm_train", "masked_softmax", "gat_layer", "model_maxpool", "model_singlenode"] {
        let line = text.lines().find(|l| l.starts_with(&format!("{layer}\t"))).unwrap();
        let err: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
        assert!(err < 1e-5, "{line}");
        assert!(line.ends_with("ok"));
    }
}

#[test]
fn sample_with_zero_parts_warns() {
    let dir = tempfile::tempdir().unwrap();
    let o = partgnn(&["synth", "--out", &path(dir.path(), "m"), "--per-class", "1", "--test-per-class", "0"]);
    assert!(o.status.success());
    let mesh = path(dir.path(), "m/box/train/box_0000.off");
    let out = path(dir.path(), "empty.graph");
    let o = partgnn(&["sample", "--input", &mesh, "--max-parts", "0", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    assert!(stdout(&o).contains("parts\t0"));
    assert!(fs::read_to_string(&out).unwrap().contains("\nparts 0\n"));
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "run.cfg");
    fs::write(&cfg, "# sampling\nmax-parts=5\npoints=12\n").unwrap();
    let o = partgnn(&["synth", "--out", &path(dir.path(), "m"), "--per-class", "1", "--test-per-class", "0"]);
    assert!(o.status.success());
    let mesh = path(dir.path(), "m/cone/train/cone_0000.off");
    let o = partgnn(&["inspect", "--config", &cfg, "--input", &mesh, "--points", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("\nmax-parts=5\n") && text.contains("\npoints=20\n") && text.contains("\nlrf=pca\n"));
    let parts: usize = text.lines().find_map(|l| l.strip_prefix("parts\t")).unwrap().parse().unwrap();
    assert!((1..=5).contains(&parts));
    fs::write(&cfg, "colour=blue\n").unwrap();
    assert_eq!(partgnn(&["inspect", "--config", &cfg, "--input", &mesh]).status.code(), Some(1));
}

#[test]
fn train_eval_round_trip_and_class_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d);
    let graphs = path(d, "graphs");
    assert_eq!(fs::read_to_string(d.join("graphs/classes.txt")).unwrap(), "box\ncone\ncylinder\nsphere\n");
    assert!(d.join("graphs/train/box/box_0000.graph").is_file());
    let ckpt = path(d, "model.ckpt");
    let o = partgnn(&["train", "--data", &graphs, "--out", &ckpt, "--model", "toy", "--epochs", "2", "--log", &path(d, "log.tsv")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(d.join("log.tsv")).unwrap().lines().count(), 3);

    let o = partgnn(&["eval", "--data", &graphs, "--checkpoint", &ckpt, "--baseline"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for key in ["accuracy\t", "class_accuracy\t", "confusion\tbox\tcone\tcylinder\tsphere", "baseline_accuracy\t"] {
        assert!(text.contains(key), "{key} missing from {text}");
    }

    fs::write(d.join("graphs/classes.txt"), "box\ncone\ncylinder\n").unwrap();
    let o = partgnn(&["eval", "--data", &graphs, "--checkpoint", &ckpt]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("shape mismatch"));
}

#[test]
fn featurize_is_independent_of_job_count_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = partgnn(&["synth", "--out", &path(d, "m"), "--per-class", "2", "--test-per-class", "1"]);
    assert!(o.status.success());
    let meshes = path(d, "m");
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec!["featurize", "--dataset", &meshes, "--out", out, "--points", "8", "--max-parts", "4"];
        args.extend_from_slice(extra);
        let o = partgnn(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    let cache = path(d, "cache");
    run(&path(d, "a"), &["--jobs", "1"]);
    run(&path(d, "b"), &["--jobs", "3", "--cache", &cache]);
    run(&path(d, "c"), &["--jobs", "2", "--cache", &cache]);
    let file = "train/sphere/sphere_0001.graph";
    let a = fs::read(d.join("a").join(file)).unwrap();
    assert_eq!(a, fs::read(d.join("b").join(file)).unwrap());
    assert_eq!(a, fs::read(d.join("c").join(file)).unwrap());
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 12);
}
