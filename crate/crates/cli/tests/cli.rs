use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn actorgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actorgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) {
    let o = actorgraph(&[
        "synth",
        "--seed",
        "4",
        "--out",
        p(dir),
        "--set",
        "n_actors=60",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn schema_violation_exits_one_naming_the_equation() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("nodes.csv"),
        "id,kind,name\n0,state,ohio\n1,party,dem\n",
    )
    .unwrap();
    fs::write(dir.path().join("edges.csv"), "src,dst,relation\n0,1,R1\n").unwrap();
    let nodes = format!("nodes={}", p(&dir.path().join("nodes.csv")));
    let edges = format!("edges={}", p(&dir.path().join("edges.csv")));
    let out = dir.path().join("out");
    let o = actorgraph(&[
        "validate-graph",
        "--set",
        &nodes,
        "--set",
        &edges,
        "--set",
        "features=synthetic:1",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("Eq 1"), "{err}");
}

#[test]
fn legal_graph_validates() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = dir.path().join("v");
    let o = actorgraph(&["validate-graph", "--data", p(dir.path()), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok: "));
    assert!(out.join("graph_summary.csv").exists());
}

#[test]
fn train_twice_gives_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let cfg = dir.path().join("table8.cfg");
    fs::write(
        &cfg,
        "# small but otherwise default\npreset = table8\nhidden = 16\nmax_epochs = 6\n",
    )
    .unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = actorgraph(&[
            "train",
            "--config",
            p(&cfg),
            "--data",
            p(dir.path()),
            "--seed",
            "5",
            "--out",
            p(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        files.push((
            fs::read(out.join("metrics.csv")).unwrap(),
            fs::read(out.join("history.csv")).unwrap(),
        ));
        assert!(fs::read_to_string(out.join("resolved.cfg"))
            .unwrap()
            .contains("seed = 5"));
    }
    assert_eq!(files[0], files[1]);
    assert!(
        String::from_utf8_lossy(&files[0].0).starts_with("part,side,accuracy,macro_f1,micro_f1\n")
    );
}

#[test]
fn gradcheck_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = actorgraph(&["gradcheck", "--seed", "7", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("max relative error"));
    assert!(dir.path().join("gradcheck.csv").exists());
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "hiden = 3\n").unwrap();
    let o = actorgraph(&["train", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: config: "), "{}", stderr(&o));
}

#[test]
fn downstream_commands_run_on_a_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let run = dir.path().join("run");
    let data = p(dir.path());
    let o = actorgraph(&[
        "train",
        "--data",
        data,
        "--out",
        p(&run),
        "--set",
        "hidden=8",
        "--set",
        "max_epochs=3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = run.join("model");
    for (cmd, file) in [
        ("eval", "metrics.csv"),
        ("embed", "embeddings.csv"),
        ("stance", "stance.csv"),
        ("project", "dbi.csv"),
        ("vote-train", "vote_model.txt"),
    ] {
        let out = dir.path().join(cmd);
        let o = actorgraph(&[
            cmd,
            "--data",
            data,
            "--model",
            p(&model),
            "--out",
            p(&out),
            "--set",
            "vote_split=time_based",
        ]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        assert!(out.join(file).exists(), "{cmd} wrote no {file}");
    }
    let vm = dir.path().join("vote-train").join("vote_model.txt");
    let out = dir.path().join("vote-eval");
    let o = actorgraph(&[
        "vote-eval",
        "--data",
        data,
        "--model",
        p(&model),
        "--vote-model",
        p(&vm),
        "--out",
        p(&out),
        "--set",
        "vote_split=time_based",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert!(preds
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("115")));
}

#[test]
fn ablations_emit_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let data = p(dir.path());
    let tiny = ["--set", "hidden=4", "--set", "max_epochs=1"];
    let out = dir.path().join("rel");
    let mut args = vec![
        "ablate-relations",
        "--data",
        data,
        "--out",
        p(&out),
        "--set",
        "ablate_relations=R1,R3",
    ];
    args.extend(tiny);
    let o = actorgraph(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("ablate_relations.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "relation,keep,accuracy,macro_f1,micro_f1");
    assert_eq!(rows.len(), 1 + 2 * 11);
    assert!(
        rows[1].starts_with("R1,1.0,")
            && rows[11].starts_with("R1,0.0,")
            && rows[12].starts_with("R3,1.0,")
    );

    let out = dir.path().join("loss");
    let mut args = vec!["ablate-losses", "--data", data, "--out", p(&out)];
    args.extend(tiny);
    let o = actorgraph(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("ablate_losses.csv")).unwrap();
    let names: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(names, ["L1", "L1+L2", "L1+L3", "L1+L2+L3"]);
}
