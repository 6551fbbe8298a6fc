use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn capev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capev"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: &str, extra: &[&str]) -> std::path::PathBuf {
    let data = dir.join("data");
    let mut args = vec!["synth", "--out", s(&data), "--n", n];
    args.extend_from_slice(extra);
    let o = capev(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    data
}

#[test]
fn extract_train_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "24", &[]);
    let feat = dir.path().join("feat");
    let o = capev(&[
        "extract",
        "--manifest",
        s(&data.join("manifest.csv")),
        "--out",
        s(&feat),
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(feat.join("features.csv")).unwrap();
    assert_eq!(text.lines().count(), 25);

    let models = dir.path().join("models");
    let features = feat.join("features.csv");
    let o = capev(&[
        "train",
        "--features",
        s(&features),
        "--family",
        "rf",
        "--seed",
        "3",
        "--out",
        s(&models),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(models.join("models/severity.json").is_file());

    let o = capev(&[
        "evaluate",
        "--model",
        s(&models.join("models/strain.json")),
        "--features",
        s(&features),
    ]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("strain"));
    assert!(out.contains("warning: 24 evaluated rows were used to train"));
}

#[test]
fn experiment_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "40", &[]);
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        format!("manifest = {}\noutput_dir = run\nfamily = knn\ngrid = k=1,3,5\ncv_folds = 3\nseed = 2\n", s(&data.join("manifest.csv"))),
    )
    .unwrap();
    let o = capev(&["experiment", "--config", s(&config)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("run");
    assert!(run.join("cv_severity.csv").is_file());
    let before = fs::read(run.join("report.txt")).unwrap();
    fs::remove_file(run.join("report.txt")).unwrap();

    let o = capev(&["report", "--run", s(&run)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(run.join("report.txt")).unwrap(), before);
    assert!(String::from_utf8_lossy(&o.stdout).contains("no overlap"));
}

#[test]
fn augment_writes_fourteen_per_clip() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "2", &["--babble"]);
    let out = dir.path().join("aug");
    let o = capev(&[
        "augment",
        "--manifest",
        s(&data.join("manifest.csv")),
        "--pairs",
        "0.8,0.2;0.6,0.4",
        "--noise-dir",
        s(&data.join("noise")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("augmented_manifest.csv")).unwrap();
    assert_eq!(text.lines().count(), 29);
    assert!(text.lines().next().unwrap().ends_with(",source_id"));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&capev(&["no-such-command"])), 1);
    assert_eq!(
        code(&capev(&[
            "extract",
            "--manifest",
            "missing.csv",
            "--out",
            "x"
        ])),
        1
    );
    assert_eq!(
        code(&capev(&[
            "train",
            "--family",
            "tree",
            "--features",
            "f.csv"
        ])),
        1
    );

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "output_dir = out\nfamily = knn\n").unwrap();
    assert_eq!(code(&capev(&["experiment", "--config", s(&bad)])), 1);

    let m = dir.path().join("m.csv");
    fs::write(&m, "id,wav_path,age,sex,severity,breathiness,pitch,loudness,roughness,strain,embedding_path\na,a.wav,30,Q,1,1,1,1,1,1,\n").unwrap();
    assert_eq!(
        code(&capev(&[
            "extract",
            "--manifest",
            s(&m),
            "--out",
            s(&dir.path().join("o"))
        ])),
        1
    );
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.wav"), b"not a wav file").unwrap();
    let m = dir.path().join("m.csv");
    fs::write(&m, "id,wav_path,age,sex,severity,breathiness,pitch,loudness,roughness,strain,embedding_path\na,a.wav,30,M,1,1,1,1,1,1,\n").unwrap();
    let o = capev(&[
        "extract",
        "--manifest",
        s(&m),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_exits_zero() {
    let o = capev(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("experiment"));
}

#[test]
fn experiment_repeats_flag() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "30", &[]);
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        format!(
            "manifest = {}\noutput_dir = run\nfamily = knn\n",
            s(&data.join("manifest.csv"))
        ),
    )
    .unwrap();
    let o = capev(&["experiment", "--config", s(&config), "--repeats", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("run");
    assert!(run.join("repeat_2/report.csv").is_file());
    assert!(fs::read_to_string(run.join("summary.txt"))
        .unwrap()
        .contains("±"));
    assert_eq!(
        code(&capev(&[
            "experiment",
            "--config",
            s(&config),
            "--repeats",
            "0"
        ])),
        1
    );
}
