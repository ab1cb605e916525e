use std::path::Path;
use std::process::{Command, Output};

use crosslinear::cli::ResultDoc;

const CONFIG: &str = r#"
[data.synthetic]
n_vars = 3
length = 800
lag = 2
noise_std = 0.1
seed = 2

[model]
lookback = 24
horizon = 6
patch_len = 6
hidden_dim = 8

[train]
lr = 1e-3
batch_size = 8
epochs = 2
lr_schedule = "constant"
"#;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crosslinear"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

#[test]
fn train_export_and_mask_study() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    let out = bin(&["train", "--config", "run.toml", "--out", "o", "--seed", "3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let doc: ResultDoc =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/result.json")).unwrap())
            .unwrap();
    assert_eq!(doc.command, "train");
    assert_eq!(doc.derived.variable_names, ["exo_1", "exo_2", "endo"]);
    assert_eq!(doc.derived.n_patches, 4);
    assert_eq!(doc.provenance.seed, 3);
    assert_eq!(doc.report.as_ref().unwrap().epochs.len(), 2);

    let out = bin(&["export-weights", "--checkpoint", "o/checkpoint.json", "--out", "w.csv"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("output,exo_1,exo_2,endo"));
    assert!(lines.next().unwrap().starts_with("endo,"));
    assert_eq!(lines.next(), None);

    let out = bin(
        &["mask-study", "--config", "run.toml", "--out", "o", "--checkpoint", "o/checkpoint.json", "--raw-units"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: ResultDoc =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/mask_study.json")).unwrap())
            .unwrap();
    assert_eq!(doc.mask_grid.len(), 9);
    assert_eq!(doc.units, "raw");
}

#[test]
fn echoed_config_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    assert!(bin(&["train", "--config", "run.toml", "--out", "a"], dir.path()).status.success());
    assert!(bin(&["train", "--config", "a/config.toml", "--out", "b"], dir.path()).status.success());
    let read = |p: &str| -> ResultDoc {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(p)).unwrap()).unwrap()
    };
    assert_eq!(read("a/result.json").metrics_json().unwrap(), read("b/result.json").metrics_json().unwrap());
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), CONFIG.replace("hidden_dim = 8", "hidden = 8")).unwrap();
    let out = bin(&["train", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.hidden"));

    std::fs::write(dir.path().join("bad.toml"), CONFIG.replace("patch_len = 6", "patch_len = 60")).unwrap();
    let out = bin(&["train", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.patch_len"));
}

#[test]
fn gradcheck_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin(&["gradcheck", "--seed", "1", "--out", "g.json"], dir.path());
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    assert!(dir.path().join("g.json").exists());
    let broken = bin(&["gradcheck", "--inject-fault"], dir.path());
    assert_eq!(broken.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&broken.stdout).contains("FAIL"));
}

#[test]
fn synth_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.toml"), "n_vars = 3\nlength = 50\nlag = 1\nnoise_std = 0.0\n").unwrap();
    let out = bin(&["synth", "--config", "s.toml", "--out", "s.csv", "--seed", "4"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 51);
}
