use std::path::Path;
use std::process::{Command, Output};

fn pitchgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pitchgraph")).args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const MINIMAL_CONFIG: &str = r#"
[paths]
records = "records.jsonl"
frames_dir = "frames"
flows_dir = "flows"
annotations = "annotations.csv"
cache_dir = "cache"
"#;

fn minimal_dir() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pitchgraph.toml"), MINIMAL_CONFIG).unwrap();
    std::fs::write(dir.path().join("records.jsonl"), "").unwrap();
    let config = dir.path().join("pitchgraph.toml").to_string_lossy().into_owned();
    (dir, config)
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::create_dir_all(dir.join(name).parent().unwrap()).unwrap();
    std::fs::write(dir.join(name), body).unwrap();
}

#[test]
fn stage_without_its_upstream_exits_with_2() {
    let (_dir, config) = minimal_dir();
    let out = pitchgraph(&["train", "--config", &config]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
    let err = text(&out.stderr);
    assert!(err.contains("graphs") && err.contains("pitchgraph graphs"), "{err}");
}

#[test]
fn perfect_predictions_score_one() {
    let (dir, config) = minimal_dir();
    let anns = "time_s,action,visibility\n100,Goal,visible\n250.5,Corner,visible\n400,Foul,unshown\n";
    write(dir.path(), "annotations.csv", anns);
    write(dir.path(), "cache/predictions.csv", "time_s,action,confidence\n100,Goal,0.9\n250.5,Corner,0.8\n400,Foul,0.7\n");
    let out = pitchgraph(&["eval", "--config", &config]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("average-mAP 1.000"), "{stdout}");
    assert!(dir.path().join("cache/eval.txt").is_file());

    let again = pitchgraph(&["eval", "--config", &config]);
    assert!(text(&again.stdout).contains("[cached]"));
}

#[test]
fn unknown_config_key_exits_with_1() {
    let (dir, config) = minimal_dir();
    std::fs::write(dir.path().join("pitchgraph.toml"), format!("{MINIMAL_CONFIG}\n[graph]\nedge_treshold_m = 4.0\n")).unwrap();
    let out = pitchgraph(&["ingest", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("edge_treshold_m"), "{}", text(&out.stderr));
}

#[test]
fn missing_config_exits_with_1() {
    let out = pitchgraph(&["eval", "--config", "/nonexistent/pitchgraph.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn locked_cache_is_reported() {
    let (dir, config) = minimal_dir();
    write(dir.path(), "annotations.csv", "time_s,action,visibility\n");
    write(dir.path(), "cache/predictions.csv", "time_s,action,confidence\n");
    write(dir.path(), "cache/.lock", "1\n");
    let out = pitchgraph(&["eval", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("locked"), "{}", text(&out.stderr));
}

#[test]
fn bad_predictions_exit_with_1() {
    let (dir, config) = minimal_dir();
    write(dir.path(), "annotations.csv", "time_s,action,visibility\n10,Goal,visible\n");
    write(dir.path(), "cache/predictions.csv", "time_s,action,confidence\n10,Goal,2.0\n");
    let out = pitchgraph(&["eval", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_rejects_a_non_positive_duration() {
    let dir = tempfile::tempdir().unwrap();
    let out = pitchgraph(&["synth", "--out", &dir.path().to_string_lossy(), "--duration-s", "0"]);
    assert_eq!(out.status.code(), Some(1));
}
