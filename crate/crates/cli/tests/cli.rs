use std::path::Path;
use std::process::{Command, Output};

fn motionopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motionopt"))
        .args(args)
        .current_dir(dir)
        .env_remove("MOTIONOPT_PLANNER_URL")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) {
    let config = r#"{
        "version": 1,
        "optimizer": {"weights": {"prior": 1.0, "trajectory": 1.0, "smoothness": 0.01, "collision": 10.0,
                                  "middle": 0.1, "end": 1.0, "margin": 0.01},
                      "max_iters": 4, "step_size": 0.01, "seed": 5},
        "render": {"width": 41, "height": 31}
    }"#;
    std::fs::write(dir.join("config.json"), config).unwrap();
}

#[test]
fn offline_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d);
    let steps: [&[&str]; 5] = [
        &["plan", "--config", "config.json", "--offline", "--out", "plan.json"],
        &["optimize", "--config", "config.json", "--plan", "plan.json", "--out", "report.json"],
        &["eval", "--motion", "report.json", "--out", "metrics.json"],
        &["render", "--config", "config.json", "--motion", "report.json", "--frame", "2", "--out", "frame.ppm"],
        &["gradcheck", "--plan", "plan.json", "--motion", "report.json", "--coordinates", "20"],
    ];
    for args in steps {
        let out = motionopt(args, d);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let ppm = std::fs::read(d.join("frame.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n41 31\n255\n"));
    let metrics = std::fs::read_to_string(d.join("metrics.json")).unwrap();
    assert!(metrics.contains("\"trajectory_length\""));
}

#[test]
fn seed_flag_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d);
    assert!(motionopt(&["plan", "--offline", "--out", "plan.json"], d).status.success());
    let out = motionopt(
        &["optimize", "--config", "config.json", "--plan", "plan.json", "--seed", "11", "--out", "r.json"],
        d,
    );
    assert!(out.status.success());
    let report = std::fs::read_to_string(d.join("r.json")).unwrap();
    assert!(report.contains("\"seed\": 11"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("old.json"), r#"{"version": 0, "fps": 30, "frames": []}"#).unwrap();
    let out = motionopt(&["eval", "--motion", "old.json", "--out", "m.json"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));

    std::fs::write(d.join("bad.json"), "{\"version\": 1,\n \"optimizer\": {\"max_iters\": 0}}").unwrap();
    let out = motionopt(&["plan", "--config", "bad.json", "--offline", "--out", "p.json"], d);
    assert_eq!(out.status.code(), Some(1));

    let out = motionopt(&["plan", "--offline"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = motionopt(&["plan", "--offline", "--out", "missing-dir/plan.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
