use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn irs_uav(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_irs-uav"));
    cmd.args(args).env_remove("IRSUAV_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("IRSUAV_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_passes() {
    let out = irs_uav(&["check", "--seed", "2"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.matches("[PASS]").count(), 8, "{text}");
}

#[test]
fn smoke_train_writes_artifacts_quickly_and_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let start = Instant::now();
    let out = irs_uav(
        &["train", "--preset", "smoke", "--scheme", "c-ddpg", "--seed", "3", "--out", a.to_str().unwrap()],
        None,
    );
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = irs_uav(
        &["train", "--preset", "smoke", "--scheme", "c-ddpg", "--seed", "3", "--out", b.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0));

    for name in ["c-ddpg_3.csv", "summary.csv", "plot.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let trace = fs::read_to_string(a.join("c-ddpg_3.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "episode,scheme,seed,mean_reward,noise_scale");
    assert_eq!(lines.len(), 1 + 5 + 1);
    assert!(lines[1].starts_with("0,c-ddpg,3,"));
    assert!(lines[6].starts_with("final,c-ddpg,3,"));
}

#[test]
fn baselines_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = irs_uav(&["baseline", "--preset", "smoke"], Some(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("mpt_1.csv").exists());
    assert!(dir.path().join("rss_1.csv").exists());
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn sweep_emits_one_trace_per_element_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, "clusters = 1\nues_per_cluster = 2\nepisodes = 3\nsteps = 5\nsweep_elements = [10, 20, 30]\n")
        .unwrap();
    let out_dir = dir.path().join("out");
    let out = irs_uav(
        &["sweep", "--config", cfg.to_str().unwrap(), "--scheme", "p-ppo", "--out", out_dir.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<String> =
        fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, ["p-ppo_k10_1.csv", "p-ppo_k20_1.csv", "p-ppo_k30_1.csv", "summary.csv"]);
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "p_max_w = -5.0\n").unwrap();
    let out = irs_uav(&["train", "--config", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));

    fs::write(&bad, "transmit_power = 5.0\n").unwrap();
    assert_eq!(irs_uav(&["train", "--config", bad.to_str().unwrap()], None).status.code(), Some(1));
    assert_eq!(irs_uav(&["train", "--scheme", "mpt", "--preset", "smoke"], None).status.code(), Some(1));
    assert_eq!(irs_uav(&["baseline", "--scheme", "c-ppo", "--preset", "smoke"], None).status.code(), Some(1));
    assert_eq!(irs_uav(&["train", "--scheme", "a3c"], None).status.code(), Some(1));
    assert_eq!(irs_uav(&["train", "--episodes", "0"], None).status.code(), Some(1));
    assert_eq!(irs_uav(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(irs_uav(&["--help"], None).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("not-a-dir");
    fs::write(&file, "").unwrap();
    let out = irs_uav(&["train", "--preset", "smoke", "--out", file.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}
