//! End-to-end checks through the binary: env -> solve -> run -> plot, plus
//! the determinism contract at the CLI surface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cmdp-lab"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cmdp_lab_cli_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{
  "experiment": { "episodes": 80, "seeds": [1, 2], "checkpoint_every": 40 }
}"#,
    )
    .unwrap();
    path
}

#[test]
fn env_then_solve_round_trip() {
    let dir = temp_dir("env_solve");
    let model_path = dir.join("model.json");

    let out = bin()
        .args(["env", "--out"])
        .arg(&model_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(model_path.exists());

    let policy_path = dir.join("policy.json");
    let out = bin()
        .args(["solve", "--model"])
        .arg(&model_path)
        .arg("--policy")
        .arg(&policy_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("unconstrained optimum"), "{stdout}");
    assert!(stdout.contains("constrained optimum"), "{stdout}");
    assert!(policy_path.exists());

    // The constrained value printed can never exceed the unconstrained one.
    let values: Vec<f64> = stdout
        .lines()
        .filter_map(|l| l.split("value ").nth(1))
        .filter_map(|rest| rest.split(',').next())
        .filter_map(|v| v.trim().parse().ok())
        .collect();
    assert_eq!(values.len(), 2);
    assert!(values[1] <= values[0] + 1e-9);

    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_then_plot_produces_expected_files() {
    let dir = temp_dir("run_plot");
    let config = write_small_config(&dir);
    let out_dir = dir.join("results");

    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "safe_psrl_seed1.csv",
        "safe_psrl_seed2.csv",
        "unconstrained_psrl_seed1.csv",
        "safe_follow_seed1.csv",
        "summary.csv",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }

    let plot_prefix = dir.join("charts").join("regret");
    let out = bin()
        .args(["plot", "--in"])
        .arg(&out_dir)
        .arg("--out")
        .arg(&plot_prefix)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for metric in [
        "cumulative_reward_regret",
        "cumulative_constraint_regret",
        "average_reward_regret",
        "average_constraint_regret",
    ] {
        let path = dir.join("charts").join(format!("regret_{metric}.svg"));
        let svg = fs::read_to_string(&path).unwrap();
        // One polyline per algorithm.
        assert_eq!(svg.matches("<polyline").count(), 3, "{metric}");
    }

    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reruns_are_byte_identical_at_the_cli_surface() {
    let dir = temp_dir("determinism");
    let config = write_small_config(&dir);
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out_dir in [&out_a, &out_b] {
        let out = bin()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for entry in fs::read_dir(&out_a).unwrap() {
        let entry = entry.unwrap();
        if entry.path().is_dir() {
            continue;
        }
        let name = entry.file_name();
        assert_eq!(
            fs::read(entry.path()).unwrap(),
            fs::read(out_b.join(&name)).unwrap(),
            "{name:?} differs between reruns"
        );
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn seeds_flag_overrides_config_seed_list() {
    let dir = temp_dir("seeds_flag");
    let config = write_small_config(&dir);
    let out_dir = dir.join("results");
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--seeds", "3", "--episodes", "30"])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("safe_psrl_seed3.csv").exists());
    let rows = fs::read_to_string(out_dir.join("safe_psrl_seed3.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 31); // header + 30 episodes
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn plot_rejects_directory_without_ledgers() {
    let dir = temp_dir("plot_empty");
    let out = bin()
        .args(["plot", "--in"])
        .arg(&dir)
        .arg("--out")
        .arg(dir.join("x"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no ledger"), "{stderr}");
    fs::remove_dir_all(&dir).unwrap();
}
