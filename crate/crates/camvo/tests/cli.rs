//! End-to-end checks of the command-line surface: synth -> run -> metrics,
//! sweeps, config files, and error reporting.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_camvo"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("camvo-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn camvo");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(out_path: &Path, rounds: usize, seed: u64) {
    run_ok(
        bin()
            .arg("synth")
            .args(["--rounds", &rounds.to_string()])
            .args(["--seed", &seed.to_string()])
            .args(["--gamma", "0.3"])
            .args(["--preset", "mmlu"])
            .arg("--standardize-latent")
            .args(["--out", out_path.to_str().unwrap()]),
    );
}

#[test]
fn synth_is_deterministic_and_loadable() {
    let dir = temp_dir("synth");
    let a = dir.join("a.jsonl");
    let b = dir.join("b.jsonl");
    synth(&a, 50, 9);
    synth(&b, 50, 9);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 51); // header + 50 records
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["k"], 7);
    assert_eq!(header["m"], 4);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn run_writes_reproducible_outputs() {
    let dir = temp_dir("run");
    let data = dir.join("data.jsonl");
    synth(&data, 120, 4);
    for sub in ["r1", "r2"] {
        run_ok(
            bin()
                .arg("run")
                .args(["--dataset", data.to_str().unwrap()])
                .args(["--mode", "camvo"])
                .args(["--delta", "0.9"])
                .args(["--seed", "11"])
                .args(["--out-dir", dir.join(sub).to_str().unwrap()]),
        );
    }
    let rounds1 = fs::read(dir.join("r1/rounds.csv")).unwrap();
    let rounds2 = fs::read(dir.join("r2/rounds.csv")).unwrap();
    assert_eq!(rounds1, rounds2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("r1/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "camvo");
    assert_eq!(summary["total_rounds"], 120);
    assert!(summary["accuracy"].as_f64().unwrap() > 0.5);
    let first_line = String::from_utf8(rounds1).unwrap();
    assert!(first_line.starts_with("t,subset_bitmask,cost,predicted,true,reward_bits,cum_cost,cum_acc"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_drives_runs_and_flags_override() {
    let dir = temp_dir("cfg");
    let data = dir.join("data.jsonl");
    synth(&data, 60, 5);
    let cfg = dir.join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "mode = baseline\ndataset = {}\ndelta = 0.7\nk_min = 2\n",
            data.display()
        ),
    )
    .unwrap();
    run_ok(
        bin()
            .arg("run")
            .args(["--config", cfg.to_str().unwrap()])
            .args(["--seed", "2"])
            .args(["--out-dir", dir.join("from-config").to_str().unwrap()]),
    );
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.join("from-config/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["mode"], "baseline");
    assert_eq!(summary["config"]["k_min"], 2);

    // A flag beats the file.
    run_ok(
        bin()
            .arg("run")
            .args(["--config", cfg.to_str().unwrap()])
            .args(["--mode", "full_majority"])
            .args(["--seed", "2"])
            .args(["--out-dir", dir.join("overridden").to_str().unwrap()]),
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("overridden/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["mode"], "full_majority");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_emits_table_and_cell_logs() {
    let dir = temp_dir("sweep");
    let data = dir.join("data.jsonl");
    synth(&data, 80, 6);
    run_ok(
        bin()
            .arg("sweep")
            .args(["--dataset", data.to_str().unwrap()])
            .args(["--deltas", "0.9,0.8"])
            .args(["--k-mins", "1,3"])
            .args(["--seeds", "1"])
            .args(["--seed", "1"])
            .arg("--keep-cell-logs")
            .args(["--out-dir", dir.join("out").to_str().unwrap()]),
    );
    let table = fs::read_to_string(dir.join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "delta,k_min,seed,target_acc,accuracy,cost_per_mtok");
    assert_eq!(lines.len(), 5); // header + 4 cells
    for cell in ["delta0.9_k1_seed1", "delta0.9_k3_seed1", "delta0.8_k1_seed1", "delta0.8_k3_seed1"] {
        assert!(dir.join("out/cells").join(cell).join("rounds.csv").exists());
        assert!(dir.join("out/cells").join(cell).join("summary.json").exists());
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn metrics_recomputes_accuracy_from_a_log() {
    let dir = temp_dir("metrics");
    let data = dir.join("data.jsonl");
    synth(&data, 90, 7);
    run_ok(
        bin()
            .arg("run")
            .args(["--dataset", data.to_str().unwrap()])
            .args(["--mode", "camvo"])
            .args(["--seed", "3"])
            .args(["--out-dir", dir.join("out").to_str().unwrap()]),
    );
    let out = run_ok(
        bin()
            .arg("metrics")
            .args(["--log", dir.join("out/rounds.csv").to_str().unwrap()])
            .args(["--labels", "4"]),
    );
    let recomputed: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("metrics emits JSON");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(recomputed["accuracy"], summary["accuracy"]);
    assert_eq!(recomputed["total_rounds"], summary["total_rounds"]);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_inputs_fail_with_messages() {
    let dir = temp_dir("errs");
    let data = dir.join("data.jsonl");
    synth(&data, 10, 8);

    // k_min above the arm count.
    let out = bin()
        .arg("run")
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--k-min", "9"])
        .args(["--seed", "1"])
        .args(["--out-dir", dir.join("x").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_min exceeds arm count"));

    // Missing dataset path.
    let out = bin()
        .arg("run")
        .args(["--dataset", dir.join("nope.jsonl").to_str().unwrap()])
        .args(["--seed", "1"])
        .args(["--out-dir", dir.join("y").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());

    // Unknown mode.
    let out = bin()
        .arg("run")
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--mode", "psychic"])
        .args(["--seed", "1"])
        .args(["--out-dir", dir.join("z").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown mode"));
    fs::remove_dir_all(&dir).ok();
}
