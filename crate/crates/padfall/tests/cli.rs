//! End-to-end tests of the command-line surface: exit codes, file outputs,
//! and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn padfall(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_padfall"))
        .args(args)
        .env("PADFALL_OUT", out_dir)
        .output()
        .expect("binary runs")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn gen_config_roundtrips_through_parser() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.toml");
    let out = padfall(&["gen-config", "--out", path.to_str().unwrap()], dir.path());
    assert_success(&out);
    let text = std::fs::read_to_string(&path).unwrap();
    let parsed = padfall::config::parse_config(&text).unwrap();
    assert_eq!(parsed, padfall::config::RunConfig::default());
}

#[test]
fn unknown_scenario_exits_with_config_code_and_lists_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = padfall(&["eval", "zero-action", "NOT-A-SCENARIO"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("LMPL"), "{stderr}");
}

#[test]
fn bad_config_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "definitely_not_a_key = 1\n").unwrap();
    let out = padfall(
        &["--config", cfg.to_str().unwrap(), "landscape"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_step_train_writes_initialization_checkpoint_reproducibly() {
    let run = |dir: &Path| {
        let out = padfall(
            &[
                "train",
                "--steps",
                "0",
                "--seed",
                "5",
                "--set",
                "td3.hidden_dims=[8,8]",
            ],
            dir,
        );
        assert_success(&out);
        std::fs::read(dir.join("train/checkpoint_final/actor.bin")).unwrap()
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = run(dir_a.path());
    let b = run(dir_b.path());
    assert_eq!(a, b, "initialization checkpoints must be bit-identical");

    // And it matches a directly initialized learner.
    let cfg = padfall::td3::Td3Config {
        hidden_dims: vec![8, 8],
        ..Default::default()
    };
    let learner = padfall::td3::Learner::new(&cfg, 5).unwrap();
    assert_eq!(a, padfall::neural::encode_params(&learner.actor));
}

#[test]
fn seeded_train_runs_write_identical_logs() {
    let run = |dir: &Path| {
        let out = padfall(
            &[
                "train",
                "--steps",
                "400",
                "--seed",
                "11",
                "--set",
                "td3.hidden_dims=[8,8]",
                "--set",
                "td3.eval_interval=200",
                "--set",
                "td3.eval_episodes=1",
                "--set",
                "episode.max_duration=2.0",
            ],
            dir,
        );
        assert_success(&out);
        std::fs::read(dir.join("train/training_log.csv")).unwrap()
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    assert_eq!(run(dir_a.path()), run(dir_b.path()));
}

#[test]
fn eval_oracle_emits_records_tables_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = padfall(
        &[
            "eval",
            "scripted-oracle",
            "SPL",
            "--set",
            "scenario_episodes=2",
        ],
        dir.path(),
    );
    assert_success(&out);
    let base = dir.path().join("eval/scripted-oracle");
    assert!(base.join("SPL/episode_000.csv").exists());
    assert!(base.join("SPL/episode_000.svg").exists());
    let success = std::fs::read_to_string(base.join("success_rates.csv")).unwrap();
    assert!(success.contains("SPL,scripted-oracle,100%,2,2"), "{success}");

    // Rerunning overwrites with identical bytes.
    let before = std::fs::read(base.join("SPL/episode_001.csv")).unwrap();
    let out2 = padfall(
        &[
            "eval",
            "scripted-oracle",
            "SPL",
            "--set",
            "scenario_episodes=2",
        ],
        dir.path(),
    );
    assert_success(&out2);
    let after = std::fs::read(base.join("SPL/episode_001.csv")).unwrap();
    assert_eq!(before, after);
}

#[test]
fn plot_renders_svgs_and_warns_on_empty_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = padfall(
        &[
            "eval",
            "zero-action",
            "SPL",
            "--set",
            "scenario_episodes=1",
            "--set",
            "episode.max_duration=2.0",
        ],
        dir.path(),
    );
    assert_success(&out);
    let records = dir.path().join("eval/zero-action/SPL");
    std::fs::remove_file(records.join("episode_000.svg")).unwrap();
    let out = padfall(&["plot", records.to_str().unwrap()], dir.path());
    assert_success(&out);
    assert!(records.join("episode_000.svg").exists());
    assert!(records.join("reward_landscape.svg").exists());

    let empty = tempfile::tempdir().unwrap();
    let out = padfall(&["plot", empty.path().to_str().unwrap()], dir.path());
    assert_success(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to plot"));
}

#[test]
fn landscape_command_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = padfall(
        &["landscape", "--set", "landscape.resolution=11"],
        dir.path(),
    );
    assert_success(&out);
    let csv = std::fs::read_to_string(dir.path().join("landscape/reward_landscape.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11 * 11 + 1);
    assert!(dir.path().join("landscape/reward_landscape.svg").exists());
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = padfall(&["--help"], dir.path());
    assert_success(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["train", "eval", "bench", "plot", "landscape", "gen-config"] {
        assert!(text.contains(cmd), "help missing {cmd}: {text}");
    }
}
