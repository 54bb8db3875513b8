use std::fs;
use std::path::Path;
use std::process::Command;

use iol::env::{ArmSpec, CostModel};
use iol::error::Error;
use iol::harness::{
    mean_std, preset_small_scale, replay, replay_all, run, OracleSettings, PhiSpec, RunConfig,
    StepSize, CONFIG_FILE, METADATA_FILE, SLOTS_FILE, SUMMARY_COLUMNS, SUMMARY_FILE,
    TRAJECTORY_FILE,
};
use iol::oracle::SStarMethod;

fn deterministic(t: u64, r: usize) -> RunConfig {
    RunConfig {
        k: 1,
        n: 1,
        t,
        r,
        seed: 5,
        phi: PhiSpec::Explicit(vec![0.5]),
        eta: StepSize::Explicit(0.1),
        output_dir: None,
        arms: vec![ArmSpec::Bernoulli { mean: 1.0 }],
        cost_model: CostModel::IidTruncatedNormal {
            mu: 0.0,
            sigma: 0.0,
            c_min: 0.0,
        },
        agent_policies: Vec::new(),
        oracle: OracleSettings::default(),
    }
}

fn small(t: u64, r: usize, dir: &Path) -> RunConfig {
    let mut c = preset_small_scale();
    c.t = t;
    c.r = r;
    c.oracle = OracleSettings {
        samples: 200,
        iterations: 50,
    };
    c.output_dir = Some(dir.to_path_buf());
    c
}

#[test]
fn single_slot_matches_hand_trace() {
    let out = run(&deterministic(1, 1)).unwrap();
    assert_eq!(
        out.oracle.baselines.s_star_method,
        SStarMethod::ExactFiniteSupport
    );
    assert_eq!(out.oracle.baselines.s_star, 0.5);
    assert_eq!(out.oracle.baselines.s_dagger, 0.5);
    // r_hat = 1, assigned, paid 1 - lambda = 1, reward 1, cost 0
    assert_eq!(out.rows[0], vec!["0,1,1,1:1,1,0,1,0,1,0".to_string()]);
    let s = &out.runs[0];
    assert_eq!(s.ledger.per_agent_utilization, vec![1]);
    assert_eq!(s.metrics.violation, 0.5);
    assert_eq!(s.metrics.regret, -0.5);
    assert_eq!(s.metrics.profit, 0.0);
}

#[test]
fn dual_price_rises_after_full_use() {
    let out = run(&deterministic(2, 1)).unwrap();
    // lambda_2 = 0.1 * (1 - 0.5); still assigned since 1 - 0.05 > 0
    assert_eq!(
        out.rows[0][1],
        "0,2,1,1:1,0.95,0.05,1,0,1,0.050000000000000044"
    );
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&small(300, 2, a.path())).unwrap();
    run(&small(300, 2, b.path())).unwrap();
    for file in [SLOTS_FILE, SUMMARY_FILE, TRAJECTORY_FILE, CONFIG_FILE] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
    assert!(a.path().join(METADATA_FILE).exists());
}

#[test]
fn different_seed_different_rows() {
    let a = tempfile::tempdir().unwrap();
    let mut other = small(300, 1, a.path());
    other.output_dir = None;
    let first = run(&other).unwrap();
    other.seed += 100;
    let second = run(&other).unwrap();
    assert_ne!(first.rows, second.rows);
}

#[test]
fn output_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&small(120, 3, dir.path())).unwrap();
    let slots = fs::read_to_string(dir.path().join(SLOTS_FILE)).unwrap();
    let mut lines = slots.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run,slot,r_hat_1,r_hat_2,r_hat_3,r_hat_4,r_hat_5,assignment,payment_1,payment_2,lambda_1,lambda_2,reward,cost,welfare,profit"
    );
    assert_eq!(lines.count(), 360);
    assert!(out.rows.iter().all(|r| r.len() == 120));

    let trajectory = fs::read_to_string(dir.path().join(TRAJECTORY_FILE)).unwrap();
    assert_eq!(trajectory.lines().count(), 121);
    assert!(trajectory.lines().nth(120).unwrap().ends_with(",0.9"));

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(METADATA_FILE)).unwrap()).unwrap();
    assert_eq!(meta["s_star_method"], "dual-saa(200)");
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn aggregation_is_mean_and_sample_std() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&small(200, 2, dir.path())).unwrap();
    for (c, name) in SUMMARY_COLUMNS.iter().enumerate() {
        let a = out.runs[0].values()[c];
        let b = out.runs[1].values()[c];
        assert!(
            (out.mean[c] - (a + b) / 2.0).abs() <= 1e-9 * (1.0 + a.abs()),
            "{name}"
        );
        assert!(
            (out.std[c] - (a - b).abs() / 2f64.sqrt()).abs() <= 1e-9 * (1.0 + a.abs()),
            "{name}"
        );
    }
    assert_eq!(out.runs[1].seed, out.runs[0].seed + 1);

    // the summary file carries the same numbers
    let mut reader = csv::Reader::from_path(dir.path().join(SUMMARY_FILE)).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(&rows[2][0], "mean");
    let regret: f64 = rows[2][2].parse().unwrap();
    assert_eq!(regret, out.mean_of("regret"));
}

#[test]
fn mean_std_definition() {
    assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
    assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
}

#[test]
fn replay_matches_first_and_last_slot() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(150, 2, dir.path());
    run(&config).unwrap();
    let first = replay(dir.path(), 0, 1).unwrap();
    assert_eq!(first.record.slot, 1);
    assert!(first.metrics.is_none());
    let last = replay(dir.path(), 1, 150).unwrap();
    assert!(last.metrics.is_some());
    assert_eq!(replay_all(dir.path(), 1).unwrap(), 150);
}

#[test]
fn tampered_row_detected() {
    let dir = tempfile::tempdir().unwrap();
    run(&small(60, 1, dir.path())).unwrap();
    let path = dir.path().join(SLOTS_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // flip the recorded reward of slot 10
    let mut fields: Vec<String> = lines[10].split(',').map(String::from).collect();
    let reward = fields.len() - 4;
    fields[reward] = if fields[reward] == "1" {
        "0".into()
    } else {
        "1".into()
    };
    lines[10] = fields.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    assert!(replay(dir.path(), 0, 9).is_ok());
    assert!(matches!(
        replay(dir.path(), 0, 10),
        Err(Error::ReplayMismatch { slot: 10, .. })
    ));
    assert!(matches!(
        replay_all(dir.path(), 0),
        Err(Error::ReplayMismatch { slot: 10, .. })
    ));
}

#[test]
fn tampered_summary_detected() {
    let dir = tempfile::tempdir().unwrap();
    run(&small(40, 1, dir.path())).unwrap();
    let path = dir.path().join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[1].split(',').map(String::from).collect();
    fields[2] = "12345".into();
    lines[1] = fields.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert!(matches!(
        replay(dir.path(), 0, 40),
        Err(Error::ReplayMismatch { .. })
    ));
}

#[test]
fn missing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        replay(dir.path(), 0, 1),
        Err(Error::MissingArtifact(_))
    ));
    run(&small(10, 1, dir.path())).unwrap();
    fs::remove_file(dir.path().join(SLOTS_FILE)).unwrap();
    assert!(matches!(
        replay(dir.path(), 0, 1),
        Err(Error::MissingArtifact(_))
    ));
}

#[test]
fn replay_rejects_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    run(&small(10, 1, dir.path())).unwrap();
    assert!(replay(dir.path(), 0, 11).is_err());
    assert!(replay(dir.path(), 1, 1).is_err());
    assert!(replay(dir.path(), 0, 0).is_err());
}

#[test]
fn cli_run_oracle_and_replay() {
    let bin = env!("CARGO_BIN_EXE_iol");
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");

    let printed = Command::new(bin)
        .args(["preset", "small", "--print", "--T", "80"])
        .output()
        .unwrap();
    assert!(printed.status.success());
    let text = String::from_utf8(printed.stdout).unwrap();
    let config = RunConfig::from_toml_str(&text).unwrap();
    assert_eq!(config.t, 80);
    let config_path = dir.path().join("small.toml");
    fs::write(
        &config_path,
        text.replace("samples = 2000", "samples = 100"),
    )
    .unwrap();

    let oracle = Command::new(bin)
        .arg("oracle")
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(oracle.status.success());
    let oracle_text = String::from_utf8(oracle.stdout).unwrap();
    assert!(oracle_text.contains("S† = 0.9"), "{oracle_text}");

    let status = Command::new(bin)
        .arg("run")
        .arg(&config_path)
        .args(["--runs", "2", "--seed", "3", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let stored = RunConfig::load(&out_dir.join(CONFIG_FILE)).unwrap();
    assert_eq!((stored.r, stored.seed), (2, 3));

    let replayed = Command::new(bin)
        .arg("replay")
        .arg(&out_dir)
        .args(["--slot", "80", "--run", "1"])
        .output()
        .unwrap();
    assert!(
        replayed.status.success(),
        "{}",
        String::from_utf8_lossy(&replayed.stderr)
    );
    assert!(String::from_utf8(replayed.stdout)
        .unwrap()
        .contains("final metrics match summary"));

    let all = Command::new(bin)
        .arg("replay")
        .arg(&out_dir)
        .arg("--all")
        .output()
        .unwrap();
    assert!(all.status.success());

    let bad = Command::new(bin)
        .arg("run")
        .arg(dir.path().join("nope.toml"))
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
