use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_stackgame");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn stackgame(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = stackgame(dir, args);
    assert_eq!(
        code(&o),
        0,
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn csv_rows(p: impl AsRef<Path>) -> Vec<Vec<String>> {
    read(p)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Small training config shared by the train and eval tests.
const SMALL: &str = "\
train.batch_size = 4
train.inner_iters = 2
train.lr_leader = \"fixed:0.0001\"
train.lr_follower = \"fixed:0.0001\"
env.max_steps = 20
eval.pursuit_episodes = 6
eval.bellman.num_states = 4
eval.bellman.num_rollouts = 4
";

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("small.toml");
    fs::write(&p, format!("{SMALL}{extra}")).unwrap();
    p
}

#[test]
fn minmax_default_reaches_the_equilibrium() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["minmax", "quadratic", "--out", "run"]);
    let run = d.path().join("run");
    let dump: serde_json::Value = serde_json::from_str(&read(run.join("solution.json"))).unwrap();
    let x = dump["avg_x"][0].as_f64().unwrap();
    assert!((x - 0.5).abs() <= 0.05, "averaged x = {x}");
    assert_eq!(dump["schema_version"], 1);

    let metrics = read(run.join("metrics.csv"));
    assert_eq!(metrics.lines().next(), Some("t,lr,f_hat,delta_hat,eps_hat"));
    assert_eq!(metrics.lines().count(), 4001);
    assert!(csv_rows(run.join("metrics.csv"))
        .iter()
        .all(|r| r.len() == 5 && r[4].parse::<f64>().unwrap() >= 0.0));

    let report: serde_json::Value =
        serde_json::from_str(&read(run.join("tables/se_residual.json"))).unwrap();
    assert_eq!(report[0]["iterate"], "last");
    assert_eq!(report[1]["iterate"], "average");
    assert!(run.join("config.resolved").exists());
}

#[test]
fn minmax_with_seed_is_byte_identical() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "minmax.outer_iters = 300\n").unwrap();
    for out in ["a", "b"] {
        ok(
            d.path(),
            &[
                "minmax",
                "quadratic",
                "--config",
                "c.toml",
                "--seed",
                "7",
                "--out",
                out,
            ],
        );
    }
    for f in [
        "metrics.csv",
        "solution.json",
        "config.resolved",
        "tables/se_residual.txt",
        "tables/se_residual.json",
    ] {
        assert_eq!(
            read(d.path().join("a").join(f)),
            read(d.path().join("b").join(f)),
            "{f}"
        );
    }
    assert!(read(d.path().join("a/config.resolved")).contains("seed = 7"));
}

#[test]
fn usage_errors_exit_2() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("typo.toml"), "minmax.outer_iter = 3\n").unwrap();
    fs::write(d.path().join("cap.toml"), "minmax.lambda_cap = \"lots\"\n").unwrap();
    let cases: &[&[&str]] = &[
        &["minmax", "quadratic", "--config", "missing.toml"],
        &["minmax", "quadratic", "--config", "typo.toml"],
        &["minmax", "quadratic", "--config", "cap.toml"],
        &["minmax", "cubic"],
        &["minmax", "quadratic-noisy:-1"],
        &["train", "--algo", "gradient-magic"],
        &["train", "--outer", "0"],
        &["train", "--algo", "sim_reinforce", "--outer", "1"],
        &["eval", "tournament", "--attacker", "=x.json", "--pursuit"],
        &["eval", "tournament", "--pursuit"],
        &["eval", "bellman", "--leader", "l.json"],
        &["frobnicate"],
        &[],
    ];
    for args in cases {
        let o = stackgame(d.path(), &[args, &["--out", "never"][..]].concat());
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!d.path().join("never").exists(), "{args:?} created outputs");
    }
}

#[test]
fn occupied_out_dir_needs_force() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("run");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("notes.txt"), "keep me").unwrap();
    let m = fixture("matching_pennies.csv");
    let args = [
        "eval",
        "verify",
        "--matrix",
        m.to_str().unwrap(),
        "--out",
        "run",
    ];
    assert_eq!(code(&stackgame(d.path(), &args)), 2);
    assert!(!out.join("tables").exists());

    ok(d.path(), &[&args[..], &["--force"]].concat());
    assert!(out.join("tables/verify.json").exists());
    assert_eq!(read(out.join("notes.txt")), "keep me");
}

#[test]
fn train_writes_records_and_checkpoints() {
    let d = TempDir::new().unwrap();
    small_config(d.path(), "");
    ok(
        d.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--algo",
            "nested-pgda",
            "--outer",
            "10",
            "--out",
            "run",
        ],
    );
    let run = d.path().join("run");
    let metrics = read(run.join("metrics.csv"));
    assert_eq!(
        metrics.lines().next(),
        Some("iter,return,violation,grad_x_norm,grad_y_norm,lambda_norm,sec")
    );
    let rows = csv_rows(run.join("metrics.csv"));
    assert_eq!(rows.len(), 10);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], i.to_string());
        assert_eq!(r[6], "0");
    }
    let ckpts: Vec<_> = fs::read_dir(run.join("checkpoints")).unwrap().collect();
    assert!(!ckpts.is_empty());
    let leader: serde_json::Value =
        serde_json::from_str(&read(run.join("checkpoints/leader.json"))).unwrap();
    assert_eq!(leader["kind"], "bilinear");
    assert_eq!(leader["metadata"]["role"], "leader");
    assert!(read(run.join("figures/episodes.svg")).starts_with("<svg"));
}

#[test]
fn resumed_training_matches_uninterrupted_run() {
    let d = TempDir::new().unwrap();
    small_config(d.path(), "train.checkpoint_every = 3\n");
    ok(
        d.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--outer",
            "6",
            "--out",
            "full",
        ],
    );
    ok(
        d.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--outer",
            "3",
            "--out",
            "head",
        ],
    );
    assert!(d.path().join("head/checkpoints/iter_000003.json").exists());
    ok(
        d.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--outer",
            "6",
            "--resume",
            "head/checkpoints/iter_000003.json",
            "--out",
            "tail",
        ],
    );
    for f in [
        "metrics.csv",
        "checkpoints/final.json",
        "checkpoints/leader.json",
        "checkpoints/follower.json",
    ] {
        assert_eq!(
            read(d.path().join("full").join(f)),
            read(d.path().join("tail").join(f)),
            "{f}"
        );
    }
    let first: Vec<String> = csv_rows(d.path().join("tail/metrics.csv"))
        .iter()
        .map(|r| r[0].clone())
        .collect();
    assert_eq!(first, ["0", "1", "2", "3", "4", "5"]);
}

#[test]
fn resume_from_inside_the_output_dir_with_force() {
    let d = TempDir::new().unwrap();
    small_config(d.path(), "train.checkpoint_every = 2\n");
    ok(
        d.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--outer",
            "2",
            "--out",
            "run",
        ],
    );
    ok(
        d.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--outer",
            "4",
            "--resume",
            "run/checkpoints/final.json",
            "--out",
            "run",
            "--force",
        ],
    );
    assert_eq!(csv_rows(d.path().join("run/metrics.csv")).len(), 4);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let d = TempDir::new().unwrap();
    small_config(d.path(), "");
    ok(
        d.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--outer",
            "3",
            "--seed",
            "5",
            "--out",
            "a",
        ],
    );
    ok(
        d.path(),
        &["train", "--config", "a/config.resolved", "--out", "b"],
    );
    for f in [
        "config.resolved",
        "metrics.csv",
        "checkpoints/final.json",
        "figures/episodes.svg",
    ] {
        assert_eq!(
            read(d.path().join("a").join(f)),
            read(d.path().join("b").join(f)),
            "{f}"
        );
    }
}

#[test]
fn bad_checkpoint_exits_1() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("junk.json"), "{\"kind\": 3}").unwrap();
    fs::write(
        d.path().join("short.json"),
        r#"{"schema_version":1,"kind":"bilinear","shape":[1,13],"theta":"AAAAAAAA8D8="}"#,
    )
    .unwrap();
    for file in ["junk.json", "short.json", "absent.json"] {
        let o = stackgame(
            d.path(),
            &["eval", "pursuit", "--attacker", file, "--out", "p"],
        );
        assert_eq!(
            code(&o),
            1,
            "{file}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let o = stackgame(d.path(), &["train", "--resume", file, "--out", "t"]);
        assert_eq!(
            code(&o),
            1,
            "{file}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn bellman_on_random_policies_is_positive() {
    let d = TempDir::new().unwrap();
    small_config(d.path(), "");
    ok(
        d.path(),
        &[
            "eval",
            "bellman",
            "--variant",
            "stackelberg",
            "--config",
            "small.toml",
            "--out",
            "b",
        ],
    );
    let rows = csv_rows(d.path().join("b/tables/bellman.csv"));
    assert_eq!(rows[0][0], "stackelberg");
    assert_eq!(rows[0][1], "4");
    assert!(rows[0][3].parse::<f64>().unwrap() > 0.0);
    assert_eq!(
        csv_rows(d.path().join("b/tables/bellman_states.csv")).len(),
        4
    );
}

#[test]
fn verify_matching_pennies_has_value_zero() {
    let d = TempDir::new().unwrap();
    let m = fixture("matching_pennies.csv");
    ok(
        d.path(),
        &[
            "eval",
            "verify",
            "--matrix",
            m.to_str().unwrap(),
            "--out",
            "v",
        ],
    );
    let r: serde_json::Value =
        serde_json::from_str(&read(d.path().join("v/tables/verify.json"))).unwrap();
    assert!(r["value"].as_f64().unwrap().abs() <= 1e-9);
    for p in r["leader_mix"].as_array().unwrap() {
        assert!((p.as_f64().unwrap() - 0.5).abs() <= 1e-9);
    }
    // grid oracle over the leader mix: max_p min_b p·q_b
    let best = (0..=100)
        .map(|i| {
            let p = i as f64 / 100.0;
            f64::min(p - (1.0 - p), -p + (1.0 - p))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((r["value"].as_f64().unwrap() - best).abs() <= 1e-9);
}

#[test]
fn verify_rejects_bad_matrices() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("ragged.csv"), "1,2\n3\n").unwrap();
    fs::write(d.path().join("text.csv"), "1,x\n").unwrap();
    for f in ["ragged.csv", "text.csv", "absent.csv"] {
        let o = stackgame(d.path(), &["eval", "verify", "--matrix", f, "--out", "v"]);
        assert_eq!(code(&o), 2, "{f}");
    }
}

#[test]
fn tournament_one_pair_two_matches() {
    let d = TempDir::new().unwrap();
    small_config(d.path(), "");
    ok(
        d.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--outer",
            "2",
            "--out",
            "t",
        ],
    );
    ok(
        d.path(),
        &[
            "eval",
            "tournament",
            "--config",
            "small.toml",
            "--attacker",
            "a=t/checkpoints/follower.json",
            "--defender",
            "d=t/checkpoints/final.json",
            "--matches",
            "2",
            "--seeds",
            "0",
            "--out",
            "e",
        ],
    );
    let matches = csv_rows(d.path().join("e/tables/matches.csv"));
    assert_eq!(matches.len(), 2);
    for m in &matches {
        assert_eq!(&m[..2], ["a", "d"]);
        assert!(["attacker_win", "defender_win", "draw"].contains(&m[3].as_str()));
    }
    let table = csv_rows(d.path().join("e/tables/tournament.csv"));
    assert_eq!(table.len(), 1);
    assert_eq!(table[0][0], "a vs d");
    let wins: f64 = [1, 3, 5]
        .iter()
        .map(|&i| table[0][i].parse::<f64>().unwrap())
        .sum();
    assert_eq!(wins, 2.0);
    assert!(read(d.path().join("e/tables/tournament.txt")).contains("a vs d"));
}

#[test]
fn pursuit_counts_add_up() {
    let d = TempDir::new().unwrap();
    small_config(d.path(), "");
    ok(
        d.path(),
        &[
            "train",
            "--config",
            "small.toml",
            "--outer",
            "2",
            "--out",
            "t",
        ],
    );
    for flag in ["--attacker", "--coupled"] {
        let out = format!("p{flag}");
        ok(
            d.path(),
            &[
                "eval",
                "pursuit",
                "--config",
                "small.toml",
                flag,
                "t/checkpoints/final.json",
                "--out",
                &out,
            ],
        );
        let rows = csv_rows(d.path().join(&out).join("tables/pursuit.csv"));
        let n: Vec<usize> = rows[0].iter().map(|v| v.parse().unwrap()).collect();
        assert_eq!(n[0], 6);
        assert_eq!(n[1] + n[2] + n[3], 6);
    }
}
