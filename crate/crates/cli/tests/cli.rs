use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qrl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrl")).args(args).current_dir(dir).env("QRL_THREADS", "1").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TRAIN: &str = r#"
seed = 5
deterministic = true
[env]
task = "permutation"
topology = "3-L"
[arch]
conv_filters = 2
hidden = [16]
[ppo]
n_envs = 2
rollout_len = 32
minibatch = 32
total_steps = 2048
[curriculum]
max_difficulty = 3
"#;

#[test]
fn topologies_lists_edges() {
    let dir = tempfile::tempdir().unwrap();
    let out = qrl(&["topologies", "--name", "4-L"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0 1\n1 2\n2 3\n");
    let out = qrl(&["topologies"], dir.path());
    assert!(stdout(&out).lines().any(|l| l == "6-T 6"));
    assert_eq!(code(&qrl(&["topologies", "--name", "6-Q"], dir.path())), 2);
}

#[test]
fn train_then_synth() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("run.toml"), TRAIN).unwrap();
    let out = qrl(&["train", "--config", "run.toml", "--out", "perm.ckpt"], p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(p.join("perm.ckpt").exists());
    let log = fs::read_to_string(p.join("perm.log.csv")).unwrap();
    assert!(log.starts_with("steps,difficulty,success_rate"));

    fs::write(p.join("t.txt"), "1 0 2\n").unwrap();
    let out = qrl(&["synth", "--ckpt", "perm.ckpt", "--target", "t.txt", "--runs", "50", "--out", "o.qasm"], p);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("o.json")).unwrap()).unwrap();
    for key in ["success", "runs_succeeded", "count2q", "depth2q", "time_ms"] {
        assert!(metrics.get(key).is_some(), "{key}");
    }
    if metrics["success"] == true {
        assert_eq!(code(&out), 0);
        let text = fs::read_to_string(p.join("o.qasm")).unwrap();
        assert!(text.starts_with("qubits 3\n"));
    } else {
        assert_eq!(code(&out), 4);
    }

    let out = qrl(&["synth", "--ckpt", "perm.ckpt", "--random", "2", "--out", "r.qasm"], p);
    assert!(matches!(code(&out), 0 | 4));

    fs::write(p.join("bad.toml"), TRAIN.replace("seed = 5", "sead = 5")).unwrap();
    let out = qrl(&["train", "--config", "bad.toml", "--out", "x.ckpt"], p);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sead"));
}

#[test]
fn route_with_baseline_writes_verified_result() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("c.qasm"), "qubits 5\ncx 0 4\nh 2\ncx 1 3\ncx 4 2\ncx 0 1\n").unwrap();
    let out = qrl(
        &["route", "--baseline", "sabre", "--circuit", "c.qasm", "--coupling", "5-T", "--iterations", "2", "--out", "r.qasm"],
        p,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(doc["circuit_file"], "r.qasm");
    assert_eq!(doc["verification"]["legal"], true);
    assert_eq!(doc["verification"]["permutation"], true);
    assert_eq!(doc["verification"]["dense"], true);
    assert_eq!(doc["initial_layout"].as_array().unwrap().len(), 5);
    assert!(doc["metrics"]["count2q"].as_u64().unwrap() >= 4);
    assert!(fs::read_to_string(p.join("r.qasm")).unwrap().starts_with("qubits 5\n"));

    fs::write(p.join("chain.qasm"), "qubits 5\ncx 0 3\ncx 3 1\nh 2\ncx 1 4\ncx 4 2\n").unwrap();
    let out = qrl(
        &["route", "--baseline", "sabre", "--circuit", "chain.qasm", "--coupling", "5-L", "--seed-layout", "path", "--out", "s.qasm"],
        p,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("s.json")).unwrap()).unwrap();
    assert_eq!(doc["metrics"]["swaps"], 0);
    assert_eq!(doc["verification"]["dense"], true);

    let out = qrl(&["route", "--baseline", "sabre", "--circuit", "c.qasm", "--coupling", "3-L", "--out", "r.qasm"], p);
    assert_ne!(code(&out), 0);
    let out = qrl(&["route", "--circuit", "c.qasm", "--coupling", "5-T", "--out", "r.qasm"], p);
    assert_eq!(code(&out), 2);
}

#[test]
fn bench_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("suite.toml"),
        "[bench]\ntargets = 3\n[[bench.cases]]\ntopology = \"3-L\"\ntask = \"linear\"\nalgorithms = [\"oracle\"]\n",
    )
    .unwrap();
    let out = qrl(&["bench", "--suite", "suite.toml", "--out", "res"], p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(p.join("res/bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("3-L,oracle,1,3,"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("res/bench.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qrl"))
        .args(["topologies"])
        .env("QRL_THREADS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
