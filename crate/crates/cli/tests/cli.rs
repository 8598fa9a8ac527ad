use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dnnbound"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dnnbound-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

const EXAMPLE: &str = r#"{
  "n": 3,
  "objective": [{"expo": [1, 1, 0], "coef": -1.0}, {"expo": [0, 1, 1], "coef": -1.0}],
  "bin": [1, 2],
  "box": [0],
  "comp": [[0, 1]]
}"#;

#[test]
fn missing_instance_exits_with_input_error() {
    let out = bin().args(["solve", "/nonexistent/pop.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "input");
    assert!(err["message"].as_str().unwrap().starts_with("instance not found"));
}

#[test]
fn solves_the_three_variable_example() {
    let path = scratch("example.json");
    std::fs::write(&path, EXAMPLE).unwrap();
    let out = run(bin().arg("solve").arg(&path));
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["ell"], 2);
    assert_eq!(r["block_sizes"], serde_json::json!([3, 3]));
    assert!(r["lbv"].as_f64().unwrap() <= -1.0);
    assert!(r["lbv"].as_f64().unwrap() <= r["y0_u"].as_f64().unwrap());

    let out = run(bin().arg("check").arg(&path));
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn generate_is_deterministic_and_feeds_solve() {
    let (a, b) = (scratch("arrow-a.json"), scratch("arrow-b.json"));
    for p in [&a, &b] {
        let out = run(bin().args(["generate", "arrow", "--comp", "10", "--seed", "3", "-o"]).arg(p));
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let csv = scratch("rows.csv");
    let _ = std::fs::remove_file(&csv);
    let out = run(bin().arg("solve").arg(&a).arg("--csv").arg(&csv));
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((r["n"].as_u64(), r["ell"].as_u64()), (Some(13), Some(3)));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "instance,d,n,ell,LBv,sec,apgit,bpit,term");
    assert_eq!(lines.len(), 2);
    let lbv: f64 = lines[1].split(',').nth(4).unwrap().parse().unwrap();
    assert_eq!(lbv, r["lbv"].as_f64().unwrap());
}

#[test]
fn rejects_invalid_parameters() {
    let path = scratch("example-bad.json");
    std::fs::write(&path, EXAMPLE).unwrap();
    let out = bin().arg("solve").arg(&path).args(["--eta-r", "0.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
