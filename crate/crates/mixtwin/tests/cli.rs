// Copyright 2026 The mixtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mixtwin"));
    c.env("RUST_LOG", "error");
    c
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(c: &mut Command) -> (i32, String) {
    let Output { status, stdout, stderr } = c.output().unwrap();
    let text = format!("{}{}", String::from_utf8_lossy(&stdout), String::from_utf8_lossy(&stderr));
    (status.code().unwrap_or(-1), text)
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SHORT_CHAIN: &str = r#"{
  "name": "short",
  "max_duration_s": 5,
  "platoon": [
    {"vehicle_id": 1, "kind": "Virtual", "role": "Head", "source": "HeadProfile"},
    {"vehicle_id": 2, "kind": "Virtual", "role": "CAV", "source": "CACC"}
  ]
}"#;

#[test]
fn shipped_scenarios_validate() {
    for f in ["mixed_half_sine.json", "mixed_brake.json", "mixed_brake_briefed.json", "mixed_brake_aggressive.json"] {
        let (code, out) = run(bin().arg("validate").arg(scenario(f)));
        assert_eq!(code, 0, "{f}: {out}");
        assert!(out.contains("ok"), "{out}");
    }
}

#[test]
fn config_errors_exit_one_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.json", r#"{"platoon": [], "lapz": 3}"#);
    let (code, out) = run(bin().arg("validate").arg(&p));
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("lapz"), "{out}");

    let p = write(
        dir.path(),
        "two_heads.json",
        r#"{"platoon": [
            {"vehicle_id": 1, "kind": "Virtual", "role": "Head", "source": "HeadProfile"},
            {"vehicle_id": 2, "kind": "Virtual", "role": "Head", "source": "HeadProfile"}]}"#,
    );
    let (code, out) = run(bin().arg("validate").arg(&p));
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("exactly one Head"), "{out}");

    let (code, out) = run(bin().arg("validate").arg(dir.path().join("missing.json")));
    assert_eq!(code, 1, "{out}");
}

#[test]
fn usage() {
    assert_eq!(run(bin().arg("--help")).0, 0);
    assert_eq!(run(bin().arg("--version")).0, 0);
    let (code, out) = run(bin().args(["run", "--no-such-flag"]));
    assert_eq!(code, 1, "{out}");
    assert_eq!(run(&mut bin()).0, 1);
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "short.json", SHORT_CHAIN);
    let out_dir = dir.path().join("out");
    let (code, out) = run(bin().arg("run").arg(&spec).arg("--seed").arg("3").arg("--out").arg(&out_dir));
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("short (lockstep)"), "{out}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["ticks"], 250);
    let log = std::fs::read_to_string(out_dir.join("pool_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2 * 250);
    assert!(out_dir.join("vehicle_2.csv").exists());
}

#[test]
fn unsettled_platoon_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "loose.json",
        r#"{
  "initial_gaps": 60,
  "settle": {"timeout_s": 1.0},
  "perturbation": {"shape": {"kind": "HalfSine"}},
  "platoon": [
    {"vehicle_id": 1, "kind": "Virtual", "role": "Head", "source": "HeadProfile"},
    {"vehicle_id": 2, "kind": "Virtual", "role": "CAV", "source": "CACC"}
  ]
}"#,
    );
    let (code, out) = run(bin().arg("run").arg(&spec));
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("did not settle"), "{out}");
}

#[test]
fn agent_exits_three_when_its_hub_goes_away() {
    let mut hub = bin()
        .args(["hub", "--listen", "127.0.0.1:0", "--ws", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(hub.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line
        .split_whitespace()
        .nth(3)
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .to_string();

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "agent.json",
        r#"{"vehicle": {"vehicle_id": 3, "kind": "Virtual", "role": "CAV", "source": "CACC"}}"#,
    );
    let mut agent = bin()
        .arg("agent")
        .arg("--hub")
        .arg(&addr)
        .arg("--config")
        .arg(&cfg)
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    std::thread::sleep(Duration::from_millis(500));
    assert!(agent.try_wait().unwrap().is_none(), "agent exited early");
    hub.kill().unwrap();
    hub.wait().unwrap();

    let deadline = Instant::now() + Duration::from_secs(10);
    let status = loop {
        if let Some(s) = agent.try_wait().unwrap() {
            break s;
        }
        if Instant::now() > deadline {
            agent.kill().unwrap();
            panic!("agent kept running without its hub");
        }
        std::thread::sleep(Duration::from_millis(50));
    };
    assert_eq!(status.code(), Some(3));
}

#[test]
fn missing_agent_config_exits_one() {
    let (code, out) = run(bin().args(["agent", "--hub", "127.0.0.1:9", "--config", "/nonexistent.json"]));
    assert_eq!(code, 1, "{out}");
}
