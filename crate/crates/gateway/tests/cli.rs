use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use governor_core::charter::EXAMPLE_CHARTER_YAML;
use governor_core::engine::TRAIL_FILE;

const GOAL: &str = "Write a cold outreach email sequence";

fn governor() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_governor"));
    c.env_remove("GOVERNOR_CHARTER").env_remove("GOVERNOR_STORE").env_remove("GOVERNOR_PORT");
    c
}

fn run(cmd: &mut Command) -> (i32, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    let out = String::from_utf8(stdout).unwrap();
    eprintln!("{}", String::from_utf8_lossy(&stderr));
    (status.code().unwrap(), out)
}

fn tight_charter(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("tight.yaml");
    std::fs::write(&path, EXAMPLE_CHARTER_YAML.replace("daily_burn_max_usd: 10.0", "daily_burn_max_usd: 0.05"))
        .unwrap();
    path
}

#[test]
fn run_case_study_exits_zero() {
    let (code, out) = run(governor().args(["run", GOAL, "--revenue-cents", "500"]));
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("job-1 COMPLETED"), "{out}");
    assert!(out.contains("rfp-2 -> writer-alpha (utility 0.096)"), "{out}");
    assert!(out.contains("balance 50488c"), "{out}");
}

#[test]
fn run_json_has_outcome() {
    let (code, out) = run(governor().args(["run", GOAL, "--json"]));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["job"]["state"], "COMPLETED");
    assert_eq!(v["outcome"]["audits"].as_array().unwrap().len(), 3);
    assert_eq!(v["digest"].as_str().unwrap().len(), 64);
}

#[test]
fn failed_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let tight = tight_charter(dir.path());
    let (code, out) = run(governor().args(["run", GOAL, "--charter"]).arg(&tight));
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("FAILED"));
    assert!(out.contains("[FISCAL_INSOLVENCY]"), "{out}");

    // same charter through the environment
    let (code, out) = run(governor().args(["run", GOAL]).env("GOVERNOR_CHARTER", &tight));
    assert_eq!(code, 1);
    assert!(out.contains("[FISCAL_INSOLVENCY]"));

    let (code, out) = run(governor().args(["run", GOAL, "--revenue-cents", "5"]));
    assert_eq!(code, 1);
    assert!(out.contains("[UNPROFITABLE_JOB]"), "{out}");
}

#[test]
fn bad_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.yaml");
    std::fs::write(&bad, EXAMPLE_CHARTER_YAML.replace("currency: USD", "currency: usd")).unwrap();
    let out = governor().args(["run", GOAL, "--charter"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fiscal_boundaries.currency"));
    assert_eq!(governor().args(["run", "  "]).output().unwrap().status.code(), Some(2));
    assert_eq!(governor().args(["verify-trail", "/no/such/file"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn stored_trail_verifies_until_tampered() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(governor().args(["run", GOAL, "--store"]).arg(dir.path()));
    assert_eq!(code, 0);
    let trail = dir.path().join(TRAIL_FILE);
    let (code, out) = run(governor().arg("verify-trail").arg(&trail));
    assert_eq!(code, 0, "{out}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["total"], 3);
    assert_eq!(v["failures"], serde_json::json!([]));

    // a second run appends to the same stores
    let (code, _) = run(governor().args(["run", GOAL, "--store"]).arg(dir.path()));
    assert_eq!(code, 0);
    let (_, out) = run(governor().arg("verify-trail").arg(&trail));
    assert_eq!(serde_json::from_str::<serde_json::Value>(&out).unwrap()["total"], 6);

    let text = std::fs::read_to_string(&trail).unwrap();
    let tampered = text.replacen("\"passed\": true", "\"passed\": false", 1);
    assert_ne!(text, tampered);
    std::fs::write(&trail, tampered).unwrap();
    let (code, out) = run(governor().arg("verify-trail").arg(&trail));
    assert_eq!(code, 1);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&out).unwrap()["failures"], serde_json::json!([1]));
}

#[test]
fn eval_fiscal_prints_table() {
    let (code, out) = run(governor().args(["eval", "fiscal"]));
    assert_eq!(code, 0);
    for category in
        ["insufficient balance", "daily burn breach", "unprofitable job", "reserve depletion", "budget ceiling breach"]
    {
        assert!(out.to_lowercase().contains(&category.to_lowercase()), "{category}\n{out}");
    }
    let (code, out) = run(governor().args(["eval", "trust", "--json"]));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(governor().args(["eval", "speed"]).output().unwrap().status.code(), Some(2));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http(port: u16, request: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(10))).ok()?;
    s.write_all(request.as_bytes()).ok()?;
    let mut out = String::new();
    s.read_to_string(&mut out).ok()?;
    Some(out)
}

#[test]
fn serve_answers_http() {
    let port = free_port();
    let mut child = governor()
        .args(["serve", "--port", &port.to_string()])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let get_health = "GET /health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n";
    let deadline = Instant::now() + Duration::from_secs(20);
    let mut resp = None;
    while Instant::now() < deadline {
        if let Some(r) = http(port, get_health) {
            resp = Some(r);
            break;
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    let body = format!("{{\"goal\": \"{GOAL}\", \"revenue_cents\": 500}}");
    let post = format!(
        "POST /missions HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let submitted = http(port, &post);
    let events = http(port, "GET /events?since=0&timeout_ms=0 HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    child.kill().unwrap();
    child.wait().unwrap();
    let resp = resp.expect("server came up");
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("\"status\":\"ok\""));
    let submitted = submitted.unwrap();
    assert!(submitted.starts_with("HTTP/1.1 202"), "{submitted}");
    assert!(events.unwrap().contains("job_submitted"));
}
