mod common;

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use axum::http::Method;
use common::{app, bundled, call, SMALL};
use opa_workbench::document::{canonical_hash, parse_result};
use opa_workbench::SessionFile;

fn opa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opa"))
        .args(args)
        .env("OPA_DATA_DIR", dir.join("data"))
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_tiny_example() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = bundled("examples/tiny_opa.json");
    let out = dir.path().join("res.json");
    let o = opa(dir.path(), &["solve", tiny.to_str().unwrap(), "--lp-check", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("z=0.333333"), "{}", stdout(&o));
    let res = parse_result(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((res.z - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(res.provenance.solver_path, "closed_form");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = opa(dir.path(), &["solve", "--frobnicate", "x.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(opa(dir.path(), &["--help"]).status.code(), Some(0));

    let missing = dir.path().join("missing_t.json");
    std::fs::write(&missing, r#"{"schema_version":1,"s":[[1]],"r":[[[1,2]]]}"#).unwrap();
    let o = opa(dir.path(), &["solve", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SCHEMA_ERROR") && stderr(&o).contains("at /t"), "{}", stderr(&o));

    let dup = dir.path().join("dup.json");
    std::fs::write(&dup, r#"{"schema_version":1,"t":[1],"s":[[1]],"r":[[[2,2]]]}"#).unwrap();
    let o = opa(dir.path(), &["solve", dup.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bijection"));

    assert_eq!(opa(dir.path(), &["solve", "nowhere.json"]).status.code(), Some(2));
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    let o = opa(dir.path(), &["pr-solve", garbage.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("PARSE_ERROR"));

    // u(2) cannot equal both 0.2 and 0.8: the ambiguity set is empty.
    let empty = dir.path().join("empty.json");
    std::fs::write(
        &empty,
        r#"{"schema_version":1,"t":[1],"s":[[1]],"r":[[[1,2,3]]],"utilities":[[{"constraints":[
            {"kind":"lower_bound","r":2,"gamma":0.2},{"kind":"lower_bound","r":2,"gamma":0.8}]}]]}"#,
    )
    .unwrap();
    let o = opa(dir.path(), &["pr-solve", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("AMBIGUITY_SET_EMPTY"));

    let o = opa(dir.path(), &["prs-solve", bundled("examples/tiny_opa.json").to_str().unwrap(), "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_reproduces_published_rows() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = bundled("../bench/fixtures/table1.json");
    let out = dir.path().join("bench.json");
    let o = opa(dir.path(), &["bench", "--matrix", matrix.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let topsis = text.lines().find(|l| l.starts_with("TOPSIS")).unwrap();
    assert!(topsis.contains("10 4 6 8 1 5 7 2 3 9") && topsis.contains("matches published row"), "{topsis}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn elicit_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let session = dir.path().join("session.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_opa"))
        .args(["elicit", "--seed", "7", "--ranks", "10", "--lipschitz", "0.3", "--questions", "2", "--interactive"])
        .args(["--out", session.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"maybe\nl\nc\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("unrecognized answer") && text.contains("utility band"), "{text}");
    let file: SessionFile = serde_json::from_str(&std::fs::read_to_string(&session).unwrap()).unwrap();
    assert_eq!(file.session.asked.len(), 2);

    let replayed = dir.path().join("replayed.json");
    let o = opa(
        dir.path(),
        &["elicit", "--seed", "0", "--replay", session.to_str().unwrap(), "--out", replayed.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("matches recording"));
    let again: SessionFile = serde_json::from_str(&std::fs::read_to_string(&replayed).unwrap()).unwrap();
    assert_eq!(canonical_hash(&again.session.spec).unwrap(), canonical_hash(&file.session.spec).unwrap());
    assert_eq!(again.session.asked, file.session.asked);

    let mut tampered: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&session).unwrap()).unwrap();
    tampered["session"]["seed"] = 8.into();
    std::fs::write(&session, tampered.to_string()).unwrap();
    let o = opa(dir.path(), &["elicit", "--seed", "0", "--replay", session.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn elicit_prints_first_question_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = opa(dir.path(), &["elicit", "--seed", "7"]);
    let b = opa(dir.path(), &["elicit", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("question 1:"));
}

#[test]
fn sensitivity_covers_all_orderings() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("small.json");
    std::fs::write(&inst, SMALL).unwrap();
    let out = dir.path().join("sens.json");
    let o = opa(dir.path(), &["sensitivity", inst.to_str().unwrap(), "--cap", "120", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("2 scenarios (all expert orderings)"));
    let o = opa(dir.path(), &["sensitivity", inst.to_str().unwrap(), "--cap", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lp_trace_logs_tableaus() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = bundled("examples/tiny_opa.json");
    let o = opa(dir.path(), &["--lp-trace", "solve", tiny.to_str().unwrap(), "--lp-check"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("opa_lp::tableau"), "{}", stderr(&o));
    let quiet = opa(dir.path(), &["solve", tiny.to_str().unwrap(), "--lp-check"]);
    assert!(stderr(&quiet).is_empty());
}

#[tokio::test]
async fn cli_and_api_agree() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("small.json");
    std::fs::write(&inst, SMALL).unwrap();
    let api = app(&dir.path().join("data"));
    for (cmd, model, extra) in
        [("solve", "opa", ""), ("pr-solve", "opa-pr", ""), ("prs-solve", "opa-prs", "?alpha=0.8")]
    {
        let out = dir.path().join(format!("{model}.json"));
        let mut args = vec![cmd, inst.to_str().unwrap(), "--out", out.to_str().unwrap()];
        if model == "opa-prs" {
            args.extend(["--alpha", "0.8"]);
        }
        let o = opa(dir.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let cli_doc = parse_result(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let (_, v) = call(&api, Method::POST, &format!("/api/solve/{model}{extra}"), Some(SMALL)).await;
        let api_doc: opa_workbench::ResultDocument = serde_json::from_value(v["result"].clone()).unwrap();
        assert_eq!(cli_doc, api_doc, "{model}");
        assert_eq!(canonical_hash(&cli_doc).unwrap(), canonical_hash(&api_doc).unwrap());
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

#[test]
fn serve_answers_on_loopback() {
    let dir = tempfile::tempdir().unwrap();
    let port = free_port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_opa"))
        .args(["serve", "--port", &port.to_string()])
        .env("OPA_DATA_DIR", dir.path())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let response = loop {
        if let Ok(mut s) = TcpStream::connect(("127.0.0.1", port)) {
            s.write_all(b"GET /api/spec HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
            let mut buf = String::new();
            s.read_to_string(&mut buf).unwrap();
            break buf;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("\"openapi\""));
}
