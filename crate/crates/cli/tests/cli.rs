// SPDX-License-Identifier: Apache-2.0

mod common;

use std::time::Duration;

use common::*;
use tilesoc_host::{read_jsonl, TraceEvent};

fn code(o: &std::process::Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn gen_writes_canonical_config_and_is_idempotent() {
    let out = scratch("gen_2x2.json");
    let desc = platform("desc_2x2.json");
    let o = run_tilesoc(&[
        "gen",
        "--in",
        desc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(&out).unwrap();
    assert_eq!(first, std::fs::read(platform("config_2x2.json")).unwrap());
    run_tilesoc(&[
        "gen",
        "--in",
        desc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(first, std::fs::read(&out).unwrap());
}

#[test]
fn gen_reports_the_failing_field() {
    let bad = scratch("bad_desc.json");
    std::fs::write(
        &bad,
        r#"{"schema_version":1,"pattern":"mesh","width":0,"height":2,"tile":{"cores":1,"memory_kib":64,"org":"distributed"}}"#,
    )
    .unwrap();
    let out = scratch("bad_out.json");
    let o = run_tilesoc(&[
        "gen",
        "--in",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("width:"));

    let o = run_tilesoc(&[
        "gen",
        "--in",
        "/nonexistent/desc.json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    let o = run_tilesoc(&["gen", "--bogus"]);
    assert_eq!(code(&o), 2);
}

fn run_fixture(stats: &std::path::Path, seed: u64) -> std::process::Output {
    tilesoc()
        .args(["run", "--config"])
        .arg(platform("config_2x2.json"))
        .args(fixture_programs())
        .args(["--cycles", "100000", "--seed", &seed.to_string(), "--stats"])
        .arg(stats)
        .output()
        .unwrap()
}

#[test]
fn run_writes_stats_and_is_deterministic() {
    let (a, b) = (scratch("stats_a.json"), scratch("stats_b.json"));
    let o = run_fixture(&a, 7);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    run_fixture(&b, 7);
    let sa = std::fs::read(&a).unwrap();
    assert_eq!(sa, std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&sa).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["all_halted"], true);
    assert_eq!(v["totals"]["messages_received"], 16);
    assert_eq!(v["tiles"][0]["messages_sent"], 8);
}

#[test]
fn run_load_errors_and_zero_cycles() {
    let stats = scratch("stats_zero.json");
    let cfg = platform("config_2x2.json");
    let o = run_tilesoc(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--cycles",
        "0",
        "--stats",
        stats.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&stats).unwrap()).unwrap();
    assert_eq!(v["cycles"], 0);

    let o = run_tilesoc(&["run", "--config", "/nonexistent.json", "--cycles", "10"]);
    assert_eq!(code(&o), 3);
    let o = run_tilesoc(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--cycles",
        "10",
        "--program",
        "tile=0:/nonexistent.s",
    ]);
    assert_eq!(code(&o), 3);
    let o = run_tilesoc(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--cycles",
        "10",
        "--program",
        "nonsense",
    ]);
    assert_eq!(code(&o), 2);
}

fn attach(
    addr: &str,
    out: &std::path::Path,
    triggers: Option<&std::path::Path>,
) -> std::process::Output {
    let mut cmd = tilesoc();
    cmd.args(["attach", "--connect", addr, "--out"]).arg(out);
    if let Some(t) = triggers {
        cmd.arg("--triggers").arg(t);
    }
    cmd.output().unwrap()
}

#[test]
fn attach_captures_an_ordered_trace() {
    let stats = scratch("attach_stats.json");
    let out = scratch("attach_trace.jsonl");
    let mut sim = spawn_sim(&stats, 0);
    let o = attach(&sim.addr, &out, None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(wait_exit(&mut sim, Duration::from_secs(60)), 0);
    let events: Vec<TraceEvent> = read_jsonl(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(events.len() > 10);
    assert!(events
        .windows(2)
        .all(|w| (w[0].timestamp, w[0].module) <= (w[1].timestamp, w[1].module)));
    // Debug collection must not change what the program computed.
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&stats).unwrap()).unwrap();
    assert_eq!(v["totals"]["messages_received"], 16);
}

#[test]
fn attach_input_and_connection_errors() {
    let out = scratch("attach_err.jsonl");
    let bad = scratch("bad_triggers.json");
    std::fs::write(&bad, r#"[{"module":1,"condition":{"type":"pc_equals"}}]"#).unwrap();
    assert_eq!(code(&attach("127.0.0.1:1", &out, Some(&bad))), 2);

    let closed = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .to_string();
    assert_eq!(code(&attach(&closed, &out, None)), 4);
}

#[test]
fn serve_rejects_requests_without_a_session() {
    let closed = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .to_string();
    let serve = spawn_serve(&closed, true);
    let (c, _) = http(&serve.addr, "GET", "/api/modules", "");
    assert_eq!(c, 409);
    let (c, _) = http(&serve.addr, "POST", "/api/run", "");
    assert_eq!(c, 409);
    let (c, _) = http(&serve.addr, "POST", "/api/triggers", "{not json");
    assert_eq!(c, 400);
    let (c, _) = http(
        &serve.addr,
        "POST",
        "/api/collection",
        r#"{"action":"pause","modules":"all"}"#,
    );
    assert_eq!(c, 400);
    let (c, body) = http(&serve.addr, "GET", "/api/status", "");
    assert_eq!(c, 200);
    assert!(body.contains(r#""connected":false"#), "{body}");
}

#[test]
fn serve_fans_out_identical_streams() {
    let stats = scratch("serve_stats.json");
    let mut sim = spawn_sim(&stats, 0);
    let serve = spawn_serve(&sim.addr, true);
    wait_for_status(&serve.addr, |v| v["connected"] == true);

    let (c, body) = http(&serve.addr, "GET", "/api/modules", "");
    assert_eq!(c, 200);
    let modules: Vec<serde_json::Value> = serde_json::from_str(&body).unwrap();
    assert_eq!(modules.len(), 9);

    let trig =
        r#"{"module":2,"condition":{"type":"pc_equals","pc":0},"action":"start_collection"}"#;
    assert_eq!(http(&serve.addr, "POST", "/api/triggers", trig).0, 200);
    let mismatch =
        r#"{"module":6,"condition":{"type":"pc_equals","pc":0},"action":"start_collection"}"#;
    assert_eq!(http(&serve.addr, "POST", "/api/triggers", mismatch).0, 400);
    let missing =
        r#"{"module":42,"condition":{"type":"pc_equals","pc":0},"action":"start_collection"}"#;
    assert_eq!(http(&serve.addr, "POST", "/api/triggers", missing).0, 400);

    let a = ws_connect(&serve.addr);
    let b = ws_connect(&serve.addr);
    let ha = std::thread::spawn(move || ws_collect(a));
    let hb = std::thread::spawn(move || ws_collect(b));
    let all = r#"{"action":"start","modules":"all"}"#;
    assert_eq!(http(&serve.addr, "POST", "/api/collection", all).0, 200);
    assert_eq!(http(&serve.addr, "POST", "/api/run", "").0, 200);

    let (ea, eb) = (ha.join().unwrap(), hb.join().unwrap());
    assert!(ea.len() > 10);
    assert_eq!(ea, eb);
    assert_eq!(wait_exit(&mut sim, Duration::from_secs(60)), 0);

    // A client arriving after the end gets the full history.
    let late = ws_collect(ws_connect(&serve.addr));
    assert_eq!(late, ea);
    let st = wait_for_status(&serve.addr, |v| v["ended"] == true);
    assert_eq!(st["events"], ea.len());
    assert_eq!(http(&serve.addr, "POST", "/api/run", "").0, 409);
}
