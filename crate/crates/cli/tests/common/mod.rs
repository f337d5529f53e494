// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

pub fn core_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core")
}

pub fn platform(name: &str) -> PathBuf {
    core_dir().join("platforms").join(name)
}

pub fn program(name: &str) -> PathBuf {
    core_dir().join("programs").join(name)
}

pub fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

pub fn tilesoc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tilesoc"))
}

pub fn run_tilesoc(args: &[&str]) -> Output {
    tilesoc().args(args).output().unwrap()
}

/// `--program` arguments for the 2x2 fixture.
pub fn fixture_programs() -> Vec<String> {
    [(0, "ping.s"), (1, "pong.s"), (2, "sum.s"), (3, "spin.s")]
        .iter()
        .flat_map(|(t, p)| {
            [
                "--program".to_string(),
                format!("tile={t}:{}", program(p).display()),
            ]
        })
        .collect()
}

/// A child process that is killed when dropped.
pub struct Proc {
    pub child: Child,
    pub addr: String,
}

impl Drop for Proc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Spawn and wait for a `<prefix> <addr>` line on stderr; the rest of
/// stderr is forwarded to ours.
pub fn spawn_announcing(mut cmd: Command, prefix: &str) -> Proc {
    let mut child = cmd
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let stderr = child.stderr.take().unwrap();
    let (tx, rx) = mpsc::channel();
    let prefix = prefix.to_string();
    std::thread::spawn(move || {
        let mut tx = Some(tx);
        for line in BufReader::new(stderr).lines() {
            let Ok(line) = line else { break };
            match line.strip_prefix(&prefix) {
                Some(addr) if tx.is_some() => {
                    let _ = tx.take().unwrap().send(addr.trim().to_string());
                }
                _ => eprintln!("[child] {line}"),
            }
        }
    });
    let addr = rx
        .recv_timeout(Duration::from_secs(30))
        .expect("child did not announce its address");
    Proc { child, addr }
}

/// `tilesoc run` on the 2x2 fixture, waiting for a debug host.
pub fn spawn_sim(stats: &Path, seed: u64) -> Proc {
    let mut cmd = tilesoc();
    cmd.args(["run", "--config"])
        .arg(platform("config_2x2.json"))
        .args(fixture_programs())
        .args([
            "--cycles",
            "1000000",
            "--debug-listen",
            "127.0.0.1:0",
            "--seed",
            &seed.to_string(),
            "--stats",
        ])
        .arg(stats);
    spawn_announcing(cmd, "debug-listen:")
}

pub fn spawn_serve(connect: &str, hold: bool) -> Proc {
    let mut cmd = tilesoc();
    cmd.args(["serve", "--connect", connect, "--http", "0"]);
    if hold {
        cmd.arg("--hold");
    }
    spawn_announcing(cmd, "http-listen:")
}

pub fn wait_exit(p: &mut Proc, limit: Duration) -> i32 {
    let start = Instant::now();
    loop {
        if let Some(s) = p.child.try_wait().unwrap() {
            return s.code().unwrap_or(-1);
        }
        assert!(start.elapsed() < limit, "process did not exit in {limit:?}");
        std::thread::sleep(Duration::from_millis(20));
    }
}

/// Minimal HTTP/1.1 request; returns (status, body).
pub fn http(addr: &str, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp
        .split(' ')
        .nth(1)
        .and_then(|c| c.parse().ok())
        .unwrap_or(0);
    let body = resp
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_string())
        .unwrap_or_default();
    (status, body)
}

pub fn wait_for_status(addr: &str, pred: impl Fn(&serde_json::Value) -> bool) -> serde_json::Value {
    let start = Instant::now();
    loop {
        let (code, body) = http(addr, "GET", "/api/status", "");
        assert_eq!(code, 200);
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        if pred(&v) {
            return v;
        }
        assert!(
            start.elapsed() < Duration::from_secs(60),
            "status never matched: {v}"
        );
        std::thread::sleep(Duration::from_millis(50));
    }
}

/// Read every text message until the server closes the socket.
pub fn ws_collect(mut ws: tungstenite::WebSocket<TcpStream>) -> Vec<String> {
    let mut out = Vec::new();
    loop {
        match ws.read() {
            Ok(tungstenite::Message::Text(t)) => out.push(t.to_string()),
            Ok(tungstenite::Message::Close(_)) => {
                let _ = ws.close(None);
                let _ = ws.flush();
            }
            Ok(_) => {}
            Err(_) => return out,
        }
    }
}

pub fn ws_connect(addr: &str) -> tungstenite::WebSocket<TcpStream> {
    let stream = TcpStream::connect(addr).unwrap();
    stream
        .set_read_timeout(Some(Duration::from_secs(60)))
        .unwrap();
    let (ws, _) = tungstenite::client(format!("ws://{addr}/ws/events"), stream).unwrap();
    ws
}
