// SPDX-License-Identifier: Apache-2.0

//! The whole command-line flow in one process: generate a configuration,
//! start a simulation that waits for a debugger, attach and capture.
//!
//! `cargo run -p tilesoc-cli --example pipeline`

use std::net::TcpListener;
use std::path::Path;

use tilesoc_cli::main_with_args;

fn main() {
    let core = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core");
    let out = std::env::temp_dir().join("tilesoc-pipeline");
    std::fs::create_dir_all(&out).unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let config = out.join("config.json");

    let code = main_with_args([
        "tilesoc".into(),
        "gen".into(),
        "--in".into(),
        s(&core.join("platforms/desc_2x2.json")),
        "--out".into(),
        s(&config),
    ]);
    println!("gen -> {code}, wrote {}", config.display());

    // Pick a free port for the debug link.
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let mut run = vec![
        "tilesoc".to_string(),
        "run".into(),
        "--config".into(),
        s(&config),
    ];
    for (t, p) in [(0, "ping.s"), (1, "pong.s"), (2, "sum.s"), (3, "spin.s")] {
        run.push("--program".into());
        run.push(format!("tile={t}:{}", s(&core.join("programs").join(p))));
    }
    let stats = out.join("stats.json");
    run.extend([
        "--cycles".into(),
        "1000000".into(),
        "--debug-listen".into(),
        addr.clone(),
        "--stats".into(),
        s(&stats),
    ]);
    let sim = std::thread::spawn(move || main_with_args(run));

    let trace = out.join("trace.jsonl");
    let mut code = 4;
    for _ in 0..50 {
        code = main_with_args([
            "tilesoc".into(),
            "attach".into(),
            "--connect".into(),
            addr.clone(),
            "--out".into(),
            s(&trace),
        ]);
        if code != 4 {
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(100));
    }
    println!("attach -> {code}, trace in {}", trace.display());
    println!(
        "run -> {}, stats in {}",
        sim.join().unwrap(),
        stats.display()
    );
}
