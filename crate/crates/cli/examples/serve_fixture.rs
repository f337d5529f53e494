// SPDX-License-Identifier: Apache-2.0

//! Start the 2x2 fixture and the HTTP/WebSocket daemon in front of it,
//! held until `POST /api/run`.
//!
//! `cargo run -p tilesoc-cli --example serve_fixture -- 8080`
//!
//! Then, for example:
//!
//! ```text
//! curl localhost:8080/api/modules
//! curl -X POST localhost:8080/api/collection -d '{"action":"start","modules":"all"}'
//! curl -X POST localhost:8080/api/run
//! ```

use std::net::TcpListener;
use std::path::Path;

use tilesoc_cli::main_with_args;

fn main() {
    let http = std::env::args().nth(1).unwrap_or_else(|| "8080".into());
    let core = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core");
    let s = |p: &Path| p.to_str().unwrap().to_string();
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
        s(&core.join("platforms/config_2x2.json")),
    ];
    for (t, p) in [(0, "ping.s"), (1, "pong.s"), (2, "sum.s"), (3, "spin.s")] {
        run.push("--program".into());
        run.push(format!("tile={t}:{}", s(&core.join("programs").join(p))));
    }
    run.extend([
        "--cycles".into(),
        "1000000".into(),
        "--debug-listen".into(),
        addr.clone(),
    ]);
    std::thread::spawn(move || main_with_args(run));

    let code = main_with_args([
        "tilesoc",
        "serve",
        "--connect",
        &addr,
        "--http",
        &http,
        "--hold",
    ]);
    std::process::exit(code);
}
