// SPDX-License-Identifier: Apache-2.0

//! Uniform random MSG/REQ/RESP traffic on a mesh, checked end to end.
//!
//! `cargo run --example random_traffic -- 4 4 10000 0`

use tilesoc::traffic::{run_traffic, TrafficConfig};

fn main() {
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let get = |i: usize, d: u64| args.get(i).copied().unwrap_or(d);
    let cfg = TrafficConfig::uniform(
        get(0, 4) as usize,
        get(1, 4) as usize,
        get(2, 10_000) as usize,
        get(3, 0),
    );
    let start = std::time::Instant::now();
    let report = run_traffic(&cfg);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    println!("clean: {} in {:.2?}", report.is_clean(), start.elapsed());
}
