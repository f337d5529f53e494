// SPDX-License-Identifier: Apache-2.0

//! Merge several JSON-lines trace files into one stream ordered by
//! (timestamp, module).
//!
//! `cargo run --example merge_traces -- a.jsonl b.jsonl > merged.jsonl`

use tilesoc_host::{merge_streams, read_jsonl, write_jsonl};

fn main() {
    let inputs: Vec<_> = std::env::args()
        .skip(1)
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p}: {e}"));
            read_jsonl(&text).unwrap_or_else(|e| panic!("{p}: {e}"))
        })
        .collect();
    match merge_streams(&inputs) {
        Ok(merged) => write_jsonl(std::io::stdout().lock(), &merged).unwrap(),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
}
