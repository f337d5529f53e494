// SPDX-License-Identifier: Apache-2.0

//! Validate a trigger file and show the register writes each trigger
//! turns into.
//!
//! `cargo run --example trigger_plan -- triggers.json`

use tilesoc_host::parse_trigger_file;

const EXAMPLE: &str = r#"[
  {"module": 3, "condition": {"type": "pc_equals", "pc": "0x8"}, "action": "start_collection"},
  {"module": 6, "condition": {"type": "link_load_above", "fraction": 0.75, "window": 256},
   "action": "stop_collection", "scope": "global"}
]"#;

fn main() {
    let text = match std::env::args().nth(1) {
        Some(p) => std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p}: {e}")),
        None => EXAMPLE.to_string(),
    };
    let triggers = match parse_trigger_file(&text) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("invalid trigger file: {e}");
            std::process::exit(2);
        }
    };
    for t in &triggers {
        println!(
            "module {} {} -> {:?} ({:?})",
            t.module,
            t.condition.name(),
            t.action,
            t.scope
        );
        for (reg, value) in t.register_writes() {
            println!("  write reg {reg:#04x} = {value:#010x}");
        }
    }
}
