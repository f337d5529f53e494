// SPDX-License-Identifier: Apache-2.0

//! Expand a platform description into its configuration.
//!
//! `cargo run --example gen_platform -- platforms/desc_2x2.json`

use tilesoc::platform::{map_description, to_canonical_json, PlatformDescription};

fn main() {
    let path = std::env::args()
        .nth(1)
        .expect("usage: gen_platform <description.json>");
    let text = std::fs::read_to_string(&path).expect("readable description");
    let desc = PlatformDescription::from_json(&text).unwrap_or_else(|e| {
        eprintln!("{path}: {e}");
        std::process::exit(2);
    });
    let config = map_description(&desc).expect("validated above");
    print!("{}", to_canonical_json(&config));
}
