// SPDX-License-Identifier: Apache-2.0

//! Drive the 2x2 fixture through an in-process link: enumerate the debug
//! modules, collect everything and print the merged trace as JSON lines.
//!
//! `cargo run --example loopback_capture > trace.jsonl`

use std::collections::BTreeMap;

use tilesoc::pe::assemble;
use tilesoc::platform::{map_description, PlatformDescription};
use tilesoc::system::{SystemInstance, SystemOptions};
use tilesoc_host::merge::split_by_module;
use tilesoc_host::{loopback, merge_streams, write_jsonl, ModuleSet, Session, SessionOptions};

fn main() {
    let src = |s: &str| assemble(s).unwrap();
    let programs = BTreeMap::from([
        (0, src(include_str!("../../core/programs/ping.s"))),
        (1, src(include_str!("../../core/programs/pong.s"))),
        (2, src(include_str!("../../core/programs/sum.s"))),
        (3, src(include_str!("../../core/programs/spin.s"))),
    ]);
    let cfg = map_description(&PlatformDescription::mesh(2, 2)).unwrap();
    let opts = SystemOptions {
        gated: true,
        ..SystemOptions::default()
    };
    let sys = SystemInstance::new(&cfg, &programs, opts).unwrap();
    let (spec, handle) = loopback::spawn(sys, 1_000_000);

    let mut session = Session::connect(spec, SessionOptions::default()).unwrap();
    for d in session.enumerate().unwrap() {
        eprintln!("{}", serde_json::to_string(&d).unwrap());
    }
    session.start_collection(&ModuleSet::All).unwrap();
    session.run().unwrap();
    let (_, mut events) = session.split();
    let (got, errors) = events.collect_to_end();
    let sys = handle.join().unwrap().unwrap();
    eprintln!(
        "{} events, {} errors, {} cycles",
        got.len(),
        errors.len(),
        sys.cycle()
    );

    let merged = merge_streams(&split_by_module(&got)).unwrap();
    write_jsonl(std::io::stdout().lock(), &merged).unwrap();
}
