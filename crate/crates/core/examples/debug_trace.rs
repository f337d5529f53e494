// SPDX-License-Identifier: Apache-2.0

//! Run the 2x2 fixture with every debug module collecting and print the
//! events the modules emitted, without a host attached.
//!
//! `cargo run --example debug_trace`

use std::collections::BTreeMap;

use tilesoc::debug::{decompress, reg, EventBody};
use tilesoc::pe::assemble;
use tilesoc::platform::{map_description, PlatformDescription};
use tilesoc::system::{SystemInstance, SystemOptions};

fn main() {
    let src = |s: &str| assemble(s).unwrap();
    let programs = BTreeMap::from([
        (0, src(include_str!("../programs/ping.s"))),
        (1, src(include_str!("../programs/pong.s"))),
        (2, src(include_str!("../programs/sum.s"))),
        (3, src(include_str!("../programs/spin.s"))),
    ]);
    let cfg = map_description(&PlatformDescription::mesh(2, 2)).unwrap();
    let opts = SystemOptions {
        emission_log: true,
        ..SystemOptions::default()
    };
    let mut sys = SystemInstance::new(&cfg, &programs, opts).unwrap();
    let modules = sys.debug().unwrap().len() as u8;
    for id in 1..modules {
        sys.debug_mut()
            .unwrap()
            .write_register(id, reg::ENABLE, 1, 0);
    }
    sys.run(1_000_000).unwrap();
    sys.finish();

    let log = sys.take_emission_log();
    let mut per_type: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &log {
        let name = match e.body {
            EventBody::Itrace(_) => "ITRACE",
            EventBody::NocStat(_) => "NOCSTAT",
            EventBody::Trigger(_) => "TRIGGER",
            EventBody::Fault { .. } => "FAULT",
            EventBody::Na { .. } => "NA",
        };
        *per_type.entry(name).or_default() += 1;
    }
    println!(
        "{} events in {} cycles: {per_type:?}",
        log.len(),
        sys.cycle()
    );
    for e in log.iter().take(8) {
        println!("  t={:<5} module {} {:?}", e.timestamp, e.module, e.body);
    }

    let core2 = sys.debug().unwrap().core_module(2);
    let records: Vec<_> = log
        .iter()
        .filter(|e| e.module == core2)
        .filter_map(|e| match e.body {
            EventBody::Itrace(r) => Some(r),
            _ => None,
        })
        .collect();
    let pcs = decompress(&records);
    println!(
        "tile 2: {} records expand to {} retired pcs (core reports {})",
        records.len(),
        pcs.len(),
        sys.core(2).retired
    );
}
