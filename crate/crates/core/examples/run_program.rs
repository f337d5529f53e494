// SPDX-License-Identifier: Apache-2.0

//! Assemble a program, run it on tile 0 of a 1x1 platform and dump the
//! registers.
//!
//! `cargo run --example run_program -- programs/sum.s`

use std::collections::BTreeMap;

use tilesoc::pe::assemble;
use tilesoc::platform::{map_description, PlatformDescription};
use tilesoc::system::{SystemInstance, SystemOptions};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "programs/sum.s".into());
    let src = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let image = assemble(&src).unwrap_or_else(|e| panic!("{path}: {e}"));
    println!(
        "{} code words, {} data words",
        image.code.len(),
        image.data.len()
    );

    let cfg = map_description(&PlatformDescription::mesh(1, 1)).unwrap();
    let programs = BTreeMap::from([(0, image.clone())]);
    let mut sys = SystemInstance::new(&cfg, &programs, SystemOptions::default()).unwrap();
    let cycles = sys.run(1_000_000).unwrap();

    let core = sys.core(0);
    println!(
        "ran {cycles} cycles, retired {}, halted {}",
        core.retired, core.halted
    );
    if let Some(f) = sys.fault(0) {
        println!("fault: {f:?}");
    }
    for (i, r) in core.regs().iter().enumerate() {
        print!("r{i}={r:#x}{}", if i % 4 == 3 { "\n" } else { "  " });
    }
    for (name, addr) in &image.symbols {
        if let Some(v) = sys.memory(0).read(*addr) {
            println!("{name} @ {addr:#06x} = {v}");
        }
    }
}
