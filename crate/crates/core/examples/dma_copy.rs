// SPDX-License-Identifier: Apache-2.0

//! Move a block from tile 0 to tile 3 with a DMA write and back with a
//! DMA read, and report how long each took.
//!
//! `cargo run --example dma_copy -- 700`

use std::collections::BTreeMap;

use tilesoc::na::DmaDir;
use tilesoc::platform::{map_description, PlatformDescription};
use tilesoc::system::{SystemInstance, SystemOptions};

fn transfer(sys: &mut SystemInstance, dir: DmaDir, local: u32, remote: u32, len: u32) -> u64 {
    let mem = sys.memory(0).clone();
    let id = sys
        .adapter_mut(0)
        .dma_start(&mem, dir, local, 3, remote, len)
        .unwrap();
    let start = sys.cycle();
    while sys.adapter(0).dma_done_mask() & (1 << id) == 0 {
        sys.step().unwrap();
    }
    sys.cycle() - start
}

fn main() {
    let len: u32 = std::env::args()
        .nth(1)
        .map_or(700, |a| a.parse().expect("word count"));
    let cfg = map_description(&PlatformDescription::mesh(2, 2)).unwrap();
    let mut sys = SystemInstance::new(&cfg, &BTreeMap::new(), SystemOptions::default()).unwrap();

    let data: Vec<u32> = (0..len).map(|i| i.wrapping_mul(0x9e37_79b9)).collect();
    sys.memory_mut(0).write_slice(0x1000, &data);

    let t = transfer(&mut sys, DmaDir::WriteRemote, 0x1000, 0x2000, len);
    assert_eq!(sys.memory(3).slice(0x2000, len as usize), &data[..]);
    println!("write {len} words to tile 3: {t} cycles");

    let t = transfer(&mut sys, DmaDir::ReadRemote, 0x3000, 0x2000, len);
    assert_eq!(sys.memory(0).slice(0x3000, len as usize), &data[..]);
    println!("read {len} words back from tile 3: {t} cycles");
    println!("{:?}", sys.adapter(0).stats());
}
