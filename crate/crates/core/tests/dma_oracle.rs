// SPDX-License-Identifier: Apache-2.0

//! Concurrent DMA transfers over the mesh compared with a plain copy.

use std::collections::BTreeMap;

use proptest::prelude::*;
use tilesoc::na::{regs, DmaDir};
use tilesoc::pe::BusResult;
use tilesoc::platform::{map_description, PlatformDescription};
use tilesoc::system::{SystemInstance, SystemOptions};

/// Each transfer owns slot `i` of every memory, so concurrent transfers
/// never touch the same words.
const SLOT_WORDS: u32 = 1024;

#[derive(Debug, Clone)]
struct Xfer {
    local_tile: usize,
    remote_hop: usize,
    dir: DmaDir,
    len: u32,
    local_off: u32,
    remote_off: u32,
}

fn xfer() -> impl Strategy<Value = Xfer> {
    (0usize..4, 1usize..4, any::<bool>(), 0u32..=SLOT_WORDS).prop_flat_map(
        |(local_tile, remote_hop, read, len)| {
            (0..=SLOT_WORDS - len, 0..=SLOT_WORDS - len).prop_map(move |(local_off, remote_off)| {
                Xfer {
                    local_tile,
                    remote_hop,
                    dir: if read {
                        DmaDir::ReadRemote
                    } else {
                        DmaDir::WriteRemote
                    },
                    len,
                    local_off,
                    remote_off,
                }
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn concurrent_transfers_match_copy(xfers in prop::collection::vec(xfer(), 1..8), fill in any::<u32>()) {
        let mut desc = PlatformDescription::mesh(2, 2);
        desc.tile.memory_kib = 32;
        let cfg = map_description(&desc).unwrap();
        let mut sys = SystemInstance::new(&cfg, &BTreeMap::new(), SystemOptions::default()).unwrap();
        // Let the idle cores execute their HALT before memory is overwritten.
        sys.run(16).unwrap();
        prop_assert!(sys.all_halted());
        let words = sys.memory(0).words().len();
        let mut oracle: Vec<Vec<u32>> = (0..4u32)
            .map(|t| (0..words as u32).map(|i| fill.wrapping_mul(i + 1) ^ t).collect())
            .collect();
        for (t, m) in oracle.iter().enumerate() {
            sys.memory_mut(t).write_slice(0, m);
        }

        let mut started = Vec::new();
        for (slot, x) in xfers.iter().enumerate() {
            let remote_tile = (x.local_tile + x.remote_hop) % 4;
            let base = slot as u32 * SLOT_WORDS;
            let (l, r) = (base + x.local_off, base + x.remote_off);
            let (lu, ru, n) = (l as usize, r as usize, x.len as usize);
            let (from, to) = match x.dir {
                DmaDir::ReadRemote => ((remote_tile, ru), (x.local_tile, lu)),
                DmaDir::WriteRemote => ((x.local_tile, lu), (remote_tile, ru)),
            };
            let data = oracle[from.0][from.1..from.1 + n].to_vec();
            oracle[to.0][to.1..to.1 + n].copy_from_slice(&data);

            let mem = sys.memory(x.local_tile).clone();
            let id = sys.adapter_mut(x.local_tile).dma_start(&mem, x.dir, 4 * l, remote_tile, 4 * r, x.len).unwrap();
            started.push((x.local_tile, id));
        }
        for _ in 0..200_000 {
            if started.iter().all(|&(t, id)| sys.adapter(t).dma_done_mask() & (1 << id) != 0)
                && (0..4).all(|t| sys.adapter(t).is_idle())
            {
                break;
            }
            sys.step().unwrap();
        }
        for &(t, id) in &started {
            prop_assert!(sys.adapter(t).dma_done_mask() & (1 << id) != 0, "tile {} slot {} never completed", t, id);
            prop_assert_eq!(sys.adapter_mut(t).mmio_read(regs::DMA_ERROR), BusResult::Ok(0));
        }
        for (t, expect) in oracle.iter().enumerate() {
            prop_assert!(sys.memory(t).words() == &expect[..], "tile {} memory differs", t);
        }
    }
}
