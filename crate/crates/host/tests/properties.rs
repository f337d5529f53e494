// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use tilesoc::debug::compress as chip;
use tilesoc_host::event::{EventData, ItraceRecord};
use tilesoc_host::merge::split_by_module;
use tilesoc_host::{decompress_itrace, merge_streams, StreamMerger, TraceEvent};

/// Pc sequences made of sequential runs separated by jumps, plus fully
/// random ones.
fn pcs() -> impl Strategy<Value = Vec<u32>> {
    let runs = prop::collection::vec((any::<u32>().prop_map(|p| p & !3), 1usize..200), 0..100)
        .prop_map(|segs| {
            let mut v = Vec::new();
            for (start, n) in segs {
                v.extend((0..n as u32).map(|i| start.wrapping_add(4 * i)));
            }
            v.truncate(10_000);
            v
        });
    prop_oneof![runs, prop::collection::vec(any::<u32>(), 0..10_000)]
}

fn host_records(recs: &[chip::ItraceRecord]) -> Vec<ItraceRecord> {
    recs.iter()
        .map(|r| ItraceRecord {
            start_pc: r.start_pc,
            run_length: r.run_length,
        })
        .collect()
}

fn events() -> impl Strategy<Value = Vec<TraceEvent>> {
    prop::collection::vec((1u8..6, 0u32..50), 0..200).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (module, timestamp))| TraceEvent {
                module,
                timestamp,
                data: EventData::Itrace(ItraceRecord {
                    start_pc: i as u32,
                    run_length: 1,
                }),
            })
            .collect()
    })
}

/// Per-module monotone streams, in some arrival interleaving.
fn monotone(mut v: Vec<TraceEvent>) -> Vec<TraceEvent> {
    let mut lists = split_by_module(&v);
    for l in &mut lists {
        let mut ts: Vec<u32> = l.iter().map(|e| e.timestamp).collect();
        ts.sort();
        for (e, t) in l.iter_mut().zip(ts) {
            e.timestamp = t;
        }
    }
    // Interleave the lists back in the original module order.
    let mut cursors = vec![0usize; lists.len()];
    let ids: Vec<u8> = lists.iter().map(|l| l[0].module).collect();
    for slot in v.iter_mut() {
        let k = ids.iter().position(|&m| m == slot.module).unwrap();
        *slot = lists[k][cursors[k]];
        cursors[k] += 1;
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decompress_inverts_chip_compression(seq in pcs()) {
        let recs = chip::compress(&seq);
        prop_assert!(recs.iter().all(|r| r.run_length >= 1));
        prop_assert_eq!(decompress_itrace(&host_records(&recs)), seq);
    }
}

proptest! {
    #[test]
    fn merge_equals_stable_sort(v in events()) {
        let v = monotone(v);
        let mut expect = v.clone();
        expect.sort_by_key(|e| (e.timestamp, e.module));
        let merged = merge_streams(&split_by_module(&v)).unwrap();
        prop_assert_eq!(&merged, &expect);
    }

    #[test]
    fn online_merge_equals_batch_merge(v in events()) {
        let v = monotone(v);
        let mut m = StreamMerger::new(1..6);
        let mut out = Vec::new();
        for e in &v {
            out.extend(m.push(*e).unwrap());
        }
        out.extend(m.finish());
        prop_assert_eq!(out, merge_streams(&split_by_module(&v)).unwrap());
    }
}
