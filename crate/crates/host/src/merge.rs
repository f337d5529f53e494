// SPDX-License-Identifier: Apache-2.0

//! Ordering events from several modules on one time axis.
//!
//! The global order is by timestamp, then module id; events that compare
//! equal keep their input order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use thiserror::Error;

use crate::event::TraceEvent;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MergeError {
    #[error("input {input} is not timestamp-monotone at position {position}")]
    NonMonotoneInput { input: usize, position: usize },
    #[error("module {module} went back in time ({previous} then {timestamp})")]
    NonMonotoneModule {
        module: u8,
        previous: u32,
        timestamp: u32,
    },
}

/// Merge per-module lists, each sorted by timestamp.
pub fn merge_streams(inputs: &[Vec<TraceEvent>]) -> Result<Vec<TraceEvent>, MergeError> {
    for (i, list) in inputs.iter().enumerate() {
        if let Some(p) = list
            .windows(2)
            .position(|w| w[1].timestamp < w[0].timestamp)
        {
            return Err(MergeError::NonMonotoneInput {
                input: i,
                position: p + 1,
            });
        }
    }
    // Keys are unique thanks to (input, position), so the heap order is
    // total and ties resolve to input order.
    let mut heap = BinaryHeap::new();
    for (i, list) in inputs.iter().enumerate() {
        if let Some(e) = list.first() {
            heap.push(Reverse((e.timestamp, e.module, i, 0usize)));
        }
    }
    let mut out = Vec::with_capacity(inputs.iter().map(Vec::len).sum());
    while let Some(Reverse((_, _, i, pos))) = heap.pop() {
        out.push(inputs[i][pos]);
        if let Some(e) = inputs[i].get(pos + 1) {
            heap.push(Reverse((e.timestamp, e.module, i, pos + 1)));
        }
    }
    Ok(out)
}

/// Split a stream into per-module lists, preserving order.
pub fn split_by_module(events: &[TraceEvent]) -> Vec<Vec<TraceEvent>> {
    let mut by: BTreeMap<u8, Vec<TraceEvent>> = BTreeMap::new();
    for e in events {
        by.entry(e.module).or_default().push(*e);
    }
    by.into_values().collect()
}

/// Online merge of a live stream in which every module's events arrive in
/// timestamp order but modules interleave arbitrarily.
///
/// An event is released once every tracked module has reported a later
/// timestamp, so the output equals [`merge_streams`] over the same input.
/// A silent module holds back release until [`StreamMerger::finish`].
#[derive(Debug, Default)]
pub struct StreamMerger {
    pending: BTreeMap<u8, VecDeque<TraceEvent>>,
    last: BTreeMap<u8, Option<u32>>,
}

impl StreamMerger {
    /// Track `modules`; events from other modules are tracked from their
    /// first appearance.
    pub fn new(modules: impl IntoIterator<Item = u8>) -> Self {
        StreamMerger {
            pending: BTreeMap::new(),
            last: modules.into_iter().map(|m| (m, None)).collect(),
        }
    }

    pub fn push(&mut self, e: TraceEvent) -> Result<Vec<TraceEvent>, MergeError> {
        let last = self.last.entry(e.module).or_insert(None);
        if let Some(prev) = *last {
            if e.timestamp < prev {
                return Err(MergeError::NonMonotoneModule {
                    module: e.module,
                    previous: prev,
                    timestamp: e.timestamp,
                });
            }
        }
        *last = Some(e.timestamp);
        self.pending.entry(e.module).or_default().push_back(e);
        Ok(self.release(self.watermark()))
    }

    /// Release everything still held, in merge order.
    pub fn finish(&mut self) -> Vec<TraceEvent> {
        self.release(None)
    }

    pub fn held(&self) -> usize {
        self.pending.values().map(VecDeque::len).sum()
    }

    /// Events strictly older than this may be released; `None` means no
    /// bound (used when flushing).
    fn watermark(&self) -> Option<u32> {
        let w = self
            .last
            .values()
            .map(|l| l.map_or(0, |t| t))
            .min()
            .unwrap_or(0);
        Some(w)
    }

    fn release(&mut self, bound: Option<u32>) -> Vec<TraceEvent> {
        let mut out = Vec::new();
        loop {
            let next = self
                .pending
                .iter()
                .filter_map(|(&m, q)| q.front().map(|e| (e.timestamp, m)))
                .filter(|&(ts, _)| bound.is_none_or(|b| ts < b))
                .min();
            let Some((_, m)) = next else { break };
            out.push(self.pending.get_mut(&m).unwrap().pop_front().unwrap());
        }
        out
    }
}
