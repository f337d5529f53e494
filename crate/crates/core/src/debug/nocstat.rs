// SPDX-License-Identifier: Apache-2.0

//! Per-router link usage statistics over fixed windows.

/// Flits that left one router through each output port (N, E, S, W,
/// Local) during window `window`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NocStatRecord {
    pub x: u8,
    pub y: u8,
    pub window: u32,
    pub counts: [u16; 5],
}

impl NocStatRecord {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Windows are aligned to cycle 0: window `k` covers cycles
/// `k * len .. (k + 1) * len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NocStatCounter {
    x: u8,
    y: u8,
    window_len: u32,
    counts: [u16; 5],
}

impl NocStatCounter {
    pub fn new(x: u8, y: u8, window_len: u32) -> Self {
        assert!(
            (1..=u16::MAX as u32).contains(&window_len),
            "window length out of range"
        );
        NocStatCounter {
            x,
            y,
            window_len,
            counts: [0; 5],
        }
    }

    pub fn window_len(&self) -> u32 {
        self.window_len
    }

    /// Change the window length; the current partial window restarts.
    pub fn set_window_len(&mut self, len: u32) -> bool {
        if !(1..=u16::MAX as u32).contains(&len) {
            return false;
        }
        self.window_len = len;
        self.counts = [0; 5];
        true
    }

    /// Count the departures of cycle `cycle`; returns the record when this
    /// cycle closes a window.
    pub fn tick(&mut self, departures: [bool; 5], cycle: u64) -> Option<NocStatRecord> {
        for (c, d) in self.counts.iter_mut().zip(departures) {
            *c += d as u16;
        }
        let len = self.window_len as u64;
        if !(cycle + 1).is_multiple_of(len) {
            return None;
        }
        let rec = NocStatRecord {
            x: self.x,
            y: self.y,
            window: (cycle / len) as u32,
            counts: self.counts,
        };
        self.counts = [0; 5];
        Some(rec)
    }
}
