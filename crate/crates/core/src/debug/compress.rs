// SPDX-License-Identifier: Apache-2.0

//! Instruction trace compression: runs of sequential program counters.

/// `run_length` instructions retired at `start_pc`, `start_pc + 4`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ItraceRecord {
    pub start_pc: u32,
    pub run_length: u16,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItraceCompressor {
    run: Option<ItraceRecord>,
}

impl ItraceCompressor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed one retired pc. Returns the finished record when `pc` does not
    /// continue the current run (or the run is full).
    pub fn push(&mut self, pc: u32) -> Option<ItraceRecord> {
        if let Some(run) = self.run.as_mut() {
            let next = run.start_pc.wrapping_add(4 * run.run_length as u32);
            if pc == next && run.run_length < u16::MAX {
                run.run_length += 1;
                return None;
            }
        }
        self.run.replace(ItraceRecord {
            start_pc: pc,
            run_length: 1,
        })
    }

    pub fn flush(&mut self) -> Option<ItraceRecord> {
        self.run.take()
    }

    pub fn is_empty(&self) -> bool {
        self.run.is_none()
    }
}

/// Compress a whole pc sequence.
pub fn compress(pcs: &[u32]) -> Vec<ItraceRecord> {
    let mut c = ItraceCompressor::new();
    let mut out: Vec<ItraceRecord> = pcs.iter().filter_map(|&pc| c.push(pc)).collect();
    out.extend(c.flush());
    out
}

/// Expand records back into the pc sequence.
pub fn decompress(records: &[ItraceRecord]) -> Vec<u32> {
    records
        .iter()
        .flat_map(|r| (0..r.run_length as u32).map(move |i| r.start_pc.wrapping_add(4 * i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(start_pc: u32, run_length: u16) -> ItraceRecord {
        ItraceRecord {
            start_pc,
            run_length,
        }
    }

    #[test]
    fn examples() {
        assert_eq!(compress(&[0, 4, 8, 12]), vec![rec(0, 4)]);
        assert_eq!(compress(&[0, 4, 64, 68]), vec![rec(0, 2), rec(64, 2)]);
        assert_eq!(decompress(&[rec(0, 4)]), vec![0, 4, 8, 12]);
        assert_eq!(decompress(&[rec(0x40, 1)]), vec![0x40]);
        assert!(compress(&[]).is_empty());
    }

    #[test]
    fn repeated_pc_starts_new_runs() {
        assert_eq!(compress(&[8, 8, 8]), vec![rec(8, 1); 3]);
    }

    #[test]
    fn long_runs_split_at_the_counter_limit() {
        let pcs: Vec<u32> = (0..70_000u32).map(|i| 4 * i).collect();
        let recs = compress(&pcs);
        assert_eq!(
            recs,
            vec![
                rec(0, u16::MAX),
                rec(4 * u16::MAX as u32, (70_000 - u16::MAX as u32) as u16)
            ]
        );
        assert_eq!(decompress(&recs), pcs);
    }

    #[test]
    fn wrapping_run() {
        let pcs = [0xFFFF_FFF8, 0xFFFF_FFFC, 0, 4];
        assert_eq!(compress(&pcs), vec![rec(0xFFFF_FFF8, 4)]);
        assert_eq!(decompress(&compress(&pcs)), pcs);
    }
}
