// SPDX-License-Identifier: Apache-2.0

//! Architectural state and the single-instruction step.

use super::isa::Instr;
use crate::mem::Memory;

/// Outcome of a bus access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusResult {
    Ok(u32),
    /// Not ready this cycle; the instruction is retried next cycle.
    Stall,
    Fault,
}

/// The core's view of the tile: memory plus the adapter registers.
pub trait Bus {
    fn fetch(&mut self, addr: u32) -> BusResult;
    fn load(&mut self, addr: u32) -> BusResult;
    /// A successful store returns `Ok(0)`.
    fn store(&mut self, addr: u32, value: u32) -> BusResult;
}

/// Plain memory is a bus without an adapter: every access outside the
/// memory faults.
impl Bus for Memory {
    fn fetch(&mut self, addr: u32) -> BusResult {
        self.load(addr)
    }

    fn load(&mut self, addr: u32) -> BusResult {
        self.read(addr).map_or(BusResult::Fault, BusResult::Ok)
    }

    fn store(&mut self, addr: u32, value: u32) -> BusResult {
        if self.write(addr, value) {
            BusResult::Ok(0)
        } else {
            BusResult::Fault
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetireEvent {
    pub pc: u32,
    pub cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    /// Fetch, load or store of an unmapped or misaligned address.
    Memory,
    IllegalInstruction,
}

impl FaultKind {
    pub fn code(self) -> u16 {
        match self {
            FaultKind::Memory => 1,
            FaultKind::IllegalInstruction => 2,
        }
    }

    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            1 => Some(FaultKind::Memory),
            2 => Some(FaultKind::IllegalInstruction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultEvent {
    pub kind: FaultKind,
    pub pc: u32,
    /// Faulting data address, or the instruction word for illegal opcodes.
    pub addr: u32,
    pub cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Retired(RetireEvent),
    Stalled,
    Halted,
    Fault(FaultEvent),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreState {
    pub pc: u32,
    regs: [u32; 16],
    pub halted: bool,
    pub retired: u64,
}

impl Default for CoreState {
    fn default() -> Self {
        Self::new(0)
    }
}

impl CoreState {
    pub fn new(entry: u32) -> Self {
        CoreState {
            pc: entry,
            regs: [0; 16],
            halted: false,
            retired: 0,
        }
    }

    pub fn reg(&self, index: usize) -> u32 {
        self.regs[index]
    }

    pub fn regs(&self) -> &[u32; 16] {
        &self.regs
    }

    /// Writes to r0 are discarded.
    pub fn set_reg(&mut self, index: usize, value: u32) {
        if index != 0 {
            self.regs[index] = value;
        }
    }

    fn fault(&mut self, kind: FaultKind, addr: u32, cycle: u64) -> StepOutcome {
        self.halted = true;
        StepOutcome::Fault(FaultEvent {
            kind,
            pc: self.pc,
            addr,
            cycle,
        })
    }

    /// Execute at most one instruction.
    pub fn step(&mut self, bus: &mut impl Bus, cycle: u64) -> StepOutcome {
        if self.halted {
            return StepOutcome::Halted;
        }
        let pc = self.pc;
        let word = match bus.fetch(pc) {
            BusResult::Ok(w) => w,
            BusResult::Stall => return StepOutcome::Stalled,
            BusResult::Fault => return self.fault(FaultKind::Memory, pc, cycle),
        };
        let Some(instr) = Instr::decode(word) else {
            return self.fault(FaultKind::IllegalInstruction, word, cycle);
        };

        let r = |reg: super::isa::Reg| self.regs[reg.index()];
        let next = pc.wrapping_add(4);
        let branch = |off: i16| next.wrapping_add((off as i32 as u32).wrapping_mul(4));
        let mut new_pc = next;
        use Instr::*;
        match instr {
            Nop => {}
            Halt => self.halted = true,
            Li { rd, imm } => self.set_reg(rd.index(), imm as i32 as u32),
            Lui { rd, imm } => self.set_reg(rd.index(), (imm as u32) << 16),
            Ori { rd, ra, imm } => self.set_reg(rd.index(), r(ra) | imm as u32),
            Add { rd, ra, rb } => self.set_reg(rd.index(), r(ra).wrapping_add(r(rb))),
            Sub { rd, ra, rb } => self.set_reg(rd.index(), r(ra).wrapping_sub(r(rb))),
            Addi { rd, ra, imm } => self.set_reg(rd.index(), r(ra).wrapping_add(imm as i32 as u32)),
            Lw { rd, ra, off } => {
                let addr = r(ra).wrapping_add(off as i32 as u32);
                match bus.load(addr) {
                    BusResult::Ok(v) => self.set_reg(rd.index(), v),
                    BusResult::Stall => return StepOutcome::Stalled,
                    BusResult::Fault => return self.fault(FaultKind::Memory, addr, cycle),
                }
            }
            Sw { rs, ra, off } => {
                let addr = r(ra).wrapping_add(off as i32 as u32);
                match bus.store(addr, r(rs)) {
                    BusResult::Ok(_) => {}
                    BusResult::Stall => return StepOutcome::Stalled,
                    BusResult::Fault => return self.fault(FaultKind::Memory, addr, cycle),
                }
            }
            Beq { ra, rb, off } => {
                if r(ra) == r(rb) {
                    new_pc = branch(off);
                }
            }
            Bne { ra, rb, off } => {
                if r(ra) != r(rb) {
                    new_pc = branch(off);
                }
            }
            Jmp { off } => new_pc = branch(off),
        }
        self.pc = new_pc;
        self.retired += 1;
        StepOutcome::Retired(RetireEvent { pc, cycle })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pe::assemble;

    fn run(src: &str, max: u64) -> (CoreState, Memory, Vec<StepOutcome>) {
        let img = assemble(src).unwrap();
        let mut mem = Memory::new(4096);
        mem.load_image(&img).unwrap();
        let mut core = CoreState::new(img.base);
        let mut log = Vec::new();
        for cycle in 0..max {
            let out = core.step(&mut mem, cycle);
            log.push(out);
            if core.halted {
                break;
            }
        }
        (core, mem, log)
    }

    #[test]
    fn li_then_halt() {
        let (core, _, log) = run("LI r1,5\nHALT", 10);
        assert_eq!(core.reg(1), 5);
        assert!(core.halted);
        assert_eq!(core.retired, 2);
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn add_and_fallthrough() {
        let (core, _, log) = run("LI r1,2\nLI r2,3\nADD r3,r1,r2\nBNE r0,r0,x\nx: HALT", 10);
        assert_eq!(core.reg(3), 5);
        let pcs: Vec<u32> = log
            .iter()
            .filter_map(|o| match o {
                StepOutcome::Retired(e) => Some(e.pc),
                _ => None,
            })
            .collect();
        assert_eq!(pcs, vec![0, 4, 8, 12, 16]);
    }

    #[test]
    fn r0_is_hardwired() {
        let (core, _, _) = run("LI r0, 9\nADDI r0, r0, 1\nLUI r0, 1\nHALT", 10);
        assert_eq!(core.reg(0), 0);
    }

    #[test]
    fn loop_counts_down() {
        let src = "LI r1, 10\nloop: ADDI r1, r1, -1\nADDI r2, r2, 3\nBNE r1, r0, loop\nHALT";
        let (core, _, _) = run(src, 1000);
        assert_eq!(core.reg(2), 30);
        assert_eq!(core.retired, 1 + 30 + 1);
    }

    #[test]
    fn load_store_and_lui_ori() {
        let src = "LUI r4, 0x1234\nORI r4, r4, 0x5678\nSW r4, buf(r0)\nLW r5, buf(r0)\nHALT\n.data\nbuf: .word 0";
        let (core, mem, _) = run(src, 10);
        assert_eq!(core.reg(5), 0x1234_5678);
        assert_eq!(mem.read(20), Some(0x1234_5678));
    }

    #[test]
    fn unmapped_store_faults_and_halts() {
        let (core, _, log) = run("LI r1, 0x7000\nSW r1, 0(r1)\nNOP", 10);
        assert!(core.halted);
        assert_eq!(core.retired, 1);
        assert_eq!(
            log[1],
            StepOutcome::Fault(FaultEvent {
                kind: FaultKind::Memory,
                pc: 4,
                addr: 0x7000,
                cycle: 1
            })
        );
        let mut c = core.clone();
        let mut m = Memory::new(4);
        assert_eq!(c.step(&mut m, 9), StepOutcome::Halted);
    }

    #[test]
    fn running_into_zeroed_memory_is_illegal() {
        let (core, _, log) = run("NOP", 10);
        assert_eq!(core.retired, 1);
        assert!(matches!(
            log[1],
            StepOutcome::Fault(FaultEvent {
                kind: FaultKind::IllegalInstruction,
                pc: 4,
                ..
            })
        ));
    }

    struct StallOnce {
        mem: Memory,
        stalled: bool,
    }

    impl Bus for StallOnce {
        fn fetch(&mut self, addr: u32) -> BusResult {
            self.mem.fetch(addr)
        }
        fn load(&mut self, addr: u32) -> BusResult {
            if !self.stalled {
                self.stalled = true;
                return BusResult::Stall;
            }
            self.mem.load(addr)
        }
        fn store(&mut self, addr: u32, value: u32) -> BusResult {
            self.mem.store(addr, value)
        }
    }

    #[test]
    fn stall_retires_nothing() {
        let img = assemble("LW r1, 0(r0)\nHALT").unwrap();
        let mut bus = StallOnce {
            mem: Memory::new(64),
            stalled: false,
        };
        bus.mem.load_image(&img).unwrap();
        let mut core = CoreState::new(0);
        assert_eq!(core.step(&mut bus, 0), StepOutcome::Stalled);
        assert_eq!((core.pc, core.retired), (0, 0));
        assert!(matches!(core.step(&mut bus, 1), StepOutcome::Retired(_)));
        assert_eq!(core.reg(1), img.code[0]);
    }
}
