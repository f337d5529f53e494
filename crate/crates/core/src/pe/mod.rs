// SPDX-License-Identifier: Apache-2.0

//! The processing element: a small 32-bit register machine, its encoding
//! and an assembler.

pub mod asm;
pub mod core;
pub mod isa;

pub use self::asm::{assemble, assemble_at, AsmError, ProgramImage};
pub use self::core::{Bus, BusResult, CoreState, FaultEvent, FaultKind, RetireEvent, StepOutcome};
pub use self::isa::{Instr, Reg};

/// First address of the network adapter register window.
pub const MMIO_BASE: u32 = 0xFFFF_0000;
/// Last address of the network adapter register window.
pub const MMIO_END: u32 = 0xFFFF_00FF;

pub fn is_mmio(addr: u32) -> bool {
    (MMIO_BASE..=MMIO_END).contains(&addr)
}
