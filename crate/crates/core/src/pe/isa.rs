// SPDX-License-Identifier: Apache-2.0

//! Instruction encoding.
//!
//! All instructions are one 32-bit word:
//!
//! ```text
//!  31    24 23  20 19  16 15  12 11          0
//! +--------+------+------+------+-------------+
//! | opcode |  a   |  b   |  c   |             |   register form
//! +--------+------+------+------+-------------+
//! | opcode |  a   |  b   |       imm16        |   immediate form
//! +--------+------+------+--------------------+
//! ```
//!
//! Opcode 0 is illegal so that execution running into zeroed memory faults.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);

    pub fn new(index: u8) -> Option<Reg> {
        (index < 16).then_some(Reg(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instr {
    Nop,
    Halt,
    /// `rd = sext(imm)`
    Li {
        rd: Reg,
        imm: i16,
    },
    /// `rd = imm << 16`
    Lui {
        rd: Reg,
        imm: u16,
    },
    /// `rd = ra | imm`
    Ori {
        rd: Reg,
        ra: Reg,
        imm: u16,
    },
    Add {
        rd: Reg,
        ra: Reg,
        rb: Reg,
    },
    Sub {
        rd: Reg,
        ra: Reg,
        rb: Reg,
    },
    Addi {
        rd: Reg,
        ra: Reg,
        imm: i16,
    },
    Lw {
        rd: Reg,
        ra: Reg,
        off: i16,
    },
    Sw {
        rs: Reg,
        ra: Reg,
        off: i16,
    },
    /// Branch offsets are in words, relative to `pc + 4`.
    Beq {
        ra: Reg,
        rb: Reg,
        off: i16,
    },
    Bne {
        ra: Reg,
        rb: Reg,
        off: i16,
    },
    Jmp {
        off: i16,
    },
}

mod op {
    pub const NOP: u8 = 0x01;
    pub const HALT: u8 = 0x02;
    pub const LI: u8 = 0x03;
    pub const LUI: u8 = 0x04;
    pub const ORI: u8 = 0x05;
    pub const ADD: u8 = 0x06;
    pub const SUB: u8 = 0x07;
    pub const ADDI: u8 = 0x08;
    pub const LW: u8 = 0x09;
    pub const SW: u8 = 0x0a;
    pub const BEQ: u8 = 0x0b;
    pub const BNE: u8 = 0x0c;
    pub const JMP: u8 = 0x0d;
}

fn pack(opcode: u8, a: Reg, b: Reg, low: u16) -> u32 {
    (opcode as u32) << 24 | (a.0 as u32) << 20 | (b.0 as u32) << 16 | low as u32
}

impl Instr {
    pub fn encode(self) -> u32 {
        use Instr::*;
        let z = Reg::ZERO;
        match self {
            Nop => pack(op::NOP, z, z, 0),
            Halt => pack(op::HALT, z, z, 0),
            Li { rd, imm } => pack(op::LI, rd, z, imm as u16),
            Lui { rd, imm } => pack(op::LUI, rd, z, imm),
            Ori { rd, ra, imm } => pack(op::ORI, rd, ra, imm),
            Add { rd, ra, rb } => pack(op::ADD, rd, ra, (rb.0 as u16) << 12),
            Sub { rd, ra, rb } => pack(op::SUB, rd, ra, (rb.0 as u16) << 12),
            Addi { rd, ra, imm } => pack(op::ADDI, rd, ra, imm as u16),
            Lw { rd, ra, off } => pack(op::LW, rd, ra, off as u16),
            Sw { rs, ra, off } => pack(op::SW, rs, ra, off as u16),
            Beq { ra, rb, off } => pack(op::BEQ, ra, rb, off as u16),
            Bne { ra, rb, off } => pack(op::BNE, ra, rb, off as u16),
            Jmp { off } => pack(op::JMP, z, z, off as u16),
        }
    }

    pub fn decode(word: u32) -> Option<Instr> {
        use Instr::*;
        let a = Reg(((word >> 20) & 0xf) as u8);
        let b = Reg(((word >> 16) & 0xf) as u8);
        let c = Reg(((word >> 12) & 0xf) as u8);
        let low = word as u16;
        let simm = low as i16;
        Some(match (word >> 24) as u8 {
            op::NOP => Nop,
            op::HALT => Halt,
            op::LI => Li { rd: a, imm: simm },
            op::LUI => Lui { rd: a, imm: low },
            op::ORI => Ori {
                rd: a,
                ra: b,
                imm: low,
            },
            op::ADD => Add {
                rd: a,
                ra: b,
                rb: c,
            },
            op::SUB => Sub {
                rd: a,
                ra: b,
                rb: c,
            },
            op::ADDI => Addi {
                rd: a,
                ra: b,
                imm: simm,
            },
            op::LW => Lw {
                rd: a,
                ra: b,
                off: simm,
            },
            op::SW => Sw {
                rs: a,
                ra: b,
                off: simm,
            },
            op::BEQ => Beq {
                ra: a,
                rb: b,
                off: simm,
            },
            op::BNE => Bne {
                ra: a,
                rb: b,
                off: simm,
            },
            op::JMP => Jmp { off: simm },
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reg() -> impl Strategy<Value = Reg> {
        (0u8..16).prop_map(Reg)
    }

    fn instr() -> impl Strategy<Value = Instr> {
        use Instr::*;
        prop_oneof![
            Just(Nop),
            Just(Halt),
            (reg(), any::<i16>()).prop_map(|(rd, imm)| Li { rd, imm }),
            (reg(), any::<u16>()).prop_map(|(rd, imm)| Lui { rd, imm }),
            (reg(), reg(), any::<u16>()).prop_map(|(rd, ra, imm)| Ori { rd, ra, imm }),
            (reg(), reg(), reg()).prop_map(|(rd, ra, rb)| Add { rd, ra, rb }),
            (reg(), reg(), reg()).prop_map(|(rd, ra, rb)| Sub { rd, ra, rb }),
            (reg(), reg(), any::<i16>()).prop_map(|(rd, ra, imm)| Addi { rd, ra, imm }),
            (reg(), reg(), any::<i16>()).prop_map(|(rd, ra, off)| Lw { rd, ra, off }),
            (reg(), reg(), any::<i16>()).prop_map(|(rs, ra, off)| Sw { rs, ra, off }),
            (reg(), reg(), any::<i16>()).prop_map(|(ra, rb, off)| Beq { ra, rb, off }),
            (reg(), reg(), any::<i16>()).prop_map(|(ra, rb, off)| Bne { ra, rb, off }),
            any::<i16>().prop_map(|off| Jmp { off }),
        ]
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(i in instr()) {
            prop_assert_eq!(Instr::decode(i.encode()), Some(i));
        }
    }

    #[test]
    fn zero_word_is_illegal() {
        assert_eq!(Instr::decode(0), None);
        assert_eq!(Instr::decode(0xff00_0000), None);
    }
}
