// SPDX-License-Identifier: Apache-2.0

//! Two-pass assembler for the mini-ISA.
//!
//! Source is UTF-8 text with one instruction, directive or label per line
//! (a label may share its line with an instruction). `;` starts a comment.
//!
//! ```text
//!         LI   r1, 5
//! loop:   ADDI r1, r1, -1
//!         BNE  r1, r0, loop
//!         LUI  r9, 0xFFFF          ; r9 = MMIO base
//!         LW   r2, counter(r0)
//!         HALT
//!         .data
//! counter: .word 42
//! ```
//!
//! Directives: `.text`, `.data` (section switch), `.word v, ...`,
//! `.space n` (n zero words). Code is laid out at the image base and data
//! immediately after the code.

use std::collections::BTreeMap;

use thiserror::Error;

use super::isa::{Instr, Reg};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: undefined label `{label}`")]
    UndefinedLabel { line: usize, label: String },
    #[error("line {line}: value {value} out of range for {what}")]
    RangeError {
        line: usize,
        value: i64,
        what: &'static str,
    },
}

/// An assembled program ready to be loaded into tile memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramImage {
    pub base: u32,
    pub code: Vec<u32>,
    pub data: Vec<u32>,
    pub symbols: BTreeMap<String, u32>,
}

impl ProgramImage {
    /// A one-instruction program that halts immediately.
    pub fn halt() -> Self {
        ProgramImage {
            base: 0,
            code: vec![Instr::Halt.encode()],
            data: Vec::new(),
            symbols: BTreeMap::new(),
        }
    }

    pub fn data_base(&self) -> u32 {
        self.base + 4 * self.code.len() as u32
    }

    pub fn size_bytes(&self) -> u32 {
        4 * (self.code.len() + self.data.len()) as u32
    }

    pub fn words(&self) -> impl Iterator<Item = u32> + '_ {
        self.code.iter().chain(self.data.iter()).copied()
    }

    pub fn symbol(&self, name: &str) -> Option<u32> {
        self.symbols.get(name).copied()
    }

    /// Little-endian byte image (code followed by data).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.words().flat_map(u32::to_le_bytes).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Text,
    Data,
}

#[derive(Debug, Clone)]
enum Operand {
    Reg(Reg),
    Value(Value),
    /// `off(ra)`
    Mem(Value, Reg),
}

#[derive(Debug, Clone)]
enum Value {
    Num(i64),
    Label(String),
}

#[derive(Debug)]
enum Item {
    Instr {
        mnemonic: String,
        operands: Vec<Operand>,
    },
    Words(Vec<Value>),
}

#[derive(Debug)]
struct Line {
    number: usize,
    section: Section,
    /// Word index within its section.
    offset: u32,
    item: Item,
}

pub fn assemble(source: &str) -> Result<ProgramImage, AsmError> {
    assemble_at(source, 0)
}

pub fn assemble_at(source: &str, base: u32) -> Result<ProgramImage, AsmError> {
    let mut section = Section::Text;
    let mut sizes = [0u32; 2];
    let mut lines = Vec::new();
    let mut labels: Vec<(String, Section, u32, usize)> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let number = idx + 1;
        let err = |message: String| AsmError::ParseError {
            line: number,
            message,
        };
        let mut text = raw.split(';').next().unwrap_or("").trim();
        if let Some((head, rest)) = text.split_once(':') {
            let name = head.trim();
            if is_ident(name) {
                if labels.iter().any(|(l, ..)| l == name) {
                    return Err(err(format!("duplicate label `{name}`")));
                }
                labels.push((name.to_string(), section, sizes[section as usize], number));
                text = rest.trim();
            }
        }
        if text.is_empty() {
            continue;
        }
        let (word, rest) = match text.split_once(char::is_whitespace) {
            Some((w, r)) => (w, r.trim()),
            None => (text, ""),
        };
        let item = match word.to_ascii_lowercase().as_str() {
            ".text" => {
                section = Section::Text;
                continue;
            }
            ".data" => {
                section = Section::Data;
                continue;
            }
            ".word" => Item::Words(
                split_operands(rest)
                    .iter()
                    .map(|s| parse_value(s).ok_or_else(|| err(format!("bad value `{s}`"))))
                    .collect::<Result<_, _>>()?,
            ),
            ".space" => {
                let n = parse_number(rest)
                    .filter(|n| (0..=1 << 20).contains(n))
                    .ok_or_else(|| err(format!("bad .space count `{rest}`")))?;
                Item::Words(vec![Value::Num(0); n as usize])
            }
            d if d.starts_with('.') => return Err(err(format!("unknown directive `{word}`"))),
            _ => Item::Instr {
                mnemonic: word.to_ascii_uppercase(),
                operands: split_operands(rest)
                    .iter()
                    .map(|s| parse_operand(s).ok_or_else(|| err(format!("bad operand `{s}`"))))
                    .collect::<Result<_, _>>()?,
            },
        };
        let len = match &item {
            Item::Instr { .. } => 1,
            Item::Words(w) => w.len() as u32,
        };
        lines.push(Line {
            number,
            section,
            offset: sizes[section as usize],
            item,
        });
        sizes[section as usize] += len;
    }

    let text_words = sizes[Section::Text as usize];
    let address = |section: Section, offset: u32| match section {
        Section::Text => base + 4 * offset,
        Section::Data => base + 4 * (text_words + offset),
    };
    let symbols: BTreeMap<String, u32> = labels
        .iter()
        .map(|(name, sec, off, _)| (name.clone(), address(*sec, *off)))
        .collect();

    let mut code = Vec::with_capacity(text_words as usize);
    let mut data = Vec::with_capacity(sizes[Section::Data as usize] as usize);
    for line in &lines {
        let pc = address(line.section, line.offset);
        let words = match &line.item {
            Item::Words(values) => values
                .iter()
                .map(|v| {
                    let n = resolve(v, &symbols, line.number)?;
                    if !(i32::MIN as i64..=u32::MAX as i64).contains(&n) {
                        return Err(AsmError::RangeError {
                            line: line.number,
                            value: n,
                            what: ".word",
                        });
                    }
                    Ok(n as u32)
                })
                .collect::<Result<Vec<_>, _>>()?,
            Item::Instr { mnemonic, operands } => {
                vec![encode_line(mnemonic, operands, pc, &symbols, line.number)?.encode()]
            }
        };
        match line.section {
            Section::Text => code.extend(words),
            Section::Data => data.extend(words),
        }
    }

    Ok(ProgramImage {
        base,
        code,
        data,
        symbols,
    })
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn split_operands(s: &str) -> Vec<&str> {
    if s.trim().is_empty() {
        return Vec::new();
    }
    s.split(',').map(str::trim).collect()
}

fn parse_number(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let n = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(&hex.replace('_', ""), 16).ok()?
    } else {
        if !body.chars().next()?.is_ascii_digit() {
            return None;
        }
        body.replace('_', "").parse::<i64>().ok()?
    };
    Some(if neg { -n } else { n })
}

fn parse_value(s: &str) -> Option<Value> {
    if let Some(n) = parse_number(s) {
        Some(Value::Num(n))
    } else if is_ident(s) {
        Some(Value::Label(s.to_string()))
    } else {
        None
    }
}

fn parse_reg(s: &str) -> Option<Reg> {
    let digits = s.strip_prefix('r').or_else(|| s.strip_prefix('R'))?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) || digits.len() > 2 {
        return None;
    }
    Reg::new(digits.parse().ok()?)
}

fn parse_operand(s: &str) -> Option<Operand> {
    if let Some(r) = parse_reg(s) {
        return Some(Operand::Reg(r));
    }
    if let Some(open) = s.find('(') {
        let inner = s[open + 1..].strip_suffix(')')?;
        let reg = parse_reg(inner.trim())?;
        let off = s[..open].trim();
        let off = if off.is_empty() {
            Value::Num(0)
        } else {
            parse_value(off)?
        };
        return Some(Operand::Mem(off, reg));
    }
    parse_value(s).map(Operand::Value)
}

fn resolve(v: &Value, symbols: &BTreeMap<String, u32>, line: usize) -> Result<i64, AsmError> {
    match v {
        Value::Num(n) => Ok(*n),
        Value::Label(l) => {
            symbols
                .get(l)
                .map(|&a| a as i64)
                .ok_or_else(|| AsmError::UndefinedLabel {
                    line,
                    label: l.clone(),
                })
        }
    }
}

fn encode_line(
    mnemonic: &str,
    ops: &[Operand],
    pc: u32,
    symbols: &BTreeMap<String, u32>,
    line: usize,
) -> Result<Instr, AsmError> {
    let bad = |message: String| AsmError::ParseError { line, message };
    let arity = |n: usize| {
        if ops.len() == n {
            Ok(())
        } else {
            Err(bad(format!(
                "{mnemonic} takes {n} operands, got {}",
                ops.len()
            )))
        }
    };
    let reg = |i: usize| match &ops[i] {
        Operand::Reg(r) => Ok(*r),
        other => Err(bad(format!("expected register, got {other:?}"))),
    };
    let signed = |i: usize, what: &'static str| -> Result<i16, AsmError> {
        let Operand::Value(v) = &ops[i] else {
            return Err(bad(format!("expected immediate for {what}")));
        };
        let n = resolve(v, symbols, line)?;
        i16::try_from(n).map_err(|_| AsmError::RangeError {
            line,
            value: n,
            what,
        })
    };
    let unsigned = |i: usize, what: &'static str| -> Result<u16, AsmError> {
        let Operand::Value(v) = &ops[i] else {
            return Err(bad(format!("expected immediate for {what}")));
        };
        let n = resolve(v, symbols, line)?;
        u16::try_from(n).map_err(|_| AsmError::RangeError {
            line,
            value: n,
            what,
        })
    };
    let mem = |i: usize| -> Result<(i16, Reg), AsmError> {
        let Operand::Mem(off, ra) = &ops[i] else {
            return Err(bad("expected memory operand off(rX)".into()));
        };
        let n = resolve(off, symbols, line)?;
        let off = i16::try_from(n).map_err(|_| AsmError::RangeError {
            line,
            value: n,
            what: "memory offset",
        })?;
        Ok((off, *ra))
    };
    let target = |i: usize| -> Result<i16, AsmError> {
        let Operand::Value(v) = &ops[i] else {
            return Err(bad("expected branch target".into()));
        };
        let dest = resolve(v, symbols, line)?;
        let delta = dest - (pc as i64 + 4);
        if delta % 4 != 0 {
            return Err(bad(format!("branch target {dest:#x} is not word aligned")));
        }
        i16::try_from(delta / 4).map_err(|_| AsmError::RangeError {
            line,
            value: delta / 4,
            what: "branch offset",
        })
    };

    use Instr::*;
    Ok(match mnemonic {
        "NOP" => {
            arity(0)?;
            Nop
        }
        "HALT" => {
            arity(0)?;
            Halt
        }
        "LI" => {
            arity(2)?;
            Li {
                rd: reg(0)?,
                imm: signed(1, "LI immediate")?,
            }
        }
        "LUI" => {
            arity(2)?;
            Lui {
                rd: reg(0)?,
                imm: unsigned(1, "LUI immediate")?,
            }
        }
        "ORI" => {
            arity(3)?;
            Ori {
                rd: reg(0)?,
                ra: reg(1)?,
                imm: unsigned(2, "ORI immediate")?,
            }
        }
        "ADD" | "SUB" => {
            arity(3)?;
            let (rd, ra, rb) = (reg(0)?, reg(1)?, reg(2)?);
            if mnemonic == "ADD" {
                Add { rd, ra, rb }
            } else {
                Sub { rd, ra, rb }
            }
        }
        "ADDI" => {
            arity(3)?;
            Addi {
                rd: reg(0)?,
                ra: reg(1)?,
                imm: signed(2, "ADDI immediate")?,
            }
        }
        "LW" => {
            arity(2)?;
            let rd = reg(0)?;
            let (off, ra) = mem(1)?;
            Lw { rd, ra, off }
        }
        "SW" => {
            arity(2)?;
            let rs = reg(0)?;
            let (off, ra) = mem(1)?;
            Sw { rs, ra, off }
        }
        "BEQ" | "BNE" => {
            arity(3)?;
            let (ra, rb, off) = (reg(0)?, reg(1)?, target(2)?);
            if mnemonic == "BEQ" {
                Beq { ra, rb, off }
            } else {
                Bne { ra, rb, off }
            }
        }
        "JMP" => {
            arity(1)?;
            Jmp { off: target(0)? }
        }
        other => return Err(bad(format!("unknown mnemonic `{other}`"))),
    })
}
