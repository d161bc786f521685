//! x86-64 instruction-length decoding.
//!
//! The decoder splits a byte stream into the fields of each instruction
//! (legacy prefixes, REX, opcode, ModR/M, SIB, displacement, immediate)
//! without lifting anything to mnemonics. Only 64-bit mode is supported.

mod tables;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tables::Attr;

/// Architectural maximum instruction length.
pub const MAX_INSTRUCTION_LEN: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    None,
    JumpUnconditional,
    JumpConditional,
    Call,
    Ret,
    Indirect,
}

/// How the opcode was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Legacy,
    /// VEX (C4/C5) or EVEX (62) encoded.
    Vex,
    /// Pseudo-instruction covering one undecodable byte.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedInstruction {
    pub offset: usize,
    pub legacy_prefixes: Vec<u8>,
    pub rex: Option<u8>,
    /// VEX/EVEX prefix bytes including the C4/C5/62 lead byte.
    pub vex: Vec<u8>,
    /// Opcode bytes, escapes included (`0F`, `0F 38`, `0F 3A`).
    pub opcode: Vec<u8>,
    pub modrm: Option<u8>,
    pub sib: Option<u8>,
    pub disp_len: u8,
    pub imm_len: u8,
    pub total_len: u8,
    pub encoding: Encoding,
    pub branch_kind: BranchKind,
    /// Resolved target of a relative jump or call, relative to the start of
    /// the decoded buffer. May fall outside the buffer.
    pub rel_target: Option<i64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unknown opcode at offset {offset:#x}: {bytes:02X?}")]
    UnknownOpcode { offset: usize, bytes: Vec<u8> },
    #[error("instruction at offset {offset:#x} needs {needed} bytes, {available} available")]
    TruncatedInstruction {
        offset: usize,
        needed: usize,
        available: usize,
    },
}

impl DecodedInstruction {
    /// The one-byte INVALID pseudo-instruction emitted during recovery.
    pub fn invalid(offset: usize, byte: u8) -> Self {
        Self {
            offset,
            legacy_prefixes: Vec::new(),
            rex: None,
            vex: Vec::new(),
            opcode: vec![byte],
            modrm: None,
            sib: None,
            disp_len: 0,
            imm_len: 0,
            total_len: 1,
            encoding: Encoding::Invalid,
            branch_kind: BranchKind::None,
            rel_target: None,
        }
    }

    pub fn is_branch(&self) -> bool {
        self.branch_kind != BranchKind::None
    }

    pub fn is_invalid(&self) -> bool {
        self.encoding == Encoding::Invalid
    }

    pub fn len(&self) -> usize {
        self.total_len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.total_len == 0
    }

    /// Offset one past the last byte.
    pub fn end(&self) -> usize {
        self.offset + self.len()
    }

    /// Sum of the field lengths; equals `total_len` for every decoded instruction.
    pub fn field_len(&self) -> usize {
        self.legacy_prefixes.len()
            + self.rex.is_some() as usize
            + self.vex.len()
            + self.opcode.len()
            + self.modrm.is_some() as usize
            + self.sib.is_some() as usize
            + self.disp_len as usize
            + self.imm_len as usize
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    start: usize,
    pos: usize,
}

impl Cursor<'_> {
    fn need(&self, n: usize) -> Result<(), DecodeError> {
        let consumed = self.pos - self.start;
        if consumed + n > MAX_INSTRUCTION_LEN {
            return Err(self.unknown());
        }
        if self.pos + n > self.bytes.len() {
            return Err(DecodeError::TruncatedInstruction {
                offset: self.start,
                needed: consumed + n,
                available: self.bytes.len() - self.start,
            });
        }
        Ok(())
    }

    fn next(&mut self) -> Result<u8, DecodeError> {
        self.need(1)?;
        let b = self.bytes[self.pos];
        self.pos += 1;
        Ok(b)
    }

    fn peek(&self) -> Result<u8, DecodeError> {
        self.need(1)?;
        Ok(self.bytes[self.pos])
    }

    fn skip(&mut self, n: usize) -> Result<(), DecodeError> {
        self.need(n)?;
        self.pos += n;
        Ok(())
    }

    fn read_le(&self, at: usize, n: usize) -> i64 {
        match n {
            1 => self.bytes[at] as i8 as i64,
            2 => i16::from_le_bytes([self.bytes[at], self.bytes[at + 1]]) as i64,
            4 => i32::from_le_bytes(self.bytes[at..at + 4].try_into().unwrap()) as i64,
            _ => unreachable!("relative operands are 1, 2 or 4 bytes"),
        }
    }

    fn unknown(&self) -> DecodeError {
        let end = (self.pos + 1).min(self.bytes.len());
        DecodeError::UnknownOpcode {
            offset: self.start,
            bytes: self.bytes[self.start..end].to_vec(),
        }
    }
}

/// Decode the instruction starting at `offset`.
pub fn decode_instruction(bytes: &[u8], offset: usize) -> Result<DecodedInstruction, DecodeError> {
    if offset >= bytes.len() {
        return Err(DecodeError::TruncatedInstruction {
            offset,
            needed: 1,
            available: 0,
        });
    }
    let mut cur = Cursor {
        bytes,
        start: offset,
        pos: offset,
    };

    let mut legacy_prefixes = Vec::new();
    while tables::is_legacy_prefix(cur.peek()?) {
        legacy_prefixes.push(cur.next()?);
    }
    let opsize = legacy_prefixes.contains(&0x66);
    let addrsize = legacy_prefixes.contains(&0x67);

    let mut rex = None;
    if (0x40..=0x4F).contains(&cur.peek()?) {
        rex = Some(cur.next()?);
    }
    let rex_w = rex.is_some_and(|r| r & 0x08 != 0);

    let lead = cur.next()?;
    let mut vex = Vec::new();
    let mut opcode = vec![lead];
    let mut branch_kind = BranchKind::None;
    let mut rel_len = 0usize;
    let mut has_modrm = false;
    let mut imm_len = 0usize;
    let mut group3 = None;
    let mut encoding = Encoding::Legacy;

    match tables::one_byte(lead) {
        Attr::Invalid | Attr::Prefix => return Err(cur.unknown()),
        Attr::Vex => {
            // REX or 66/F2/F3/F0 before VEX is #UD
            if rex.is_some() || legacy_prefixes.iter().any(|p| matches!(p, 0x66 | 0xF2 | 0xF3 | 0xF0)) {
                return Err(cur.unknown());
            }
            encoding = Encoding::Vex;
            let payload = match lead {
                0xC5 => 1,
                0xC4 => 2,
                _ => 3,
            };
            let p0 = cur.peek()?;
            cur.skip(payload)?;
            vex = bytes[offset + legacy_prefixes.len()..cur.pos].to_vec();
            let map = match lead {
                0xC5 => 1,
                0xC4 => p0 & 0x1F,
                _ => p0 & 0x07,
            };
            let valid_map = match lead {
                0x62 => matches!(map, 1 | 2 | 3 | 5 | 6),
                _ => matches!(map, 1..=3),
            };
            if !valid_map {
                return Err(cur.unknown());
            }
            let op = cur.next()?;
            opcode = vec![op];
            has_modrm = !(map == 1 && op == 0x77 && lead != 0x62);
            imm_len = tables::vex_imm_len(map, op);
        }
        Attr::Escape => {
            let second = cur.next()?;
            opcode.push(second);
            match second {
                0x38 => {
                    opcode.push(cur.next()?);
                    has_modrm = true;
                }
                0x3A => {
                    opcode.push(cur.next()?);
                    has_modrm = true;
                    imm_len = 1;
                }
                _ => match tables::two_byte(second) {
                    Attr::Invalid | Attr::Escape => return Err(cur.unknown()),
                    Attr::None => {}
                    Attr::ModRm => has_modrm = true,
                    Attr::ModRmImm8 | Attr::ThreeDNow => {
                        has_modrm = true;
                        imm_len = 1;
                    }
                    Attr::Rel32 => {
                        rel_len = 4;
                        branch_kind = BranchKind::JumpConditional;
                    }
                    other => unreachable!("two-byte map has no {other:?} entries"),
                },
            }
        }
        Attr::None => {
            branch_kind = match lead {
                0xC3 | 0xCB | 0xCF => BranchKind::Ret,
                _ => BranchKind::None,
            };
        }
        Attr::ModRm => has_modrm = true,
        Attr::ModRmImm8 => {
            has_modrm = true;
            imm_len = 1;
        }
        Attr::ModRmImmZ => {
            has_modrm = true;
            imm_len = if opsize { 2 } else { 4 };
        }
        Attr::Imm8 => imm_len = 1,
        Attr::Imm16 => {
            imm_len = 2;
            branch_kind = BranchKind::Ret;
        }
        Attr::ImmZ => imm_len = if opsize { 2 } else { 4 },
        Attr::ImmV => {
            imm_len = if rex_w {
                8
            } else if opsize {
                2
            } else {
                4
            }
        }
        Attr::Imm16Imm8 => imm_len = 3,
        Attr::Moffs => imm_len = if addrsize { 4 } else { 8 },
        Attr::Rel8 => {
            rel_len = 1;
            branch_kind = if lead == 0xEB {
                BranchKind::JumpUnconditional
            } else {
                BranchKind::JumpConditional
            };
        }
        Attr::Rel32 => {
            rel_len = 4;
            branch_kind = if lead == 0xE8 {
                BranchKind::Call
            } else {
                BranchKind::JumpUnconditional
            };
        }
        Attr::Group3Byte => {
            has_modrm = true;
            group3 = Some(1);
        }
        Attr::Group3Full => {
            has_modrm = true;
            group3 = Some(if opsize { 2 } else { 4 });
        }
        Attr::ThreeDNow => unreachable!(),
    }

    let mut modrm = None;
    let mut sib = None;
    let mut disp_len = 0usize;
    if has_modrm {
        let m = cur.next()?;
        modrm = Some(m);
        let md = m >> 6;
        let rm = m & 0x07;
        let reg = (m >> 3) & 0x07;
        if md != 3 && rm == 4 {
            let s = cur.next()?;
            sib = Some(s);
            if md == 0 && s & 0x07 == 5 {
                disp_len = 4;
            }
        }
        disp_len = match md {
            0 if rm == 5 => 4,
            0 => disp_len,
            1 => 1,
            2 => 4,
            _ => 0,
        };
        if let Some(full) = group3 {
            if reg < 2 {
                imm_len = full;
            }
        }
        if encoding == Encoding::Legacy && opcode == [0xFF] {
            branch_kind = match reg {
                2 | 3 => BranchKind::Call,
                4 | 5 => BranchKind::Indirect,
                _ => BranchKind::None,
            };
        }
        cur.skip(disp_len)?;
    }

    cur.skip(imm_len)?;
    let mut rel_target = None;
    if rel_len > 0 {
        let at = cur.pos;
        cur.skip(rel_len)?;
        let rel = cur.read_le(at, rel_len);
        rel_target = Some(cur.pos as i64 + rel);
        imm_len = rel_len;
    }

    let total_len = cur.pos - offset;
    Ok(DecodedInstruction {
        offset,
        legacy_prefixes,
        rex,
        vex,
        opcode,
        modrm,
        sib,
        disp_len: disp_len as u8,
        imm_len: imm_len as u8,
        total_len: total_len as u8,
        encoding,
        branch_kind,
        rel_target,
    })
}

/// Linear sweep over `bytes[start..end]`.
///
/// Undecodable bytes (unknown opcodes, or instructions running past `end`)
/// become one-byte INVALID pseudo-instructions so the output always tiles
/// the range.
pub fn decode_linear(bytes: &[u8], start: usize, end: usize) -> Vec<DecodedInstruction> {
    assert!(start <= end && end <= bytes.len(), "range {start}..{end} out of bounds");
    let window = &bytes[..end];
    let mut out = Vec::new();
    let mut pos = start;
    while pos < end {
        let instr = decode_instruction(window, pos)
            .unwrap_or_else(|_| DecodedInstruction::invalid(pos, bytes[pos]));
        pos += instr.len();
        out.push(instr);
    }
    out
}
