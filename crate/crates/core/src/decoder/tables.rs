//! Length-decoding attributes for the 64-bit opcode maps.
//!
//! Each entry says whether a ModR/M byte follows the opcode and how many
//! immediate bytes trail the addressing bytes. Nothing here knows about
//! mnemonics.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Attr {
    /// Not encodable in 64-bit mode.
    Invalid,
    /// Legacy prefix byte (handled before the table lookup).
    Prefix,
    /// 0x0F escape into the two-byte map.
    Escape,
    /// VEX / EVEX lead byte (C4, C5, 62).
    Vex,
    None,
    ModRm,
    ModRmImm8,
    /// ModR/M plus a 16/32-bit immediate chosen by operand size.
    ModRmImmZ,
    Imm8,
    Imm16,
    ImmZ,
    /// B8..BF: 64-bit immediate under REX.W.
    ImmV,
    /// ENTER: imm16 followed by imm8.
    Imm16Imm8,
    /// A0..A3: absolute memory offset sized by address size.
    Moffs,
    Rel8,
    Rel32,
    /// F6/F7: immediate present only for /0 and /1.
    Group3Byte,
    Group3Full,
    /// 0F 0F (3DNow!): ModR/M followed by a one-byte opcode suffix.
    ThreeDNow,
}

pub(crate) fn is_legacy_prefix(b: u8) -> bool {
    matches!(
        b,
        0xF0 | 0xF2 | 0xF3 | 0x2E | 0x36 | 0x3E | 0x26 | 0x64 | 0x65 | 0x66 | 0x67
    )
}

pub(crate) fn one_byte(op: u8) -> Attr {
    use Attr::*;
    match op {
        // ALU rows: r/m,reg forms then AL/eAX immediates
        0x00..=0x3F => match op & 0x07 {
            0..=3 => ModRm,
            4 => Imm8,
            5 => ImmZ,
            _ => match op {
                0x0F => Escape,
                0x26 | 0x2E | 0x36 | 0x3E => Prefix,
                // push/pop segment, daa/das/aaa/aas
                _ => Invalid,
            },
        },
        0x40..=0x4F => Prefix,
        0x50..=0x5F => None,
        0x60..=0x61 => Invalid,
        0x62 => Vex,
        0x63 => ModRm,
        0x64..=0x67 => Prefix,
        0x68 => ImmZ,
        0x69 => ModRmImmZ,
        0x6A => Imm8,
        0x6B => ModRmImm8,
        0x6C..=0x6F => None,
        0x70..=0x7F => Rel8,
        0x80 => ModRmImm8,
        0x81 => ModRmImmZ,
        0x82 => Invalid,
        0x83 => ModRmImm8,
        0x84..=0x8F => ModRm,
        0x90..=0x99 => None,
        0x9A => Invalid,
        0x9B..=0x9F => None,
        0xA0..=0xA3 => Moffs,
        0xA4..=0xA7 => None,
        0xA8 => Imm8,
        0xA9 => ImmZ,
        0xAA..=0xAF => None,
        0xB0..=0xB7 => Imm8,
        0xB8..=0xBF => ImmV,
        0xC0 | 0xC1 => ModRmImm8,
        0xC2 => Imm16,
        0xC3 => None,
        0xC4 | 0xC5 => Vex,
        0xC6 => ModRmImm8,
        0xC7 => ModRmImmZ,
        0xC8 => Imm16Imm8,
        0xC9 => None,
        0xCA => Imm16,
        0xCB | 0xCC => None,
        0xCD => Imm8,
        0xCE => Invalid,
        0xCF => None,
        0xD0..=0xD3 => ModRm,
        0xD4..=0xD6 => Invalid,
        0xD7 => None,
        0xD8..=0xDF => ModRm,
        0xE0..=0xE3 => Rel8,
        0xE4..=0xE7 => Imm8,
        0xE8 | 0xE9 => Rel32,
        0xEA => Invalid,
        0xEB => Rel8,
        0xEC..=0xEF => None,
        0xF0 => Prefix,
        0xF1 => None,
        0xF2 | 0xF3 => Prefix,
        0xF4 | 0xF5 => None,
        0xF6 => Group3Byte,
        0xF7 => Group3Full,
        0xF8..=0xFD => None,
        0xFE | 0xFF => ModRm,
    }
}

pub(crate) fn two_byte(op: u8) -> Attr {
    use Attr::*;
    match op {
        0x00..=0x03 => ModRm,
        0x04 => Invalid,
        0x05..=0x09 => None,
        0x0A => Invalid,
        0x0B => None,
        0x0C => Invalid,
        0x0D => ModRm,
        0x0E => None,
        0x0F => ThreeDNow,
        0x10..=0x1F => ModRm,
        0x20..=0x23 => ModRm,
        0x24..=0x27 => Invalid,
        0x28..=0x2F => ModRm,
        0x30..=0x35 => None,
        0x36 => Invalid,
        0x37 => None,
        // 0x38 / 0x3A are three-byte escapes, resolved by the caller
        0x38 | 0x3A => Escape,
        0x39 | 0x3B..=0x3F => Invalid,
        0x40..=0x6F => ModRm,
        0x70..=0x73 => ModRmImm8,
        0x74..=0x76 => ModRm,
        0x77 => None,
        0x78 | 0x79 => ModRm,
        0x7A | 0x7B => Invalid,
        0x7C..=0x7F => ModRm,
        0x80..=0x8F => Rel32,
        0x90..=0x9F => ModRm,
        0xA0..=0xA2 => None,
        0xA3 => ModRm,
        0xA4 => ModRmImm8,
        0xA5 => ModRm,
        0xA6 | 0xA7 => Invalid,
        0xA8..=0xAA => None,
        0xAB => ModRm,
        0xAC => ModRmImm8,
        0xAD..=0xB9 => ModRm,
        0xBA => ModRmImm8,
        0xBB..=0xC1 => ModRm,
        0xC2 => ModRmImm8,
        0xC3 => ModRm,
        0xC4..=0xC6 => ModRmImm8,
        0xC7 => ModRm,
        0xC8..=0xCF => None,
        0xD0..=0xFF => ModRm,
    }
}

/// Immediate bytes following a VEX/EVEX-encoded opcode in `map`.
pub(crate) fn vex_imm_len(map: u8, op: u8) -> usize {
    match map {
        3 => 1,
        1 if matches!(op, 0x70..=0x73 | 0xC2 | 0xC4..=0xC6) => 1,
        _ => 0,
    }
}
