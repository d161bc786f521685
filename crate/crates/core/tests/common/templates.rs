//! Instruction templates with known field layouts, for operand-invariance
//! checks of the tokenizer.

use machvuln_core::decoder::decode_instruction;
use machvuln_core::tokenizer::tokenize;
use proptest::prelude::*;

/// An instruction with a known layout: `head` is prefixes, REX, opcode,
/// ModR/M and SIB; `disp` and `imm` are operand byte counts.
#[derive(Debug, Clone)]
pub struct Template {
    pub head: Vec<u8>,
    pub disp: usize,
    pub imm: usize,
}

/// reg field, then a memory operand with a displacement: mod=01 (disp8),
/// mod=10 (disp32), RIP-relative or SIB with no base.
fn memory_operand() -> impl Strategy<Value = (Vec<u8>, usize)> {
    (0u8..8, 0u8..8, 0u8..8, 0u8..4).prop_map(|(reg, rm, idx, form)| {
        let rm = if rm == 4 { 3 } else { rm };
        match form {
            0 => (vec![0x40 | reg << 3 | rm], 1),
            1 => (vec![0x80 | reg << 3 | rm], 4),
            2 => (vec![reg << 3 | 5], 4),
            _ => (vec![reg << 3 | 4, (idx << 3) | 5], 4),
        }
    })
}

fn rex() -> impl Strategy<Value = Vec<u8>> {
    prop_oneof![Just(vec![]), (0x40u8..0x50).prop_map(|r| vec![r])]
}

pub fn template() -> impl Strategy<Value = Template> {
    let modrm_ops = prop::sample::select(vec![0x01u8, 0x03, 0x29, 0x2B, 0x31, 0x33, 0x39, 0x3B, 0x85, 0x89, 0x8B, 0x8D]);
    prop_oneof![
        // op r/m, reg with a displacement
        (rex(), modrm_ops, memory_operand()).prop_map(|(mut head, op, (m, disp))| {
            head.push(op);
            head.extend(m);
            Template { head, disp, imm: 0 }
        }),
        // group-1 immediates: 81 /n imm32, 83 /n imm8, with a memory operand
        (rex(), any::<bool>(), memory_operand()).prop_map(|(mut head, wide, (m, disp))| {
            head.push(if wide { 0x81 } else { 0x83 });
            head.extend(m);
            Template { head, disp, imm: if wide { 4 } else { 1 } }
        }),
        // 16-bit operand size: 66 81 /n imm16
        memory_operand().prop_map(|(m, disp)| {
            let mut head = vec![0x66, 0x81];
            head.extend(m);
            Template { head, disp, imm: 2 }
        }),
        // mov r/m, imm: C6 imm8, C7 imm32
        (rex(), any::<bool>(), memory_operand()).prop_map(|(mut head, wide, (m, disp))| {
            let reg0 = m[0] & !0x38;
            head.push(if wide { 0xC7 } else { 0xC6 });
            head.push(reg0);
            head.extend(&m[1..]);
            Template { head, disp, imm: if wide { 4 } else { 1 } }
        }),
        // imul reg, r/m, imm: 69 imm32, 6B imm8
        (rex(), any::<bool>(), memory_operand()).prop_map(|(mut head, wide, (m, disp))| {
            head.push(if wide { 0x69 } else { 0x6B });
            head.extend(m);
            Template { head, disp, imm: if wide { 4 } else { 1 } }
        }),
        // mov reg, imm32 / movabs reg, imm64
        (0u8..8, any::<bool>()).prop_map(|(r, abs)| if abs {
            Template { head: vec![0x48, 0xB8 + r], disp: 0, imm: 8 }
        } else {
            Template { head: vec![0xB8 + r], disp: 0, imm: 4 }
        }),
        // relative branches and calls
        prop::sample::select(vec![
            (vec![0xE8u8], 4usize),
            (vec![0xE9], 4),
            (vec![0xEB], 1),
            (vec![0x74], 1),
            (vec![0x7F], 1),
            (vec![0x0F, 0x84], 4),
            (vec![0x0F, 0x8C], 4),
        ])
        .prop_map(|(head, imm)| Template { head, disp: 0, imm }),
        // push imm
        any::<bool>().prop_map(|wide| Template {
            head: vec![if wide { 0x68 } else { 0x6A }],
            disp: 0,
            imm: if wide { 4 } else { 1 },
        }),
        // SSE with a displacement: movsd xmm, m64 / pshufd xmm, m128, imm8
        (memory_operand(), any::<bool>()).prop_map(|((m, disp), shuf)| {
            let (mut head, imm) = if shuf { (vec![0x66, 0x0F, 0x70], 1) } else { (vec![0xF2, 0x0F, 0x10], 0) };
            head.extend(m);
            Template { head, disp, imm }
        }),
    ]
}

pub fn assemble(t: &Template, operands: &[u8]) -> Vec<u8> {
    let mut b = t.head.clone();
    b.extend(&operands[..t.disp + t.imm]);
    b
}

/// `None` when both operand fillings decode to the template's layout and
/// share one token equal to the template head.
pub fn invariance_failure(t: &Template, a: &[u8], b: &[u8]) -> Option<String> {
    let x = assemble(t, a);
    let y = assemble(t, b);
    let (dx, dy) = match (decode_instruction(&x, 0), decode_instruction(&y, 0)) {
        (Ok(dx), Ok(dy)) => (dx, dy),
        (e1, e2) => return Some(format!("{x:02X?} / {y:02X?}: {:?} {:?}", e1.err(), e2.err())),
    };
    if dx.len() != x.len() || dy.len() != y.len() || dx.disp_len as usize != t.disp || dx.imm_len as usize != t.imm {
        return Some(format!("{x:02X?}: decoded layout differs from {t:?}"));
    }
    let (tx, ty) = (tokenize(&dx), tokenize(&dy));
    if tx.as_ref().map(|t| t.bytes()) != Some(&t.head[..]) || tx != ty {
        return Some(format!("{x:02X?} / {y:02X?}: tokens {tx:?} vs {ty:?}"));
    }
    None
}
