//! Basic blocks and intra-function control-flow edges.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use ndarray::Array2;
use serde::Serialize;

use crate::decoder::{BranchKind, DecodedInstruction};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BasicBlock {
    pub index: usize,
    pub instructions: Vec<DecodedInstruction>,
    pub start_offset: usize,
    pub end_offset: usize,
}

impl BasicBlock {
    pub fn terminator(&self) -> &DecodedInstruction {
        self.instructions.last().expect("blocks are never empty")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FunctionCfg {
    pub blocks: Vec<BasicBlock>,
    pub edges: BTreeSet<(usize, usize)>,
}

/// In-range branch target that lands on an instruction boundary.
fn resolved_target(instr: &DecodedInstruction, starts: &BTreeSet<usize>) -> Option<usize> {
    let t = instr.rel_target?;
    let t = usize::try_from(t).ok()?;
    starts.contains(&t).then_some(t)
}

/// Block-start offsets: the entry, every resolved in-function branch target,
/// and the instruction following every branch, call or return.
pub fn find_leaders(instrs: &[DecodedInstruction]) -> BTreeSet<usize> {
    let mut leaders = BTreeSet::new();
    let Some(first) = instrs.first() else {
        return leaders;
    };
    leaders.insert(first.offset);
    let starts: BTreeSet<usize> = instrs.iter().map(|i| i.offset).collect();
    for (i, instr) in instrs.iter().enumerate() {
        if !instr.is_branch() {
            continue;
        }
        if let Some(t) = resolved_target(instr, &starts) {
            leaders.insert(t);
        }
        if let Some(next) = instrs.get(i + 1) {
            leaders.insert(next.offset);
        }
    }
    leaders
}

pub fn build_cfg(instrs: &[DecodedInstruction]) -> FunctionCfg {
    let leaders = find_leaders(instrs);
    let mut blocks: Vec<BasicBlock> = Vec::with_capacity(leaders.len());
    for instr in instrs {
        if leaders.contains(&instr.offset) || blocks.is_empty() {
            blocks.push(BasicBlock {
                index: blocks.len(),
                instructions: Vec::new(),
                start_offset: instr.offset,
                end_offset: instr.offset,
            });
        }
        let b = blocks.last_mut().unwrap();
        b.end_offset = instr.end();
        b.instructions.push(instr.clone());
    }

    let starts: BTreeSet<usize> = instrs.iter().map(|i| i.offset).collect();
    let block_at: HashMap<usize, usize> = blocks.iter().map(|b| (b.start_offset, b.index)).collect();
    let mut edges = BTreeSet::new();
    for b in &blocks {
        let term = b.terminator();
        let fall = (b.index + 1 < blocks.len()).then_some(b.index + 1);
        let target = resolved_target(term, &starts).and_then(|t| block_at.get(&t).copied());
        let succ: [Option<usize>; 2] = match term.branch_kind {
            BranchKind::JumpConditional => [target, fall],
            BranchKind::JumpUnconditional => [target, None],
            BranchKind::Ret | BranchKind::Indirect => [None, None],
            BranchKind::Call | BranchKind::None => [fall, None],
        };
        for s in succ.into_iter().flatten() {
            edges.insert((b.index, s));
        }
    }
    FunctionCfg { blocks, edges }
}

impl FunctionCfg {
    pub fn out_degree(&self, block: usize) -> usize {
        self.edges.range((block, 0)..(block + 1, 0)).count()
    }

    /// Binary `m x m` adjacency over the first `m` blocks.
    pub fn adjacency_matrix(&self, m: usize) -> Array2<u8> {
        assert!(m >= 1, "block budget must be positive");
        let mut a = Array2::zeros((m, m));
        for &(s, t) in &self.edges {
            if s < m && t < m {
                a[[s, t]] = 1;
            }
        }
        a
    }

    /// Graphviz rendering of the blocks and edges.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", name.replace('"', "\\\""));
        let _ = writeln!(out, "  node [shape=box, fontname=monospace];");
        for b in &self.blocks {
            let _ = writeln!(
                out,
                "  b{} [label=\"#{} {:#x}..{:#x} ({} insns)\"];",
                b.index,
                b.index,
                b.start_offset,
                b.end_offset,
                b.instructions.len()
            );
        }
        for (s, t) in &self.edges {
            let _ = writeln!(out, "  b{s} -> b{t};");
        }
        out.push_str("}\n");
        out
    }
}

pub fn adjacency_matrix(cfg: &FunctionCfg, m: usize) -> Array2<u8> {
    cfg.adjacency_matrix(m)
}
