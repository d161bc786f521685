//! Fixed-shape program tensors: one instruction sequence per function for
//! the sequential model, and per-function (feature, adjacency) pairs for the
//! graph model.

use std::collections::BTreeSet;

use ndarray::{Array2, Array3, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::FunctionCfg;
use crate::tokenizer::{Vocabulary, PAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentationConfig {
    /// Instructions kept per function (sequential).
    pub n_seq: usize,
    /// Functions kept per program (sequential).
    pub m_seq: usize,
    /// Instructions per block and blocks per function (graph).
    pub n_blk: usize,
    /// Functions kept per program (graph).
    pub p: usize,
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        Self {
            n_seq: 256,
            m_seq: 16,
            n_blk: 16,
            p: 16,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("representation sizes must all be at least 1: {0:?}")]
pub struct InvalidShape(pub RepresentationConfig);

impl RepresentationConfig {
    pub fn validate(&self) -> Result<(), InvalidShape> {
        if self.n_seq == 0 || self.m_seq == 0 || self.n_blk == 0 || self.p == 0 {
            return Err(InvalidShape(*self));
        }
        Ok(())
    }

    pub fn seq_len(&self) -> usize {
        self.n_seq * self.m_seq
    }

    pub fn graph_len(&self) -> usize {
        self.p * self.n_blk * self.n_blk
    }
}

/// `n_seq x m_seq` token ids; column j is function j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqTensor(pub Array2<u32>);

/// Per function i: `features[i]` holds block b's instructions in column b,
/// `adjacency[i]` the directed block edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphTensor {
    pub features: Array3<u32>,
    pub adjacency: Array3<u8>,
}

/// Either representation of one program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgramTensor {
    Seq(SeqTensor),
    Graph(GraphTensor),
}

impl ProgramTensor {
    /// Every token id in the tensor.
    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        let (a, b) = match self {
            ProgramTensor::Seq(t) => (Some(t.0.iter()), None),
            ProgramTensor::Graph(g) => (None, Some(g.features.iter())),
        };
        a.into_iter().flatten().chain(b.into_iter().flatten()).copied()
    }
}

/// A function's token ids split by basic block, with its CFG edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphFunction {
    pub blocks: Vec<Vec<u32>>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl GraphFunction {
    pub fn from_cfg(cfg: &FunctionCfg, vocab: &Vocabulary) -> Self {
        Self {
            blocks: cfg
                .blocks
                .iter()
                .map(|b| b.instructions.iter().map(|i| vocab.encode_instruction(i)).collect())
                .collect(),
            edges: cfg.edges.clone(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.blocks.iter().flatten().copied()
    }
}

fn fill_column(mut col: ndarray::ArrayViewMut1<u32>, ids: &[u32]) {
    for (slot, &id) in col.iter_mut().zip(ids) {
        *slot = id;
    }
}

/// Head-truncates and PAD-fills every function, keeping the first `m_seq`.
pub fn build_sequential(functions: &[Vec<u32>], cfg: &RepresentationConfig) -> SeqTensor {
    let mut t = Array2::from_elem((cfg.n_seq, cfg.m_seq), PAD);
    for (j, ids) in functions.iter().take(cfg.m_seq).enumerate() {
        fill_column(t.column_mut(j), ids);
    }
    SeqTensor(t)
}

pub fn build_graph(functions: &[GraphFunction], cfg: &RepresentationConfig) -> GraphTensor {
    let n = cfg.n_blk;
    let mut features = Array3::from_elem((cfg.p, n, n), PAD);
    let mut adjacency = Array3::zeros((cfg.p, n, n));
    for (i, f) in functions.iter().take(cfg.p).enumerate() {
        let mut fi = features.index_axis_mut(Axis(0), i);
        for (b, ids) in f.blocks.iter().take(n).enumerate() {
            fill_column(fi.column_mut(b), ids);
        }
        let mut ai = adjacency.index_axis_mut(Axis(0), i);
        for &(s, t) in &f.edges {
            if s < n && t < n {
                ai[[s, t]] = 1;
            }
        }
    }
    GraphTensor {
        features,
        adjacency,
    }
}

/// A column of token ids belongs to a real unit iff it is not all PAD.
pub fn is_real(ids: ArrayView1<u32>) -> bool {
    ids.iter().any(|&id| id != PAD)
}

impl SeqTensor {
    pub fn real_functions(&self) -> Vec<usize> {
        (0..self.0.ncols()).filter(|&j| is_real(self.0.column(j))).collect()
    }
}

impl GraphTensor {
    pub fn functions(&self) -> usize {
        self.features.len_of(Axis(0))
    }

    pub fn n_blk(&self) -> usize {
        self.features.len_of(Axis(1))
    }

    pub fn real_blocks(&self, function: usize) -> Vec<usize> {
        let f = self.features.index_axis(Axis(0), function);
        (0..f.ncols()).filter(|&b| is_real(f.column(b))).collect()
    }

    pub fn real_functions(&self) -> Vec<usize> {
        (0..self.functions())
            .filter(|&i| !self.real_blocks(i).is_empty())
            .collect()
    }
}
