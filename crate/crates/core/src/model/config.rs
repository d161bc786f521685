use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sequential,
    Graph,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Sequential => "sequential",
            ModelKind::Graph => "graph",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" | "seq" => Ok(ModelKind::Sequential),
            "graph" | "gcn" => Ok(ModelKind::Graph),
            other => Err(format!("unknown model kind {other:?} (expected sequential or graph)")),
        }
    }
}

/// Architecture hyperparameters for both classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub func_dim: usize,
    pub prog_dim: usize,
    pub heads: usize,
    /// Sequential: one convolution branch per kernel size.
    pub seq_kernels: Vec<usize>,
    /// Sequential: filters per branch.
    pub seq_filters: usize,
    /// Graph: filters of the per-block convolution (block embedding width).
    pub block_dim: usize,
    pub graph_kernel: usize,
    pub gcn_layers: usize,
    pub gcn_hidden: usize,
    /// Hidden width of the top-K node scorer.
    pub scorer_hidden: usize,
    pub topk_ratio: f64,
    pub temperature: f64,
    pub dropout: f64,
    pub ffn_hidden: Vec<usize>,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Graph,
            vocab_size: 3,
            embed_dim: 512,
            func_dim: 512,
            prog_dim: 256,
            heads: 8,
            seq_kernels: vec![7],
            seq_filters: 768,
            block_dim: 512,
            graph_kernel: 3,
            gcn_layers: 2,
            gcn_hidden: 512,
            scorer_hidden: 128,
            topk_ratio: 0.1,
            temperature: 0.1,
            dropout: 0.3,
            ffn_hidden: vec![256, 128, 64],
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid model config: {0}")]
pub struct ConfigError(pub String);

impl ModelConfig {
    /// Single-kernel sequential model (768 filters).
    pub fn sequential(kernel: usize, vocab_size: usize) -> Self {
        Self {
            kind: ModelKind::Sequential,
            vocab_size,
            seq_kernels: vec![kernel],
            seq_filters: 768,
            ..Self::default()
        }
    }

    /// Kernels 3, 5 and 7 side by side with 256 filters each.
    pub fn hybrid(vocab_size: usize) -> Self {
        Self {
            kind: ModelKind::Sequential,
            vocab_size,
            seq_kernels: vec![3, 5, 7],
            seq_filters: 256,
            ..Self::default()
        }
    }

    pub fn graph(gcn_layers: usize, vocab_size: usize) -> Self {
        Self {
            kind: ModelKind::Graph,
            vocab_size,
            gcn_layers,
            ..Self::default()
        }
    }

    /// Same architecture with every width replaced by `width` (FFN scaled
    /// proportionally); used for desk-scale experiments.
    pub fn scaled(mut self, width: usize) -> Self {
        self.embed_dim = width;
        self.func_dim = width;
        self.prog_dim = width;
        self.block_dim = width;
        self.gcn_hidden = width;
        self.scorer_hidden = width.max(2) / 2;
        self.seq_filters = width;
        self.ffn_hidden = [1, 2, 4].iter().map(|d| (width / d).max(1)).collect();
        while self.heads > 1 && width % self.heads != 0 {
            self.heads /= 2;
        }
        self
    }

    /// Top-K slots per function for a block budget of `n_blk`.
    pub fn topk_slots(&self, n_blk: usize) -> usize {
        topk_count(n_blk, self.topk_ratio)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError(m.to_owned()));
        if self.vocab_size < 3 {
            return err("vocab_size must include the three reserved ids");
        }
        let dims = [
            self.embed_dim,
            self.func_dim,
            self.prog_dim,
            self.heads,
            self.seq_filters,
            self.block_dim,
            self.graph_kernel,
            self.gcn_hidden,
            self.scorer_hidden,
        ];
        if dims.contains(&0) || self.ffn_hidden.contains(&0) {
            return err("all dimensions must be positive");
        }
        if self.func_dim % self.heads != 0 {
            return err("func_dim must be divisible by heads");
        }
        if self.kind == ModelKind::Sequential && (self.seq_kernels.is_empty() || self.seq_kernels.contains(&0)) {
            return err("sequential model needs at least one positive kernel size");
        }
        if self.kind == ModelKind::Graph && self.gcn_layers == 0 {
            return err("graph model needs at least one GCN layer");
        }
        if !(self.topk_ratio > 0.0 && self.topk_ratio <= 1.0) {
            return err("topk_ratio must be in (0, 1]");
        }
        if !(self.temperature > 0.0) {
            return err("temperature must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

/// `max(1, ceil(ratio * m))`.
pub fn topk_count(m: usize, ratio: f64) -> usize {
    ((ratio * m as f64).ceil() as usize).clamp(1, m.max(1))
}
