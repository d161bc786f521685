//! Learnable weights of both architectures.
//!
//! Parameters are ordinary typed arrays; `named` / `named_mut` flatten them
//! into a stable, named list that the optimizer, the gradient checker and
//! the checkpoint format iterate over. Gradients use the same type.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, ModelKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `in x out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    fn init(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((input, output), |_| rng.gen_range(-bound..bound)),
            bias: Array1::from_shape_fn(output, |_| rng.gen_range(-bound..bound)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// One convolution branch followed by batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBranch {
    pub kernel: usize,
    /// `(kernel * embed_dim) x filters`; row `j * embed_dim + i` is tap j, channel i.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl ConvBranch {
    fn new(kernel: usize, embed: usize, filters: usize, rng: Option<&mut ChaCha8Rng>) -> Self {
        let fan_in = kernel * embed;
        let (weight, bias) = match rng {
            Some(rng) => {
                let l = Linear::init(fan_in, filters, rng);
                (l.weight, l.bias)
            }
            None => (Array2::zeros((fan_in, filters)), Array1::zeros(filters)),
        };
        Self {
            kernel,
            weight,
            bias,
            gamma: Array1::ones(filters),
            beta: Array1::zeros(filters),
            running_mean: Array1::zeros(filters),
            running_var: Array1::ones(filters),
        }
    }

    pub fn filters(&self) -> usize {
        self.weight.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqBody {
    pub branches: Vec<ConvBranch>,
    /// Concatenated branch features to the function embedding.
    pub func_proj: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphBody {
    pub conv: ConvBranch,
    /// One `in x hidden` matrix per GCN layer.
    pub gcn: Vec<Array2<f64>>,
    pub scorer_hidden: Linear,
    pub scorer_out: Linear,
    /// Concatenated top-K block features to the function embedding.
    pub block_proj: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Sequential(SeqBody),
    Graph(GraphBody),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embedding: Array2<f64>,
    pub body: Body,
    pub attention: Attention,
    pub prog_proj: Linear,
    /// Hidden layers followed by the single-logit output layer.
    pub ffn: Vec<Linear>,
}

macro_rules! walk {
    ($self:ident, $f:ident, $view:ident, $iter:ident $(, $m:tt)?) => {{
        $f("embedding".into(), $self.embedding.$view().into_dyn());
        macro_rules! linear {
            ($name:expr, $l:expr) => {{
                let name = $name;
                $f(format!("{name}.weight"), $l.weight.$view().into_dyn());
                $f(format!("{name}.bias"), $l.bias.$view().into_dyn());
            }};
        }
        match &$($m)? $self.body {
            Body::Sequential(s) => {
                for (i, b) in s.branches.$iter().enumerate() {
                    $f(format!("conv{i}.weight"), b.weight.$view().into_dyn());
                    $f(format!("conv{i}.bias"), b.bias.$view().into_dyn());
                    $f(format!("conv{i}.gamma"), b.gamma.$view().into_dyn());
                    $f(format!("conv{i}.beta"), b.beta.$view().into_dyn());
                }
                linear!("func_proj", s.func_proj);
            }
            Body::Graph(g) => {
                $f("conv0.weight".into(), g.conv.weight.$view().into_dyn());
                $f("conv0.bias".into(), g.conv.bias.$view().into_dyn());
                $f("conv0.gamma".into(), g.conv.gamma.$view().into_dyn());
                $f("conv0.beta".into(), g.conv.beta.$view().into_dyn());
                for (i, w) in g.gcn.$iter().enumerate() {
                    $f(format!("gcn{i}.weight"), w.$view().into_dyn());
                }
                linear!("scorer.hidden", g.scorer_hidden);
                linear!("scorer.out", g.scorer_out);
                linear!("block_proj", g.block_proj);
            }
        }
        linear!("attn.query", $self.attention.query);
        linear!("attn.key", $self.attention.key);
        linear!("attn.value", $self.attention.value);
        linear!("attn.output", $self.attention.output);
        linear!("prog_proj", $self.prog_proj);
        for (i, l) in $self.ffn.$iter().enumerate() {
            linear!(format!("ffn{i}"), l);
        }
    }};
}

impl ModelParams {
    /// Randomly initialized parameters for `cfg` with a block budget `n_blk`
    /// (needed to size the top-K projection of the graph model).
    pub fn init(cfg: &ModelConfig, n_blk: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(cfg, n_blk, Some(&mut rng))
    }

    pub fn zeros(cfg: &ModelConfig, n_blk: usize) -> Self {
        Self::build(cfg, n_blk, None)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, mut t| t.fill(0.0));
        z
    }

    fn build(cfg: &ModelConfig, n_blk: usize, mut rng: Option<&mut ChaCha8Rng>) -> Self {
        let mut lin = |i: usize, o: usize| match rng.as_deref_mut() {
            Some(r) => Linear::init(i, o, r),
            None => Linear::zeros(i, o),
        };
        let d = cfg.embed_dim;
        let attention = Attention {
            heads: cfg.heads,
            query: lin(cfg.func_dim, cfg.func_dim),
            key: lin(cfg.func_dim, cfg.func_dim),
            value: lin(cfg.func_dim, cfg.func_dim),
            output: lin(cfg.func_dim, cfg.func_dim),
        };
        let prog_proj = lin(cfg.func_dim, cfg.prog_dim);
        let mut ffn = Vec::new();
        let mut width = cfg.prog_dim;
        for &h in cfg.ffn_hidden.iter().chain(std::iter::once(&1)) {
            ffn.push(lin(width, h));
            width = h;
        }
        let body = match cfg.kind {
            ModelKind::Sequential => {
                let branches: Vec<ConvBranch> = cfg
                    .seq_kernels
                    .iter()
                    .map(|&k| ConvBranch::new(k, d, cfg.seq_filters, rng.as_deref_mut()))
                    .collect();
                let total = cfg.seq_filters * branches.len();
                let mut lin = |i: usize, o: usize| match rng.as_deref_mut() {
                    Some(r) => Linear::init(i, o, r),
                    None => Linear::zeros(i, o),
                };
                Body::Sequential(SeqBody {
                    branches,
                    func_proj: lin(total, cfg.func_dim),
                })
            }
            ModelKind::Graph => {
                let conv = ConvBranch::new(cfg.graph_kernel, d, cfg.block_dim, rng.as_deref_mut());
                let mut lin = |i: usize, o: usize| match rng.as_deref_mut() {
                    Some(r) => Linear::init(i, o, r),
                    None => Linear::zeros(i, o),
                };
                let mut gcn = Vec::new();
                let mut width = cfg.block_dim;
                for _ in 0..cfg.gcn_layers {
                    gcn.push(lin(width, cfg.gcn_hidden).weight);
                    width = cfg.gcn_hidden;
                }
                let slots = cfg.topk_slots(n_blk);
                Body::Graph(GraphBody {
                    conv,
                    gcn,
                    scorer_hidden: lin(cfg.gcn_hidden, cfg.scorer_hidden),
                    scorer_out: lin(cfg.scorer_hidden, 1),
                    block_proj: lin(slots * cfg.gcn_hidden, cfg.func_dim),
                })
            }
        };
        let embedding = match rng {
            Some(r) => {
                let bound = 1.0 / (d as f64).sqrt();
                Array2::from_shape_fn((cfg.vocab_size, d), |_| r.gen_range(-bound..bound))
            }
            None => Array2::zeros((cfg.vocab_size, d)),
        };
        Self {
            embedding,
            body,
            attention,
            prog_proj,
            ffn,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.body {
            Body::Sequential(_) => ModelKind::Sequential,
            Body::Graph(_) => ModelKind::Graph,
        }
    }

    pub fn for_each<'a>(&'a self, mut f: impl FnMut(String, ArrayViewD<'a, f64>)) {
        let f = &mut f as &mut dyn FnMut(String, ArrayViewD<'a, f64>);
        walk!(self, f, view, iter);
    }

    pub fn for_each_mut<'a>(&'a mut self, mut f: impl FnMut(String, ArrayViewMutD<'a, f64>)) {
        let f = &mut f as &mut dyn FnMut(String, ArrayViewMutD<'a, f64>);
        walk!(self, f, view_mut, iter_mut, mut);
    }

    pub fn named(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut v = Vec::new();
        self.for_each(|n, t| v.push((n, t)));
        v
    }

    pub fn named_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut v = Vec::new();
        self.for_each_mut(|n, t| v.push((n, t)));
        v
    }

    /// Batch-norm running statistics (not trained by gradient).
    pub fn buffers_mut(&mut self) -> Vec<(String, &mut Array1<f64>)> {
        let branches: Vec<&mut ConvBranch> = match &mut self.body {
            Body::Sequential(s) => s.branches.iter_mut().collect(),
            Body::Graph(g) => vec![&mut g.conv],
        };
        let mut v = Vec::new();
        for (i, b) in branches.into_iter().enumerate() {
            v.push((format!("conv{i}.running_mean"), &mut b.running_mean));
            v.push((format!("conv{i}.running_var"), &mut b.running_var));
        }
        v
    }

    pub fn buffers(&self) -> Vec<(String, &Array1<f64>)> {
        let mut v = Vec::new();
        for (i, b) in self.branches().into_iter().enumerate() {
            v.push((format!("conv{i}.running_mean"), &b.running_mean));
            v.push((format!("conv{i}.running_var"), &b.running_var));
        }
        v
    }

    pub fn branches(&self) -> Vec<&ConvBranch> {
        match &self.body {
            Body::Sequential(s) => s.branches.iter().collect(),
            Body::Graph(g) => vec![&g.conv],
        }
    }

    pub fn branches_mut(&mut self) -> Vec<&mut ConvBranch> {
        match &mut self.body {
            Body::Sequential(s) => s.branches.iter_mut().collect(),
            Body::Graph(g) => vec![&mut g.conv],
        }
    }

    pub fn num_parameters(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, t| n += t.len());
        n
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        let src = other.named();
        let mut i = 0;
        self.for_each_mut(|_, mut t| {
            t.scaled_add(scale, &src[i].1);
            i += 1;
        });
    }

    pub fn scale(&mut self, s: f64) {
        self.for_each_mut(|_, mut t| t.mapv_inplace(|v| v * s));
    }

    pub fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        self.for_each(|_, t| sq += t.iter().map(|v| v * v).sum::<f64>());
        sq.sqrt()
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|_, t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }
}
