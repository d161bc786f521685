//! Whole-model forward and backward passes.
//!
//! A batch is processed in three stages so that batch normalization can use
//! statistics shared by every sample while the per-sample work still runs in
//! parallel:
//!
//! 1. per sample: embed and convolve every real unit (function or block);
//! 2. per sample: normalize with the batch statistics, run the upper network
//!    forward and backward, and stop at the gradient of the normalized
//!    convolution output;
//! 3. per sample: finish the batch-norm backward with the batch-wide sums
//!    and push the gradient into the convolution and the embedding.
//!
//! Units that are entirely PAD never influence the output, so they are
//! skipped rather than computed and masked.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ModelKind};
use super::layers::*;
use super::params::{Body, ModelParams};
use super::ModelError;
use crate::par::Execution;
use crate::representation::{ProgramTensor, RepresentationConfig};

/// Which statistics batch normalization uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Statistics of the current batch (training).
    Batch,
    /// Running statistics (inference).
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradOptions {
    pub batch_norm: BnMode,
    /// Seed of the dropout masks; `None` disables dropout.
    pub dropout_seed: Option<u64>,
}

impl GradOptions {
    pub fn train(dropout_seed: u64) -> Self {
        Self {
            batch_norm: BnMode::Batch,
            dropout_seed: Some(dropout_seed),
        }
    }

    pub fn inference() -> Self {
        Self {
            batch_norm: BnMode::Running,
            dropout_seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub repr: RepresentationConfig,
    pub params: ModelParams,
}

#[derive(Debug, Clone)]
pub struct BatchGradient {
    /// Mean binary cross-entropy over the batch.
    pub loss: f64,
    /// Gradient of `loss`.
    pub grads: ModelParams,
    pub logits: Vec<f64>,
    /// Per-branch statistics used, when batch statistics were computed.
    pub batch_stats: Option<Vec<BnStats>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub logit: f64,
    pub probability: f64,
    /// Indices (within the program tensor) of the functions that were scored.
    pub functions: Vec<usize>,
    /// Head-averaged attention matrix over `functions`; rows sum to 1.
    pub attention: Vec<Vec<f64>>,
    /// Graph model only: per scored function, the α of each real block.
    pub block_weights: Vec<Vec<(usize, f64)>>,
}

impl Prediction {
    /// Attention received by each function: the column means of the score
    /// matrix. Sums to 1.
    pub fn function_importance(&self) -> Vec<f64> {
        let n = self.attention.len();
        (0..n)
            .map(|j| self.attention.iter().map(|row| row[j]).sum::<f64>() / n as f64)
            .collect()
    }
}

struct Layout {
    functions: Vec<usize>,
    /// Graph only: real blocks of each function.
    blocks: Vec<Vec<usize>>,
    /// Token sequence of every unit, function-major.
    units: Vec<Vec<u32>>,
    /// Graph only: normalized adjacency over each function's real blocks.
    adjacency: Vec<Array2<f64>>,
}

impl Layout {
    fn new(x: &ProgramTensor) -> Self {
        match x {
            ProgramTensor::Seq(t) => {
                let mut functions = t.real_functions();
                if functions.is_empty() {
                    functions.push(0);
                }
                let units = functions.iter().map(|&j| t.0.column(j).to_vec()).collect();
                Self {
                    functions,
                    blocks: Vec::new(),
                    units,
                    adjacency: Vec::new(),
                }
            }
            ProgramTensor::Graph(g) => {
                let mut functions = g.real_functions();
                if functions.is_empty() {
                    functions.push(0);
                }
                let mut blocks = Vec::with_capacity(functions.len());
                let mut units = Vec::new();
                let mut adjacency = Vec::with_capacity(functions.len());
                for &f in &functions {
                    let mut real = g.real_blocks(f);
                    if real.is_empty() {
                        real.push(0);
                    }
                    let feat = g.features.index_axis(Axis(0), f);
                    units.extend(real.iter().map(|&b| feat.column(b).to_vec()));
                    let a = Array2::from_shape_fn((real.len(), real.len()), |(i, j)| {
                        g.adjacency[[f, real[i], real[j]]] as f64
                    });
                    adjacency.push(normalized_adjacency(a.view()));
                    blocks.push(real);
                }
                Self {
                    functions,
                    blocks,
                    units,
                    adjacency,
                }
            }
        }
    }
}

struct Lower {
    layout: Layout,
    /// One entry per convolution branch. Patches are dropped after the
    /// forward pass and rebuilt for the backward pass.
    acts: Vec<ConvActivations>,
}

struct GraphFnCache {
    /// Input of every GCN layer followed by the final output.
    hs: Vec<Array2<f64>>,
    gcn: Vec<GcnCache>,
    scorer: ScorerCache,
    alpha: Array1<f64>,
    selected: Vec<usize>,
}

enum BodyCache {
    Seq { concat: Array2<f64> },
    Graph { flats: Array2<f64>, functions: Vec<GraphFnCache> },
}

struct Upper {
    posts: Vec<ConvPost>,
    body: BodyCache,
    attn: AttentionCache,
    mean: Array1<f64>,
    ffn: FfnCache,
    logit: f64,
}

impl Model {
    pub fn new(config: ModelConfig, repr: RepresentationConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        repr.validate()?;
        let params = ModelParams::init(&config, repr.n_blk, seed);
        Ok(Self { config, repr, params })
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    fn check_input(&self, x: &ProgramTensor) -> Result<(), ModelError> {
        match (x, self.config.kind) {
            (ProgramTensor::Seq(_), ModelKind::Sequential) => {}
            (ProgramTensor::Graph(g), ModelKind::Graph) => {
                if g.n_blk() != self.repr.n_blk || g.features.dim() != g.adjacency.dim() {
                    return Err(ModelError::Shape(format!(
                        "graph tensor has {} blocks per function, model expects {}",
                        g.n_blk(),
                        self.repr.n_blk
                    )));
                }
                if g.functions() == 0 {
                    return Err(ModelError::Shape("graph tensor has no function slots".into()));
                }
            }
            (_, kind) => return Err(ModelError::Shape(format!("{kind} model given the other representation"))),
        }
        if let ProgramTensor::Seq(t) = x {
            if t.0.is_empty() {
                return Err(ModelError::Shape("empty sequence tensor".into()));
            }
        }
        let vocab = self.params.embedding.nrows();
        match x.ids().find(|&id| id as usize >= vocab) {
            Some(id) => Err(ModelError::IdOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    fn lower(&self, x: &ProgramTensor, keep_patches: bool) -> Result<Lower, ModelError> {
        self.check_input(x)?;
        let layout = Layout::new(x);
        let len = layout.units[0].len();
        let acts = self
            .params
            .branches()
            .into_iter()
            .map(|b| {
                let patches = conv_patches(&self.params.embedding, &layout.units, b.kernel);
                let mut act = b.pre_activation(patches, conv_out_len(len, b.kernel));
                if !keep_patches {
                    act.patches = Array2::zeros((0, 0));
                }
                act
            })
            .collect();
        Ok(Lower { layout, acts })
    }

    fn upper_forward(&self, lower: &Lower, stats: &[BnStats], mut rng: Option<ChaCha8Rng>) -> Upper {
        let cfg = &self.config;
        let p = &self.params;
        let posts: Vec<ConvPost> = p
            .branches()
            .into_iter()
            .zip(&lower.acts)
            .zip(stats)
            .map(|((b, act), st)| {
                let dropout = match rng.as_mut() {
                    Some(r) if cfg.dropout > 0.0 => Some((cfg.dropout, r)),
                    _ => None,
                };
                b.post(act, st, cfg.bn_eps, dropout)
            })
            .collect();

        let (funcs, body) = match &p.body {
            Body::Sequential(sb) => {
                let views: Vec<_> = posts.iter().map(|q| q.pooled.view()).collect();
                let concat = concatenate(Axis(1), &views).expect("branches pool the same units");
                (sb.func_proj.forward(&concat), BodyCache::Seq { concat })
            }
            Body::Graph(gb) => {
                let pooled = &posts[0].pooled;
                let slots = cfg.topk_slots(self.repr.n_blk);
                let hidden = cfg.gcn_hidden;
                let n_fn = lower.layout.blocks.len();
                let mut flats = Array2::zeros((n_fn, slots * hidden));
                let mut functions = Vec::with_capacity(n_fn);
                let mut offset = 0;
                for (fi, real) in lower.layout.blocks.iter().enumerate() {
                    let m = real.len();
                    let a = &lower.layout.adjacency[fi];
                    let mut hs = vec![pooled.slice(s![offset..offset + m, ..]).to_owned()];
                    offset += m;
                    let mut gcn = Vec::with_capacity(gb.gcn.len());
                    for w in &gb.gcn {
                        let (out, cache) = gcn_layer(hs.last().expect("input"), a, w);
                        hs.push(out);
                        gcn.push(cache);
                    }
                    let h = hs.last().expect("output");
                    let (scores, scorer) = node_scores(h, &gb.scorer_hidden, &gb.scorer_out);
                    let mask = vec![true; m];
                    let alpha = masked_softmax(&scores, &mask, cfg.temperature);
                    let selected = select_topk(&alpha, &mask, slots.min(m));
                    for (slot, &i) in selected.iter().enumerate() {
                        flats
                            .slice_mut(s![fi, slot * hidden..(slot + 1) * hidden])
                            .assign(&(&h.row(i) * alpha[i]));
                    }
                    functions.push(GraphFnCache {
                        hs,
                        gcn,
                        scorer,
                        alpha,
                        selected,
                    });
                }
                (gb.block_proj.forward(&flats), BodyCache::Graph { flats, functions })
            }
        };

        let mask = vec![true; funcs.nrows()];
        let (attended, attn) = function_attention(&funcs, &mask, &p.attention);
        let (prog, mean) = aggregate_program(&attended, &mask, &p.prog_proj);
        let (logit, ffn) = ffn_logit(&prog, &p.ffn);
        Upper {
            posts,
            body,
            attn,
            mean,
            ffn,
            logit,
        }
    }

    /// Backward from the logit to the normalized convolution outputs;
    /// returns dL/dẑ per branch.
    fn upper_backward(&self, lower: &Lower, up: &Upper, d_logit: f64, g: &mut ModelParams) -> Vec<Array2<f64>> {
        let p = &self.params;
        let mask = vec![true; up.attn.x.nrows()];
        let d_prog = ffn_backward(&p.ffn, &up.ffn, d_logit, &mut g.ffn);
        let d_att = aggregate_program_backward(&up.mean, &mask, &p.prog_proj, &d_prog, &mut g.prog_proj);
        let d_funcs = function_attention_backward(&p.attention, &up.attn, &d_att, &mut g.attention);

        let d_pooled: Vec<Array2<f64>> = match (&p.body, &mut g.body, &up.body) {
            (Body::Sequential(pb), Body::Sequential(gb), BodyCache::Seq { concat }) => {
                let d_concat = pb.func_proj.backward(concat, &d_funcs, &mut gb.func_proj);
                let mut off = 0;
                pb.branches
                    .iter()
                    .map(|b| {
                        let f = b.filters();
                        let d = d_concat.slice(s![.., off..off + f]).to_owned();
                        off += f;
                        d
                    })
                    .collect()
            }
            (Body::Graph(pb), Body::Graph(gb), BodyCache::Graph { flats, functions }) => {
                let hidden = self.config.gcn_hidden;
                let d_flats = pb.block_proj.backward(flats, &d_funcs, &mut gb.block_proj);
                let mut d_pooled = Array2::zeros(up.posts[0].pooled.dim());
                let mut offset = 0;
                for (fi, c) in functions.iter().enumerate() {
                    let h = c.hs.last().expect("output");
                    let m = h.nrows();
                    let mut d_h = Array2::zeros(h.dim());
                    let mut d_alpha = Array1::zeros(m);
                    for (slot, &i) in c.selected.iter().enumerate() {
                        let ds = d_flats.slice(s![fi, slot * hidden..(slot + 1) * hidden]);
                        d_h.row_mut(i).scaled_add(c.alpha[i], &ds);
                        d_alpha[i] += h.row(i).dot(&ds);
                    }
                    let d_scores = masked_softmax_backward(&c.alpha, &d_alpha, self.config.temperature);
                    d_h += &node_scores_backward(
                        h,
                        &pb.scorer_hidden,
                        &pb.scorer_out,
                        &c.scorer,
                        &d_scores,
                        &mut gb.scorer_hidden,
                        &mut gb.scorer_out,
                    );
                    let a = &lower.layout.adjacency[fi];
                    let mut d = d_h;
                    for l in (0..pb.gcn.len()).rev() {
                        d = gcn_layer_backward(a, &pb.gcn[l], &c.gcn[l], d, &mut gb.gcn[l]);
                    }
                    d_pooled.slice_mut(s![offset..offset + m, ..]).assign(&d);
                    offset += m;
                }
                vec![d_pooled]
            }
            _ => unreachable!("parameters, gradients and caches share one architecture"),
        };

        p.branches()
            .into_iter()
            .zip(g.branches_mut())
            .zip(&up.posts)
            .zip(&lower.acts)
            .zip(&d_pooled)
            .map(|((((b, gb), post), act), dp)| b.post_backward(post, act.lout, dp, gb))
            .collect()
    }

    fn lower_backward(
        &self,
        lower: &Lower,
        up: &Upper,
        d_zhat: &[Array2<f64>],
        stats: &[BnStats],
        sums: Option<&[(Array1<f64>, Array1<f64>)]>,
        g: &mut ModelParams,
    ) {
        let units = &lower.layout.units;
        for (bi, b) in self.params.branches().into_iter().enumerate() {
            let act = ConvActivations {
                patches: conv_patches(&self.params.embedding, units, b.kernel),
                pre_bn: Array2::zeros((0, 0)),
                lout: lower.acts[bi].lout,
            };
            let d_patches = {
                let gb = &mut g.branches_mut()[bi];
                b.pre_backward(
                    &act,
                    &up.posts[bi],
                    &d_zhat[bi],
                    &stats[bi],
                    sums.map(|s| (&s[bi].0, &s[bi].1)),
                    self.config.bn_eps,
                    gb,
                )
            };
            conv_patches_backward(units, b.kernel, &d_patches, &mut g.embedding);
        }
    }

    fn running_stats(&self) -> Vec<BnStats> {
        self.params.branches().into_iter().map(BnStats::running).collect()
    }

    fn stats_for(&self, lowers: &[Lower], mode: BnMode) -> Vec<BnStats> {
        match mode {
            BnMode::Running => self.running_stats(),
            BnMode::Batch => (0..self.params.branches().len())
                .map(|b| BnStats::from_batch(lowers.iter().map(|l| &l.acts[b].pre_bn)))
                .collect(),
        }
    }

    fn dropout_rng(seed: Option<u64>, index: usize) -> Option<ChaCha8Rng> {
        seed.map(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            r.set_stream(index as u64);
            r
        })
    }

    /// Inference-mode prediction for one program.
    pub fn predict(&self, x: &ProgramTensor) -> Result<Prediction, ModelError> {
        let lower = self.lower(x, false)?;
        let up = self.upper_forward(&lower, &self.running_stats(), None);
        let block_weights = match &up.body {
            BodyCache::Seq { .. } => Vec::new(),
            BodyCache::Graph { functions, .. } => functions
                .iter()
                .zip(&lower.layout.blocks)
                .map(|(c, real)| real.iter().copied().zip(c.alpha.iter().copied()).collect())
                .collect(),
        };
        Ok(Prediction {
            logit: up.logit,
            probability: sigmoid(up.logit),
            functions: lower.layout.functions,
            attention: up.attn.scores().rows().into_iter().map(|r| r.to_vec()).collect(),
            block_weights,
        })
    }

    pub fn predict_batch(&self, xs: &[ProgramTensor], exec: Execution) -> Result<Vec<Prediction>, ModelError> {
        exec.map(xs, |_, x| self.predict(x)).into_iter().collect()
    }

    /// Mean loss of a batch without computing gradients.
    pub fn batch_loss(&self, batch: &[&ProgramTensor], labels: &[f64], opts: &GradOptions) -> Result<f64, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let lowers = batch
            .iter()
            .map(|x| self.lower(x, false))
            .collect::<Result<Vec<_>, _>>()?;
        let stats = self.stats_for(&lowers, opts.batch_norm);
        let total: f64 = lowers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let up = self.upper_forward(l, &stats, Self::dropout_rng(opts.dropout_seed, i));
                bce_with_logit(up.logit, labels[i])
            })
            .sum();
        Ok(total / batch.len() as f64)
    }

    /// Mean BCE loss of the batch and its gradient with respect to every
    /// parameter. Does not modify the model.
    pub fn batch_gradient(
        &self,
        batch: &[&ProgramTensor],
        labels: &[f64],
        opts: &GradOptions,
        exec: Execution,
    ) -> Result<BatchGradient, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        if batch.len() != labels.len() {
            return Err(ModelError::Shape(format!("{} samples but {} labels", batch.len(), labels.len())));
        }
        let lowers = exec
            .map(batch, |_, x| self.lower(x, false))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let stats = self.stats_for(&lowers, opts.batch_norm);
        let n = batch.len() as f64;

        let stage2 = exec.map(&lowers, |i, lower| {
            let up = self.upper_forward(lower, &stats, Self::dropout_rng(opts.dropout_seed, i));
            let loss = bce_with_logit(up.logit, labels[i]);
            let d_logit = (sigmoid(up.logit) - labels[i]) / n;
            let mut g = self.params.zeros_like();
            let d_zhat = self.upper_backward(lower, &up, d_logit, &mut g);
            (up, d_zhat, g, loss)
        });

        let sums: Option<Vec<(Array1<f64>, Array1<f64>)>> = match opts.batch_norm {
            BnMode::Running => None,
            BnMode::Batch => Some(
                (0..stats.len())
                    .map(|b| {
                        let f = stats[b].mean.len();
                        let mut sg = Array1::zeros(f);
                        let mut sgz = Array1::zeros(f);
                        for (up, d_zhat, _, _) in &stage2 {
                            sg += &d_zhat[b].sum_axis(Axis(0));
                            sgz += &(&d_zhat[b] * &up.posts[b].zhat).sum_axis(Axis(0));
                        }
                        (sg, sgz)
                    })
                    .collect(),
            ),
        };

        let mut loss = 0.0;
        let mut logits = Vec::with_capacity(batch.len());
        let work: Vec<_> = stage2
            .into_iter()
            .zip(lowers)
            .map(|((up, d_zhat, g, l), lower)| {
                loss += l;
                logits.push(up.logit);
                (lower, up, d_zhat, g)
            })
            .collect();
        let grads = exec.map_owned(work, |_, (lower, up, d_zhat, mut g)| {
            self.lower_backward(&lower, &up, &d_zhat, &stats, sums.as_deref(), &mut g);
            g
        });

        let mut iter = grads.into_iter();
        let mut total = iter.next().expect("non-empty batch");
        for g in iter {
            total.add_scaled(&g, 1.0);
        }
        Ok(BatchGradient {
            loss: loss / n,
            grads: total,
            logits,
            batch_stats: matches!(opts.batch_norm, BnMode::Batch).then_some(stats),
        })
    }

    /// Exponential moving average of the batch statistics; the running
    /// variance uses the unbiased estimate.
    pub fn update_running_stats(&mut self, stats: &[BnStats]) {
        let m = self.config.bn_momentum;
        for (b, st) in self.params.branches_mut().into_iter().zip(stats) {
            let n = st.count as f64;
            let correction = if st.count > 1 { n / (n - 1.0) } else { 1.0 };
            b.running_mean = &b.running_mean * (1.0 - m) + &st.mean * m;
            b.running_var = &b.running_var * (1.0 - m) + &st.var * (m * correction);
        }
    }
}
