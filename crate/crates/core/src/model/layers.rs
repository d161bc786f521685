//! Forward and backward passes of the individual layers.
//!
//! Matrices are row-major with one item (instruction position, block,
//! function) per row. Every `*_backward` accumulates parameter gradients
//! into the supplied gradient struct and returns the gradient with respect
//! to its input.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::params::{Attention, ConvBranch, Linear};
use super::ModelError;

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Zero the gradient wherever the pre-activation was not positive.
pub fn relu_backward(pre: &Array2<f64>, mut d: Array2<f64>) -> Array2<f64> {
    Zip::from(&mut d).and(pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0
        }
    });
    d
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against `label`, evaluated stably.
pub fn bce_with_logit(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

impl Linear {
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.weight += &x.t().dot(dy);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight.t())
    }
}

// ---------------------------------------------------------------- embedding

/// Row `i` of the result is the embedding of `ids[i]`.
pub fn embed(table: &Array2<f64>, ids: &[u32]) -> Result<Array2<f64>, ModelError> {
    let vocab = table.nrows();
    let mut out = Array2::zeros((ids.len(), table.ncols()));
    for (mut row, &id) in out.rows_mut().into_iter().zip(ids) {
        if id as usize >= vocab {
            return Err(ModelError::IdOutOfRange { id, vocab });
        }
        row.assign(&table.row(id as usize));
    }
    Ok(out)
}

pub fn embed_backward(ids: &[u32], d_out: &Array2<f64>, d_table: &mut Array2<f64>) {
    for (row, &id) in d_out.rows().into_iter().zip(ids) {
        let mut dst = d_table.row_mut(id as usize);
        dst += &row;
    }
}

// ---------------------------------------------------------------- convolution

/// Output positions of a valid convolution; sequences shorter than the
/// kernel are zero-padded on the right to exactly one window.
pub fn conv_out_len(len: usize, kernel: usize) -> usize {
    len.max(kernel) - kernel + 1
}

/// im2col over equal-length token sequences: row `u * L' + t` holds the
/// embeddings of `ids[t..t + k]` of unit `u`, concatenated.
pub fn conv_patches(table: &Array2<f64>, units: &[Vec<u32>], kernel: usize) -> Array2<f64> {
    let d = table.ncols();
    let len = units.first().map_or(0, Vec::len);
    let lout = conv_out_len(len, kernel);
    let mut p = Array2::zeros((units.len() * lout, kernel * d));
    for (u, ids) in units.iter().enumerate() {
        for t in 0..lout {
            let mut row = p.row_mut(u * lout + t);
            for j in 0..kernel {
                if let Some(&id) = ids.get(t + j) {
                    row.slice_mut(s![j * d..(j + 1) * d])
                        .assign(&table.row(id as usize));
                }
            }
        }
    }
    p
}

/// Scatter patch gradients back onto the embedding table.
pub fn conv_patches_backward(
    units: &[Vec<u32>],
    kernel: usize,
    d_patches: &Array2<f64>,
    d_table: &mut Array2<f64>,
) {
    let d = d_table.ncols();
    let len = units.first().map_or(0, Vec::len);
    let lout = conv_out_len(len, kernel);
    for (u, ids) in units.iter().enumerate() {
        for t in 0..lout {
            let row = d_patches.row(u * lout + t);
            for j in 0..kernel {
                if let Some(&id) = ids.get(t + j) {
                    let mut dst = d_table.row_mut(id as usize);
                    dst += &row.slice(s![j * d..(j + 1) * d]);
                }
            }
        }
    }
}

/// Per-filter normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
    /// Rows the statistics were computed over (0 for running statistics).
    pub count: usize,
}

impl BnStats {
    pub fn running(branch: &ConvBranch) -> Self {
        Self {
            mean: branch.running_mean.clone(),
            var: branch.running_var.clone(),
            count: 0,
        }
    }

    /// Biased mean/variance over the rows of all `blocks`.
    pub fn from_batch<'a>(blocks: impl IntoIterator<Item = &'a Array2<f64>> + Clone) -> Self {
        let mut count = 0usize;
        let mut sum: Option<Array1<f64>> = None;
        for z in blocks.clone() {
            count += z.nrows();
            let s = z.sum_axis(Axis(0));
            sum = Some(match sum {
                Some(acc) => acc + s,
                None => s,
            });
        }
        let mean = sum.expect("at least one block") / count.max(1) as f64;
        let mut var = Array1::zeros(mean.len());
        for z in blocks {
            for row in z.rows() {
                Zip::from(&mut var).and(&row).and(&mean).for_each(|v, &x, &m| *v += (x - m) * (x - m));
            }
        }
        var /= count.max(1) as f64;
        Self { mean, var, count }
    }

    pub fn inv_std(&self, eps: f64) -> Array1<f64> {
        self.var.mapv(|v| 1.0 / (v + eps).sqrt())
    }
}

/// Activations of one convolution branch over a set of units.
#[derive(Debug, Clone)]
pub struct ConvActivations {
    pub patches: Array2<f64>,
    pub pre_bn: Array2<f64>,
    pub lout: usize,
}

#[derive(Debug, Clone)]
pub struct ConvPost {
    pub zhat: Array2<f64>,
    /// `gamma * zhat + beta`, before the ReLU.
    pub y: Array2<f64>,
    /// Inverted-dropout multipliers (0 or 1/(1-p)).
    pub keep: Option<Array2<f64>>,
    /// One pooled vector per unit.
    pub pooled: Array2<f64>,
}

impl ConvBranch {
    pub fn pre_activation(&self, patches: Array2<f64>, lout: usize) -> ConvActivations {
        let pre_bn = patches.dot(&self.weight) + &self.bias;
        ConvActivations {
            patches,
            pre_bn,
            lout,
        }
    }

    /// Batch norm, ReLU, optional dropout, then mean pooling per unit.
    pub fn post(
        &self,
        act: &ConvActivations,
        stats: &BnStats,
        eps: f64,
        dropout: Option<(f64, &mut rand_chacha::ChaCha8Rng)>,
    ) -> ConvPost {
        let inv = stats.inv_std(eps);
        let zhat = (&act.pre_bn - &stats.mean) * &inv;
        let y = &zhat * &self.gamma + &self.beta;
        let mut r = relu(&y);
        let keep = dropout.map(|(p, rng)| {
            let scale = 1.0 / (1.0 - p);
            let keep = Array2::from_shape_fn(r.dim(), |_| if rng.gen::<f64>() < p { 0.0 } else { scale });
            r *= &keep;
            keep
        });
        let units = r.nrows() / act.lout;
        let pooled = r
            .into_shape((units, act.lout, self.filters()))
            .expect("contiguous activations")
            .mean_axis(Axis(1))
            .expect("lout >= 1");
        ConvPost {
            zhat,
            y,
            keep,
            pooled,
        }
    }

    /// Back through pooling, dropout, ReLU and the affine part of batch
    /// norm. Returns the gradient with respect to `zhat`.
    pub fn post_backward(
        &self,
        post: &ConvPost,
        lout: usize,
        d_pooled: &Array2<f64>,
        grad: &mut ConvBranch,
    ) -> Array2<f64> {
        let f = self.filters();
        let rows = post.y.nrows();
        let mut dy = Array2::zeros((rows, f));
        for (r, mut row) in dy.rows_mut().into_iter().enumerate() {
            row.assign(&d_pooled.row(r / lout));
        }
        dy /= lout as f64;
        if let Some(keep) = &post.keep {
            dy *= keep;
        }
        let dy = relu_backward(&post.y, dy);
        grad.gamma += &(&dy * &post.zhat).sum_axis(Axis(0));
        grad.beta += &dy.sum_axis(Axis(0));
        dy * &self.gamma
    }

    /// Through the normalization into the convolution and the embedding.
    /// `batch_sums` carries `(sum g, sum g * zhat)` over every row that shared
    /// the batch statistics; `None` means the statistics were constants.
    #[allow(clippy::too_many_arguments)]
    pub fn pre_backward(
        &self,
        act: &ConvActivations,
        post: &ConvPost,
        d_zhat: &Array2<f64>,
        stats: &BnStats,
        batch_sums: Option<(&Array1<f64>, &Array1<f64>)>,
        eps: f64,
        grad: &mut ConvBranch,
    ) -> Array2<f64> {
        let inv = stats.inv_std(eps);
        let mut dz = d_zhat.clone();
        if let Some((sum_g, sum_gz)) = batch_sums {
            let n = stats.count as f64;
            dz = dz - &(sum_g / n) - &(&post.zhat * &(sum_gz / n));
        }
        dz *= &inv;
        grad.weight += &act.patches.t().dot(&dz);
        grad.bias += &dz.sum_axis(Axis(0));
        dz.dot(&self.weight.t())
    }
}

/// Convolution block over one embedded sequence with fixed (running)
/// statistics and no dropout: conv, batch norm, ReLU, global average pool.
pub fn conv_block(x: &Array2<f64>, branch: &ConvBranch, eps: f64) -> Array1<f64> {
    let d = x.ncols();
    let k = branch.kernel;
    let lout = conv_out_len(x.nrows(), k);
    let mut p = Array2::zeros((lout, k * d));
    for t in 0..lout {
        for j in 0..k {
            if t + j < x.nrows() {
                p.slice_mut(s![t, j * d..(j + 1) * d]).assign(&x.row(t + j));
            }
        }
    }
    let act = branch.pre_activation(p, lout);
    let post = branch.post(&act, &BnStats::running(branch), eps, None);
    post.pooled.row(0).to_owned()
}

// ---------------------------------------------------------------- GCN

/// `D^-1/2 (A_sym + I) D^-1/2` with `A_sym = max(A, A^T)`.
pub fn normalized_adjacency(a: ArrayView2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut at = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            at[[i, j]] = a[[i, j]].max(a[[j, i]]);
        }
        at[[i, i]] += 1.0;
    }
    let deg: Array1<f64> = at.sum_axis(Axis(1));
    for i in 0..n {
        for j in 0..n {
            at[[i, j]] /= (deg[i] * deg[j]).sqrt();
        }
    }
    at
}

pub struct GcnCache {
    /// `A_norm @ H`
    pub propagated: Array2<f64>,
    pub pre: Array2<f64>,
}

/// `ReLU(A_norm H W)`.
pub fn gcn_layer(h: &Array2<f64>, a_norm: &Array2<f64>, w: &Array2<f64>) -> (Array2<f64>, GcnCache) {
    let propagated = a_norm.dot(h);
    let pre = propagated.dot(w);
    (relu(&pre), GcnCache { propagated, pre })
}

pub fn gcn_layer_backward(
    a_norm: &Array2<f64>,
    w: &Array2<f64>,
    cache: &GcnCache,
    d_out: Array2<f64>,
    d_w: &mut Array2<f64>,
) -> Array2<f64> {
    let d_pre = relu_backward(&cache.pre, d_out);
    *d_w += &cache.propagated.t().dot(&d_pre);
    // A_norm is symmetric
    a_norm.dot(&d_pre.dot(&w.t()))
}

// ---------------------------------------------------------------- top-K pooling

/// `softmax(scores / t)` over the unmasked entries; masked entries get 0.
pub fn masked_softmax(scores: &Array1<f64>, mask: &[bool], t: f64) -> Array1<f64> {
    let max = scores
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(s, _)| *s / t)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = Array1::zeros(scores.len());
    if max == f64::NEG_INFINITY {
        return out;
    }
    let mut total = 0.0;
    for (i, (&s, &m)) in scores.iter().zip(mask).enumerate() {
        if m {
            out[i] = (s / t - max).exp();
            total += out[i];
        }
    }
    out / total
}

pub fn masked_softmax_backward(alpha: &Array1<f64>, d_alpha: &Array1<f64>, t: f64) -> Array1<f64> {
    let dot = alpha.dot(d_alpha);
    alpha * &(d_alpha - dot) / t
}

/// Indices of the `slots` highest-α nodes, unmasked before masked, ties
/// broken by lowest index. Returns `min(slots, m)` indices.
pub fn select_topk(alpha: &Array1<f64>, mask: &[bool], slots: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..alpha.len()).collect();
    idx.sort_by(|&a, &b| {
        mask[b]
            .cmp(&mask[a])
            .then(alpha[b].partial_cmp(&alpha[a]).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.cmp(&b))
    });
    idx.truncate(slots);
    idx
}

pub struct ScorerCache {
    pub hidden_pre: Array2<f64>,
    pub hidden: Array2<f64>,
}

/// One score per node from a single-hidden-layer feed-forward scorer.
pub fn node_scores(h: &Array2<f64>, hidden: &Linear, out: &Linear) -> (Array1<f64>, ScorerCache) {
    let hidden_pre = hidden.forward(h);
    let act = relu(&hidden_pre);
    let s = out.forward(&act).column(0).to_owned();
    (
        s,
        ScorerCache {
            hidden_pre,
            hidden: act,
        },
    )
}

pub fn node_scores_backward(
    h: &Array2<f64>,
    hidden: &Linear,
    out: &Linear,
    cache: &ScorerCache,
    d_scores: &Array1<f64>,
    g_hidden: &mut Linear,
    g_out: &mut Linear,
) -> Array2<f64> {
    let ds = d_scores.view().insert_axis(Axis(1)).to_owned();
    let d_act = out.backward(&cache.hidden, &ds, g_out);
    let d_pre = relu_backward(&cache.hidden_pre, d_act);
    hidden.backward(h, &d_pre, g_hidden)
}

#[derive(Debug, Clone)]
pub struct TopKOutput {
    /// Selected rows of `H`, each scaled by its α, in slot order.
    pub pooled: Array2<f64>,
    pub alpha: Array1<f64>,
    pub selected: Vec<usize>,
    pub scores: Array1<f64>,
}

/// Scores every node, normalizes with a temperature softmax over unmasked
/// nodes and keeps the `max(1, ceil(ratio * m))` best, scaled by α.
pub fn topk_pool(
    h: &Array2<f64>,
    mask: &[bool],
    hidden: &Linear,
    out: &Linear,
    ratio: f64,
    t: f64,
) -> TopKOutput {
    let (scores, _) = node_scores(h, hidden, out);
    let alpha = masked_softmax(&scores, mask, t);
    let selected = select_topk(&alpha, mask, super::config::topk_count(h.nrows(), ratio));
    let mut pooled = Array2::zeros((selected.len(), h.ncols()));
    for (slot, &i) in selected.iter().enumerate() {
        pooled.row_mut(slot).assign(&(&h.row(i) * alpha[i]));
    }
    TopKOutput {
        pooled,
        alpha,
        selected,
        scores,
    }
}

// ---------------------------------------------------------------- attention

pub struct AttentionCache {
    pub x: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Per-head row-stochastic score matrices.
    pub probs: Vec<Array2<f64>>,
    pub concat: Array2<f64>,
}

impl AttentionCache {
    /// Head-averaged score matrix.
    pub fn scores(&self) -> Array2<f64> {
        let mut s = self.probs[0].clone();
        for p in &self.probs[1..] {
            s += p;
        }
        s / self.probs.len() as f64
    }
}

/// Multi-head self-attention over function embeddings; masked functions
/// are excluded as keys.
pub fn function_attention(x: &Array2<f64>, mask: &[bool], attn: &Attention) -> (Array2<f64>, AttentionCache) {
    let n = x.nrows();
    let dm = x.ncols();
    let heads = attn.heads;
    let dh = dm / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = attn.query.forward(x);
    let k = attn.key.forward(x);
    let v = attn.value.forward(x);
    let mut concat = Array2::zeros((n, dm));
    let mut probs = Vec::with_capacity(heads);
    for hd in 0..heads {
        let cols = s![.., hd * dh..(hd + 1) * dh];
        let logits = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        let mut p = Array2::zeros((n, n));
        for i in 0..n {
            let row = masked_softmax(&logits.row(i).to_owned(), mask, 1.0);
            p.row_mut(i).assign(&row);
        }
        concat.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
        probs.push(p);
    }
    let out = attn.output.forward(&concat);
    (
        out,
        AttentionCache {
            x: x.clone(),
            q,
            k,
            v,
            probs,
            concat,
        },
    )
}

pub fn function_attention_backward(
    attn: &Attention,
    cache: &AttentionCache,
    d_out: &Array2<f64>,
    grad: &mut Attention,
) -> Array2<f64> {
    let n = cache.x.nrows();
    let dm = cache.x.ncols();
    let heads = attn.heads;
    let dh = dm / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let d_concat = attn.output.backward(&cache.concat, d_out, &mut grad.output);
    let mut dq = Array2::zeros((n, dm));
    let mut dk = Array2::zeros((n, dm));
    let mut dv = Array2::zeros((n, dm));
    for (hd, p) in cache.probs.iter().enumerate() {
        let cols = s![.., hd * dh..(hd + 1) * dh];
        let d_head = d_concat.slice(cols);
        dv.slice_mut(cols).assign(&p.t().dot(&d_head));
        let dp = d_head.dot(&cache.v.slice(cols).t());
        let mut dlogits = Array2::zeros((n, n));
        for i in 0..n {
            let pr = p.row(i);
            let dot = pr.dot(&dp.row(i));
            dlogits.row_mut(i).assign(&(&pr * &(&dp.row(i) - dot)));
        }
        dlogits *= scale;
        dq.slice_mut(cols).assign(&dlogits.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&dlogits.t().dot(&cache.q.slice(cols)));
    }
    let mut dx = attn.query.backward(&cache.x, &dq, &mut grad.query);
    dx += &attn.key.backward(&cache.x, &dk, &mut grad.key);
    dx += &attn.value.backward(&cache.x, &dv, &mut grad.value);
    dx
}

// ---------------------------------------------------------------- program head

/// Mean over unmasked rows, projected to the program embedding.
pub fn aggregate_program(x: &Array2<f64>, mask: &[bool], proj: &Linear) -> (Array1<f64>, Array1<f64>) {
    let mut mean = Array1::zeros(x.ncols());
    let count = mask.iter().filter(|&&m| m).count().max(1) as f64;
    for (row, &m) in x.rows().into_iter().zip(mask) {
        if m {
            mean += &row;
        }
    }
    mean /= count;
    let prog = proj.forward(&mean.view().insert_axis(Axis(0)).to_owned()).row(0).to_owned();
    (prog, mean)
}

pub fn aggregate_program_backward(
    mean: &Array1<f64>,
    mask: &[bool],
    proj: &Linear,
    d_prog: &Array1<f64>,
    grad: &mut Linear,
) -> Array2<f64> {
    let dm = proj.backward(
        &mean.view().insert_axis(Axis(0)).to_owned(),
        &d_prog.view().insert_axis(Axis(0)).to_owned(),
        grad,
    );
    let count = mask.iter().filter(|&&m| m).count().max(1) as f64;
    let mut dx = Array2::zeros((mask.len(), mean.len()));
    for (mut row, &m) in dx.rows_mut().into_iter().zip(mask) {
        if m {
            row.assign(&(&dm.row(0) / count));
        }
    }
    dx
}

pub struct FfnCache {
    pub inputs: Vec<Array2<f64>>,
    pub pres: Vec<Array2<f64>>,
}

/// Hidden layers with ReLU, then a single logit.
pub fn ffn_logit(x: &Array1<f64>, layers: &[Linear]) -> (f64, FfnCache) {
    let mut h = x.view().insert_axis(Axis(0)).to_owned();
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pres = Vec::with_capacity(layers.len());
    for (i, l) in layers.iter().enumerate() {
        let pre = l.forward(&h);
        inputs.push(h);
        h = if i + 1 < layers.len() { relu(&pre) } else { pre.clone() };
        pres.push(pre);
    }
    (h[[0, 0]], FfnCache { inputs, pres })
}

pub fn classify(x_prog: &Array1<f64>, layers: &[Linear]) -> f64 {
    sigmoid(ffn_logit(x_prog, layers).0)
}

pub fn ffn_backward(layers: &[Linear], cache: &FfnCache, d_logit: f64, grads: &mut [Linear]) -> Array1<f64> {
    let mut d = Array2::from_elem((1, 1), d_logit);
    for i in (0..layers.len()).rev() {
        if i + 1 < layers.len() {
            d = relu_backward(&cache.pres[i], d);
        }
        d = layers[i].backward(&cache.inputs[i], &d, &mut grads[i]);
    }
    d.row(0).to_owned()
}
