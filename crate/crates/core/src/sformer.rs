//! The simplex transformer.
//!
//! A layer updates the features of `n`-simplices from their neighbors and the
//! `(n+1)`-cofaces they share. For a message from `τ` to `σ` through coface
//! `c`:
//!
//! ```text
//! q = h_σ Q,  k = h_τ K,  v = h_τ V,  k' = h_c K',  v' = h_c V'
//! α = [q, q] ∘ KeyMlp([k, k']) / sqrt(2H)
//! m = sigmoid(BN(α)) ∘ ValueMlp([v, v'])
//! agg_σ = Σ SiLU(LayerNorm(Linear(m)))
//! h'_σ = h_σ + SiLU(BN(Linear(agg_σ)))
//! ```
//!
//! The network embeds raw features, runs five node layers (vertices from
//! edges), then two edge-node layers (edges from triangles, then vertices from
//! the refreshed edges), pools `[mean vertex, mean edge]` per graph and maps
//! that through a two-hidden-layer head.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::featurize::{Embedding, RawFeatures, EDGE_DIM, HIDDEN_DIM, TRIANGLE_DIM, VERTEX_DIM};
use crate::qcomplex::QuotientComplex;
use crate::tape::{BatchStats, LossKind, NodeId, Tape};

pub const NODE_LAYERS: usize = 5;
pub const EDGE_NODE_LAYERS: usize = 2;
pub const BN_MOMENTUM: f64 = 0.1;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"QCNETCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch norms use batch statistics.
    Train,
    /// Batch norms use stored running statistics.
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub head_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: HIDDEN_DIM, head_hidden: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SformerError {
    #[error("complex has no vertices")]
    EmptyComplex,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("feature shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
}

/// Which layer of the network a call refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRef {
    Node(usize),
    EdgeNodeEdge(usize),
    EdgeNodeNode(usize),
}

#[derive(Debug, Clone, Copy)]
struct LinearIdx {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct NormIdx {
    scale: usize,
    shift: usize,
}

#[derive(Debug, Clone, Copy)]
struct LayerIdx {
    q: usize,
    k: usize,
    v: usize,
    k_coface: usize,
    v_coface: usize,
    key_mlp: LinearIdx,
    value_mlp: LinearIdx,
    att_norm: NormIdx,
    att_slot: usize,
    msg: LinearIdx,
    msg_norm: NormIdx,
    update: LinearIdx,
    update_norm: NormIdx,
    update_slot: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    embed: [LinearIdx; 3],
    node: Vec<LayerIdx>,
    edge_node: Vec<(LayerIdx, LayerIdx)>,
    head: [LinearIdx; 3],
}

/// Running batch-norm statistics for one normalization site.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    /// One tensor per parameter, in declared order.
    pub params: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct SformerModel {
    config: ModelConfig,
    names: Vec<String>,
    params: Vec<Array2<f64>>,
    running: Vec<RunningStats>,
    layout: Layout,
    mode: Mode,
}

struct Builder<'r> {
    rng: &'r mut ChaCha8Rng,
    names: Vec<String>,
    params: Vec<Array2<f64>>,
    running: Vec<RunningStats>,
}

impl Builder<'_> {
    fn push(&mut self, name: String, value: Array2<f64>) -> usize {
        self.names.push(name);
        self.params.push(value);
        self.params.len() - 1
    }

    fn uniform(&mut self, shape: (usize, usize), fan_in: usize) -> Array2<f64> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Array2::from_shape_simple_fn(shape, || self.rng.random_range(-bound..bound))
    }

    fn matrix(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let w = self.uniform((rows, cols), rows);
        self.push(name, w)
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> LinearIdx {
        let w = self.matrix(format!("{prefix}.weight"), fan_in, fan_out);
        let bias = self.uniform((1, fan_out), fan_in);
        let b = self.push(format!("{prefix}.bias"), bias);
        LinearIdx { w, b }
    }

    fn norm(&mut self, prefix: &str, width: usize) -> NormIdx {
        let scale = self.push(format!("{prefix}.scale"), Array2::ones((1, width)));
        let shift = self.push(format!("{prefix}.shift"), Array2::zeros((1, width)));
        NormIdx { scale, shift }
    }

    fn slot(&mut self, width: usize) -> usize {
        self.running.push(RunningStats { mean: Array1::zeros(width), var: Array1::ones(width) });
        self.running.len() - 1
    }

    fn layer(&mut self, prefix: &str, h: usize) -> LayerIdx {
        let q = self.matrix(format!("{prefix}.q"), h, h);
        let k = self.matrix(format!("{prefix}.k"), h, h);
        let v = self.matrix(format!("{prefix}.v"), h, h);
        let k_coface = self.matrix(format!("{prefix}.k_coface"), h, h);
        let v_coface = self.matrix(format!("{prefix}.v_coface"), h, h);
        let key_mlp = self.linear(&format!("{prefix}.key_mlp"), 2 * h, 2 * h);
        let value_mlp = self.linear(&format!("{prefix}.value_mlp"), 2 * h, 2 * h);
        let att_norm = self.norm(&format!("{prefix}.att_norm"), 2 * h);
        let att_slot = self.slot(2 * h);
        let msg = self.linear(&format!("{prefix}.msg"), 2 * h, h);
        let msg_norm = self.norm(&format!("{prefix}.msg_norm"), h);
        let update = self.linear(&format!("{prefix}.update"), h, h);
        let update_norm = self.norm(&format!("{prefix}.update_norm"), h);
        let update_slot = self.slot(h);
        LayerIdx {
            q,
            k,
            v,
            k_coface,
            v_coface,
            key_mlp,
            value_mlp,
            att_norm,
            att_slot,
            msg,
            msg_norm,
            update,
            update_norm,
            update_slot,
        }
    }
}

/// Index lists describing one family of messages `τ → σ` through cofaces.
#[derive(Debug, Clone)]
pub struct MessagePairs {
    pub sigma: Arc<[usize]>,
    pub tau: Arc<[usize]>,
    pub coface: Arc<[usize]>,
}

impl MessagePairs {
    pub fn new(triples: &[(usize, usize, usize)]) -> Self {
        Self {
            sigma: triples.iter().map(|t| t.0).collect(),
            tau: triples.iter().map(|t| t.1).collect(),
            coface: triples.iter().map(|t| t.2).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

/// Several complexes merged into one disjoint union.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub n_graphs: usize,
    pub x0: Array2<f64>,
    pub x1: Array2<f64>,
    pub x2: Array2<f64>,
    vertex_graph: Arc<[usize]>,
    edge_graph: Arc<[usize]>,
    node_pairs: MessagePairs,
    edge_pairs: MessagePairs,
}

fn stack(blocks: &[&Array2<f64>], cols: usize) -> Array2<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Array2::zeros((rows, cols));
    let mut r = 0;
    for b in blocks {
        out.slice_mut(ndarray::s![r..r + b.nrows(), ..]).assign(*b);
        r += b.nrows();
    }
    out
}

impl GraphBatch {
    pub fn new(items: &[(&QuotientComplex, &RawFeatures)]) -> Result<Self, SformerError> {
        if items.is_empty() {
            return Err(SformerError::EmptyBatch);
        }
        let mut vertex_graph = Vec::new();
        let mut edge_graph = Vec::new();
        let mut node = Vec::new();
        let mut edge = Vec::new();
        let (mut v_off, mut e_off, mut t_off) = (0, 0, 0);
        for (g, (c, raw)) in items.iter().enumerate() {
            let (n, m, t) = (c.num_vertices(), c.num_edges(), c.num_triangles());
            if n == 0 {
                return Err(SformerError::EmptyComplex);
            }
            let dims = [
                (raw.h0.dim(), (n, VERTEX_DIM), "vertex"),
                (raw.h1.dim(), (m, EDGE_DIM), "edge"),
                (raw.h2.dim(), (t, TRIANGLE_DIM), "triangle"),
            ];
            for (got, want, tier) in dims {
                if got != want {
                    return Err(SformerError::ShapeMismatch(format!(
                        "{tier} features are {}x{}, complex needs {}x{}",
                        got.0, got.1, want.0, want.1
                    )));
                }
            }
            vertex_graph.extend(std::iter::repeat_n(g, n));
            edge_graph.extend(std::iter::repeat_n(g, m));
            for (i, e) in c.graph.edges.iter().enumerate() {
                node.push((v_off + e.dst, v_off + e.src, e_off + i));
            }
            for (i, nbrs) in c.edge_neighbors.iter().enumerate() {
                for &(j, tri) in nbrs {
                    edge.push((e_off + i, e_off + j, t_off + tri));
                }
            }
            v_off += n;
            e_off += m;
            t_off += t;
        }
        let x0 = stack(&items.iter().map(|(_, r)| &r.h0).collect::<Vec<_>>(), VERTEX_DIM);
        let x1 = stack(&items.iter().map(|(_, r)| &r.h1).collect::<Vec<_>>(), EDGE_DIM);
        let x2 = stack(&items.iter().map(|(_, r)| &r.h2).collect::<Vec<_>>(), TRIANGLE_DIM);
        Ok(Self {
            n_graphs: items.len(),
            x0,
            x1,
            x2,
            vertex_graph: vertex_graph.into(),
            edge_graph: edge_graph.into(),
            node_pairs: MessagePairs::new(&node),
            edge_pairs: MessagePairs::new(&edge),
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.x0.nrows()
    }

    pub fn num_edges(&self) -> usize {
        self.x1.nrows()
    }

    pub fn num_triangles(&self) -> usize {
        self.x2.nrows()
    }
}

impl SformerModel {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder { rng: &mut rng, names: Vec::new(), params: Vec::new(), running: Vec::new() };
        let h = config.hidden;
        let embed = [
            b.linear("embed.vertex", VERTEX_DIM, h),
            b.linear("embed.edge", EDGE_DIM, h),
            b.linear("embed.triangle", TRIANGLE_DIM, h),
        ];
        let node = (0..NODE_LAYERS).map(|i| b.layer(&format!("node.{i}"), h)).collect();
        let edge_node = (0..EDGE_NODE_LAYERS)
            .map(|i| (b.layer(&format!("edge_node.{i}.edge"), h), b.layer(&format!("edge_node.{i}.node"), h)))
            .collect();
        let hh = config.head_hidden;
        let head = [b.linear("head.0", 2 * h, hh), b.linear("head.1", hh, hh), b.linear("head.2", hh, 1)];
        let Builder { names, params, running, .. } = b;
        Self { config, names, params, running, layout: Layout { embed, node, edge_node, head }, mode: Mode::Eval }
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Array2::len).sum()
    }

    pub fn param(&self, name: &str) -> Option<&Array2<f64>> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.params[i])
    }

    pub fn running_stats(&self) -> &[RunningStats] {
        &self.running
    }

    /// Blend observed batch statistics into the running estimates.
    pub fn apply_batch_stats(&mut self, stats: &[BatchStats]) {
        for s in stats {
            let r = &mut self.running[s.slot];
            r.mean = &r.mean * (1.0 - BN_MOMENTUM) + &s.mean * BN_MOMENTUM;
            r.var = &r.var * (1.0 - BN_MOMENTUM) + &s.var * BN_MOMENTUM;
        }
    }

    /// The three input embeddings as stand-alone layers.
    pub fn embeddings(&self) -> [Embedding; 3] {
        self.layout.embed.map(|l| Embedding {
            weight: self.params[l.w].clone(),
            bias: self.params[l.b].row(0).to_owned(),
        })
    }

    fn p(&self, tape: &mut Tape, idx: usize) -> NodeId {
        tape.param(idx, &self.params[idx])
    }

    fn linear(&self, tape: &mut Tape, x: NodeId, l: LinearIdx) -> NodeId {
        let w = self.p(tape, l.w);
        let b = self.p(tape, l.b);
        tape.linear(x, w, b)
    }

    fn batch_norm(&self, tape: &mut Tape, x: NodeId, n: NormIdx, slot: usize, mode: Mode) -> NodeId {
        let g = self.p(tape, n.scale);
        let b = self.p(tape, n.shift);
        let frozen = match mode {
            Mode::Train => None,
            Mode::Eval => Some((&self.running[slot].mean, &self.running[slot].var)),
        };
        tape.batch_norm(x, g, b, slot, frozen)
    }

    /// Key or value path: a single affine map of `[x_τ, x_c]`, evaluated as
    /// `x_τ W_top + x_c W_bottom + b` so the products run per simplex rather
    /// than per message.
    fn pair_mlp(
        &self,
        tape: &mut Tape,
        self_proj: NodeId,
        coface_proj: NodeId,
        mlp: LinearIdx,
        pairs: &MessagePairs,
    ) -> NodeId {
        let h = self.config.hidden;
        let w = self.p(tape, mlp.w);
        let top = tape.row_slice(w, 0, h);
        let bottom = tape.row_slice(w, h, h);
        let a = tape.matmul(self_proj, top);
        let a = tape.gather(a, pairs.tau.clone());
        let c = tape.matmul(coface_proj, bottom);
        let c = tape.gather(c, pairs.coface.clone());
        let sum = tape.add(a, c);
        let b = self.p(tape, mlp.b);
        tape.add_row(sum, b)
    }

    fn messages(&self, tape: &mut Tape, l: &LayerIdx, h: NodeId, hc: NodeId, pairs: &MessagePairs, mode: Mode) -> NodeId {
        let width = 2 * self.config.hidden;
        let (q, k, v, kc, vc) = (
            self.p(tape, l.q),
            self.p(tape, l.k),
            self.p(tape, l.v),
            self.p(tape, l.k_coface),
            self.p(tape, l.v_coface),
        );
        let q = tape.matmul(h, q);
        let k = tape.matmul(h, k);
        let v = tape.matmul(h, v);
        let kc = tape.matmul(hc, kc);
        let vc = tape.matmul(hc, vc);

        let key = self.pair_mlp(tape, k, kc, l.key_mlp, pairs);
        let value = self.pair_mlp(tape, v, vc, l.value_mlp, pairs);
        let qq = tape.concat(q, q);
        let qq = tape.gather(qq, pairs.sigma.clone());
        let alpha = tape.mul(qq, key);
        let alpha = tape.scale(alpha, 1.0 / (width as f64).sqrt());
        let gate = self.batch_norm(tape, alpha, l.att_norm, l.att_slot, mode);
        let gate = tape.sigmoid(gate);
        tape.mul(gate, value)
    }

    fn layer(&self, tape: &mut Tape, l: &LayerIdx, h: NodeId, hc: NodeId, pairs: &MessagePairs, mode: Mode) -> NodeId {
        let rows = tape.value(h).nrows();
        let m = self.messages(tape, l, h, hc, pairs, mode);
        let m = self.linear(tape, m, l.msg);
        let (g, b) = (self.p(tape, l.msg_norm.scale), self.p(tape, l.msg_norm.shift));
        let m = tape.layer_norm(m, g, b);
        let m = tape.silu(m);
        let agg = tape.scatter_add(m, pairs.sigma.clone(), rows);
        let u = self.linear(tape, agg, l.update);
        let u = self.batch_norm(tape, u, l.update_norm, l.update_slot, mode);
        let u = tape.silu(u);
        tape.add(h, u)
    }

    fn layer_idx(&self, r: LayerRef) -> LayerIdx {
        match r {
            LayerRef::Node(i) => self.layout.node[i],
            LayerRef::EdgeNodeEdge(i) => self.layout.edge_node[i].0,
            LayerRef::EdgeNodeNode(i) => self.layout.edge_node[i].1,
        }
    }

    /// Records the full network on `tape`; returns the `G × 1` prediction node.
    pub fn trace(&self, tape: &mut Tape, batch: &GraphBatch, mode: Mode) -> NodeId {
        let mut h = [0; 3];
        for (tier, x) in [&batch.x0, &batch.x1, &batch.x2].into_iter().enumerate() {
            let x = tape.input(x.clone());
            let e = self.linear(tape, x, self.layout.embed[tier]);
            h[tier] = tape.silu(e);
        }
        let [mut h0, mut h1, h2] = h;
        for l in &self.layout.node {
            h0 = self.layer(tape, l, h0, h1, &batch.node_pairs, mode);
        }
        for (le, ln) in &self.layout.edge_node {
            h1 = self.layer(tape, le, h1, h2, &batch.edge_pairs, mode);
            h0 = self.layer(tape, ln, h0, h1, &batch.node_pairs, mode);
        }
        let pv = tape.segment_mean(h0, batch.vertex_graph.clone(), batch.n_graphs);
        let pe = tape.segment_mean(h1, batch.edge_graph.clone(), batch.n_graphs);
        let mut x = tape.concat(pv, pe);
        for (i, l) in self.layout.head.iter().enumerate() {
            x = self.linear(tape, x, *l);
            if i + 1 < self.layout.head.len() {
                x = tape.silu(x);
            }
        }
        x
    }

    /// Predictions for every graph of `batch` under the current mode.
    pub fn predict_batch(&self, batch: &GraphBatch) -> Vec<f64> {
        let mut tape = Tape::new();
        let out = self.trace(&mut tape, batch, self.mode);
        tape.value(out).column(0).to_vec()
    }

    pub fn forward(&self, complex: &QuotientComplex, raw: &RawFeatures) -> Result<f64, SformerError> {
        let batch = GraphBatch::new(&[(complex, raw)])?;
        Ok(self.predict_batch(&batch)[0])
    }

    /// Mean batch loss and its gradient with respect to every parameter,
    /// plus the batch-norm statistics observed in training mode. The model
    /// itself is not modified.
    pub fn loss_and_gradients(
        &self,
        batch: &GraphBatch,
        targets: &[f64],
        loss: LossKind,
    ) -> Result<(Gradients, Vec<BatchStats>), SformerError> {
        if targets.len() != batch.n_graphs {
            return Err(SformerError::ShapeMismatch(format!(
                "{} targets for {} graphs",
                targets.len(),
                batch.n_graphs
            )));
        }
        let mut tape = Tape::new();
        let pred = self.trace(&mut tape, batch, self.mode);
        let l = tape.loss(pred, targets.into(), loss);
        let value = tape.value(l)[[0, 0]];
        if !value.is_finite() {
            return Err(SformerError::NonFiniteLoss(value));
        }
        let mut params: Vec<Array2<f64>> = self.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        for (i, g) in tape.backward(l) {
            params[i] = g;
        }
        Ok((Gradients { loss: value, params }, std::mem::take(&mut tape.batch_stats)))
    }

    /// Messages `m_{(σ,τ)}` for explicitly given rows: message `i` uses
    /// `h_sigma[i]`, `h_tau[i]` and `h_coface[i]`.
    pub fn attention_messages(
        &self,
        layer: LayerRef,
        h_sigma: &Array2<f64>,
        h_tau: &Array2<f64>,
        h_coface: &Array2<f64>,
        mode: Mode,
    ) -> Array2<f64> {
        // Lay the rows out as 2M simplices (σs then τs) and M cofaces.
        let m = h_sigma.nrows();
        let h = ndarray::concatenate(ndarray::Axis(0), &[h_sigma.view(), h_tau.view()]).expect("widths agree");
        let triples: Vec<_> = (0..m).map(|i| (i, m + i, i)).collect();
        let pairs = MessagePairs::new(&triples);
        let mut tape = Tape::new();
        let h = tape.input(h);
        let hc = tape.input(h_coface.clone());
        let out = self.messages(&mut tape, &self.layer_idx(layer), h, hc, &pairs, mode);
        tape.value(out).clone()
    }

    /// One layer application. `pairs` holds `(σ, τ, coface)` row indices into
    /// `h` and `h_coface`.
    pub fn layer_update(
        &self,
        layer: LayerRef,
        h: &Array2<f64>,
        h_coface: &Array2<f64>,
        pairs: &[(usize, usize, usize)],
        mode: Mode,
    ) -> Array2<f64> {
        let pairs = MessagePairs::new(pairs);
        let mut tape = Tape::new();
        let hn = tape.input(h.clone());
        let hc = tape.input(h_coface.clone());
        let out = self.layer(&mut tape, &self.layer_idx(layer), hn, hc, &pairs, mode);
        tape.value(out).clone()
    }

    fn header(&self) -> CheckpointHeader {
        CheckpointHeader {
            hidden: self.config.hidden,
            head_hidden: self.config.head_hidden,
            node_layers: NODE_LAYERS,
            edge_node_layers: EDGE_NODE_LAYERS,
            vertex_dim: VERTEX_DIM,
            edge_dim: EDGE_DIM,
            triangle_dim: TRIANGLE_DIM,
        }
    }

    /// Serialize parameters and running statistics.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.num_scalars());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let put = |out: &mut Vec<u8>, x: usize| out.extend_from_slice(&(x as u32).to_le_bytes());
        put(&mut out, CHECKPOINT_VERSION as usize);
        for v in self.header().values() {
            put(&mut out, v);
        }
        put(&mut out, self.params.len());
        for p in &self.params {
            put(&mut out, p.nrows());
            put(&mut out, p.ncols());
            for x in p.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        put(&mut out, self.running.len());
        for r in &self.running {
            put(&mut out, r.mean.len());
            for x in r.mean.iter().chain(r.var.iter()) {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Decode a checkpoint. With `expected`, differing hyperparameters are
    /// reported as [`CheckpointError::Mismatch`].
    pub fn from_bytes(bytes: &[u8], expected: Option<ModelConfig>) -> Result<Self, CheckpointError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| CheckpointError::Truncated)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let get = |r: &mut &[u8]| -> Result<usize, CheckpointError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| CheckpointError::Truncated)?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        let get_f = |r: &mut &[u8]| -> Result<f64, CheckpointError> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|_| CheckpointError::Truncated)?;
            Ok(f64::from_le_bytes(b))
        };
        let version = get(&mut r)? as u32;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let mut vals = [0usize; 7];
        for v in &mut vals {
            *v = get(&mut r)?;
        }
        let found = CheckpointHeader::from_values(vals);
        let want_config = expected.unwrap_or(ModelConfig { hidden: found.hidden, head_hidden: found.head_hidden });
        let mut model = SformerModel::new(want_config, 0);
        let diffs = model.header().diff(&found);
        if !diffs.is_empty() {
            return Err(CheckpointError::Mismatch(diffs));
        }
        let n = get(&mut r)?;
        if n != model.params.len() {
            return Err(CheckpointError::Corrupt(format!("{n} tensors, expected {}", model.params.len())));
        }
        for (p, name) in model.params.iter_mut().zip(&model.names) {
            let (rows, cols) = (get(&mut r)?, get(&mut r)?);
            if (rows, cols) != p.dim() {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor {name} is {rows}x{cols}, expected {}x{}",
                    p.nrows(),
                    p.ncols()
                )));
            }
            for x in p.iter_mut() {
                *x = get_f(&mut r)?;
            }
        }
        let n = get(&mut r)?;
        if n != model.running.len() {
            return Err(CheckpointError::Corrupt(format!("{n} norm buffers, expected {}", model.running.len())));
        }
        for s in model.running.iter_mut() {
            let len = get(&mut r)?;
            if len != s.mean.len() {
                return Err(CheckpointError::Corrupt(format!("norm buffer of width {len}")));
            }
            for x in s.mean.iter_mut().chain(s.var.iter_mut()) {
                *x = get_f(&mut r)?;
            }
        }
        if !r.is_empty() {
            return Err(CheckpointError::Corrupt(format!("{} trailing bytes", r.len())));
        }
        Ok(model)
    }

    /// Write the binary checkpoint to `path` and its JSON sidecar next to it.
    /// `extra` is stored verbatim in the sidecar.
    pub fn save(&self, path: &Path, extra: serde_json::Value) -> io::Result<()> {
        fs::File::create(path)?.write_all(&self.to_bytes())?;
        let meta = CheckpointMeta {
            format: "qcnet-checkpoint".into(),
            version: CHECKPOINT_VERSION,
            header: self.header(),
            tensors: self
                .names
                .iter()
                .zip(&self.params)
                .map(|(name, p)| TensorMeta { name: name.clone(), shape: [p.nrows(), p.ncols()] })
                .collect(),
            extra,
        };
        let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        text.push('\n');
        fs::write(sidecar_path(path), text)
    }

    pub fn load(path: &Path, expected: Option<ModelConfig>) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path).map_err(|e| CheckpointError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes, expected)
    }
}

/// `model.ckpt` → `model.ckpt.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Read the `extra` object of a checkpoint's sidecar, if present.
pub fn read_sidecar_extra(path: &Path) -> Option<serde_json::Value> {
    let text = fs::read_to_string(sidecar_path(path)).ok()?;
    let meta: CheckpointMeta = serde_json::from_str(&text).ok()?;
    Some(meta.extra)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    #[serde(rename = "H")]
    pub hidden: usize,
    pub head_hidden: usize,
    pub node_layers: usize,
    pub edge_node_layers: usize,
    pub vertex_dim: usize,
    pub edge_dim: usize,
    pub triangle_dim: usize,
}

impl CheckpointHeader {
    const NAMES: [&'static str; 7] =
        ["H", "head_hidden", "node_layers", "edge_node_layers", "vertex_dim", "edge_dim", "triangle_dim"];

    fn values(&self) -> [usize; 7] {
        [
            self.hidden,
            self.head_hidden,
            self.node_layers,
            self.edge_node_layers,
            self.vertex_dim,
            self.edge_dim,
            self.triangle_dim,
        ]
    }

    fn from_values(v: [usize; 7]) -> Self {
        Self {
            hidden: v[0],
            head_hidden: v[1],
            node_layers: v[2],
            edge_node_layers: v[3],
            vertex_dim: v[4],
            edge_dim: v[5],
            triangle_dim: v[6],
        }
    }

    fn diff(&self, found: &Self) -> Vec<FieldDiff> {
        Self::NAMES
            .iter()
            .zip(self.values().iter().zip(found.values()))
            .filter(|(_, (a, b))| *a != b)
            .map(|(name, (&expected, found))| FieldDiff { field: name.to_string(), expected, found })
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    format: String,
    version: u32,
    #[serde(flatten)]
    header: CheckpointHeader,
    tensors: Vec<TensorMeta>,
    #[serde(default)]
    extra: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDiff {
    pub field: String,
    pub expected: usize,
    pub found: usize,
}

impl fmt::Display for FieldDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, found {}", self.field, self.expected, self.found)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckpointError {
    #[error("{0}")]
    Io(String),
    #[error("not a qcnet checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint mismatch: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Mismatch(Vec<FieldDiff>),
}
