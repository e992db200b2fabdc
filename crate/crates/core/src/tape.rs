//! A small reverse-mode differentiation tape over dense row-major matrices.
//!
//! Every value is an `Array2<f64>`; row vectors (biases, norm scales) are
//! `1 × n`. Nodes are appended in evaluation order, so a single reverse sweep
//! over the node list is a valid topological order for the backward pass.

use std::sync::Arc;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};

pub type NodeId = usize;

/// Epsilon shared by batch and layer normalization.
pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    Mae,
}

#[derive(Debug)]
enum Op {
    Input,
    Param,
    MatMul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Silu(NodeId),
    Concat(NodeId, NodeId),
    RowSlice(NodeId, usize),
    Gather(NodeId, Arc<[usize]>),
    ScatterAdd(NodeId, Arc<[usize]>),
    SegmentMean(NodeId, Arc<[usize]>, Arc<[f64]>),
    /// Column-wise normalization over rows (batch statistics or frozen).
    BatchNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Array2<f64>, inv_std: Array1<f64>, batch: bool },
    /// Row-wise normalization over columns.
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Array2<f64>, inv_std: Array1<f64> },
    Loss(NodeId, Arc<[f64]>, LossKind),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Batch statistics observed by one batch-norm application in training mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub slot: usize,
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_nodes: Vec<(usize, NodeId)>,
    pub batch_stats: Vec<BatchStats>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Leaf for parameter `index`; repeated calls reuse one node.
    pub fn param(&mut self, index: usize, value: &Array2<f64>) -> NodeId {
        if let Some(&(_, id)) = self.param_nodes.iter().find(|(p, _)| *p == index) {
            return id;
        }
        let id = self.push(value.clone(), Op::Param);
        self.param_nodes.push((index, id));
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `x + row`, broadcasting a `1 × n` row over every row of `x`.
    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> NodeId {
        let v = self.value(x) + self.value(row);
        self.push(v, Op::AddRow(x, row))
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn silu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| x * sigmoid(x));
        self.push(v, Op::Silu(a))
    }

    /// Column-wise concatenation `[a, b]`.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()]).expect("row counts agree");
        self.push(v, Op::Concat(a, b))
    }

    /// Rows `start .. start + len` of `a`.
    pub fn row_slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(v, Op::RowSlice(a, start))
    }

    /// `out[i] = a[index[i]]`.
    pub fn gather(&mut self, a: NodeId, index: Arc<[usize]>) -> NodeId {
        let v = gather_rows(self.value(a).view(), &index);
        self.push(v, Op::Gather(a, index))
    }

    /// `out[index[i]] += a[i]` into `rows` output rows.
    pub fn scatter_add(&mut self, a: NodeId, index: Arc<[usize]>, rows: usize) -> NodeId {
        let v = scatter_rows(self.value(a).view(), &index, rows);
        self.push(v, Op::ScatterAdd(a, index))
    }

    /// Mean of rows grouped by `segment[i]` into `segments` output rows.
    pub fn segment_mean(&mut self, a: NodeId, segment: Arc<[usize]>, segments: usize) -> NodeId {
        let mut counts = vec![0.0; segments];
        for &g in segment.iter() {
            counts[g] += 1.0;
        }
        let mut v = scatter_rows(self.value(a).view(), &segment, segments);
        for (mut row, &c) in v.rows_mut().into_iter().zip(&counts) {
            if c > 0.0 {
                row /= c;
            }
        }
        self.push(v, Op::SegmentMean(a, segment, counts.into()))
    }

    /// Batch normalization. With `frozen = Some((mean, var))` the given
    /// statistics are used; otherwise the biased batch statistics are
    /// computed and recorded under `slot` in [`Tape::batch_stats`].
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        slot: usize,
        frozen: Option<(&Array1<f64>, &Array1<f64>)>,
    ) -> NodeId {
        let xv = self.value(x);
        let (rows, cols) = xv.dim();
        let (mean, var, batch) = match frozen {
            Some((m, v)) => (m.clone(), v.clone(), false),
            None if rows == 0 => (Array1::zeros(cols), Array1::zeros(cols), true),
            None => {
                let mean = xv.mean_axis(Axis(0)).expect("nonempty");
                let var = xv.var_axis(Axis(0), 0.0);
                (mean, var, true)
            }
        };
        let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
        let xhat = (xv - &mean.view().insert_axis(Axis(0))) * inv_std.view().insert_axis(Axis(0));
        let out = &xhat * self.value(gamma) + self.value(beta);
        if batch && rows > 0 {
            self.batch_stats.push(BatchStats { slot, mean, var });
        }
        self.push(out, Op::BatchNorm { x, gamma, beta, xhat, inv_std, batch })
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let xv = self.value(x);
        let cols = xv.ncols() as f64;
        let mut xhat = xv.to_owned();
        let mut inv_std = Array1::zeros(xv.nrows());
        for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.sum() / cols;
            row -= mean;
            let var = row.iter().map(|d| d * d).sum::<f64>() / cols;
            *inv = 1.0 / (var + NORM_EPS).sqrt();
            row *= *inv;
        }
        let out = &xhat * self.value(gamma) + self.value(beta);
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, inv_std })
    }

    /// Mean batch loss of a `B × 1` prediction column against `targets`.
    pub fn loss(&mut self, pred: NodeId, targets: Arc<[f64]>, kind: LossKind) -> NodeId {
        let p = self.value(pred);
        assert_eq!(p.nrows(), targets.len(), "prediction / target count");
        let b = targets.len() as f64;
        let total: f64 = p
            .column(0)
            .iter()
            .zip(targets.iter())
            .map(|(y, t)| match kind {
                LossKind::Mse => (y - t) * (y - t),
                LossKind::Mae => (y - t).abs(),
            })
            .sum();
        let v = Array2::from_elem((1, 1), total / b);
        self.nodes.push(Node { value: v, op: Op::Loss(pred, targets, kind) });
        self.nodes.len() - 1
    }

    /// Reverse sweep from the `1 × 1` node `root`. Returns the gradient for
    /// each parameter leaf as `(parameter index, gradient)`.
    pub fn backward(&self, root: NodeId) -> Vec<(usize, Array2<f64>)> {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root] = Some(Array2::ones(self.nodes[root].value.raw_dim()));

        fn acc(grads: &mut [Option<Array2<f64>>], id: NodeId, g: Array2<f64>) {
            match &mut grads[id] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Input => {}
                Op::Param => {
                    grads[id] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(x, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *row, gr);
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g * *c),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| g * y * (1.0 - y));
                    acc(&mut grads, *a, ga);
                }
                Op::Silu(a) => {
                    let x = self.value(*a);
                    let ga = ndarray::Zip::from(&g).and(x).map_collect(|&g, &x| {
                        let s = sigmoid(x);
                        g * s * (1.0 + x * (1.0 - s))
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::Concat(a, b) => {
                    let wa = self.value(*a).ncols();
                    acc(&mut grads, *a, g.slice(s![.., ..wa]).to_owned());
                    acc(&mut grads, *b, g.slice(s![.., wa..]).to_owned());
                }
                Op::RowSlice(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::Gather(a, index) => {
                    let rows = self.value(*a).nrows();
                    acc(&mut grads, *a, scatter_rows(g.view(), index, rows));
                }
                Op::ScatterAdd(a, index) => acc(&mut grads, *a, gather_rows(g.view(), index)),
                Op::SegmentMean(a, segment, counts) => {
                    let mut ga = gather_rows(g.view(), segment);
                    for (mut row, &seg) in ga.rows_mut().into_iter().zip(segment.iter()) {
                        row /= counts[seg];
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::BatchNorm { x, gamma, beta, xhat, inv_std, batch } => {
                    acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *gamma, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let gx = &g * self.value(*gamma);
                    let rows = gx.nrows();
                    let dx = if *batch && rows > 0 {
                        let m = rows as f64;
                        let sum_g = gx.sum_axis(Axis(0));
                        let sum_gx = (&gx * xhat).sum_axis(Axis(0));
                        let mut dx = gx * m;
                        dx -= &sum_g.insert_axis(Axis(0));
                        dx -= &(xhat * &sum_gx.insert_axis(Axis(0)));
                        dx * &(inv_std / m).insert_axis(Axis(0))
                    } else {
                        gx * inv_std.view().insert_axis(Axis(0))
                    };
                    acc(&mut grads, *x, dx);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *gamma, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let mut dx = &g * self.value(*gamma);
                    let n = dx.ncols() as f64;
                    for ((mut row, xh), &inv) in dx.rows_mut().into_iter().zip(xhat.rows()).zip(inv_std) {
                        let sum_g = row.sum();
                        let sum_gx = row.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>();
                        for (d, &xv) in row.iter_mut().zip(xh) {
                            *d = inv / n * (n * *d - sum_g - xv * sum_gx);
                        }
                    }
                    acc(&mut grads, *x, dx);
                }
                Op::Loss(pred, targets, kind) => {
                    let p = self.value(*pred);
                    let b = targets.len() as f64;
                    let up = g[[0, 0]];
                    let gp = Array2::from_shape_fn(p.raw_dim(), |(i, _)| {
                        let d = p[[i, 0]] - targets[i];
                        up * match kind {
                            LossKind::Mse => 2.0 * d / b,
                            LossKind::Mae => d.signum() * f64::from(d != 0.0) / b,
                        }
                    });
                    acc(&mut grads, *pred, gp);
                }
            }
        }

        self.param_nodes
            .iter()
            .map(|&(p, id)| {
                let g = grads[id].take().unwrap_or_else(|| Array2::zeros(self.nodes[id].value.raw_dim()));
                (p, g)
            })
            .collect()
    }
}

fn gather_rows(a: ArrayView2<f64>, index: &[usize]) -> Array2<f64> {
    let cols = a.ncols();
    let mut out = Array2::zeros((index.len(), cols));
    for (mut row, &i) in out.rows_mut().into_iter().zip(index) {
        row.assign(&a.row(i));
    }
    out
}

fn scatter_rows(a: ArrayView2<f64>, index: &[usize], rows: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, a.ncols()));
    for (row, &i) in a.rows().into_iter().zip(index) {
        let mut dst = out.row_mut(i);
        dst += &row;
    }
    out
}
