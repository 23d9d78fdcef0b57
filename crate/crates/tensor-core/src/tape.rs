use crate::{Result, Scalar, TensorError};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

/// Axis selector for 2-D reductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul { a: usize, b: usize },
    Add { a: usize, b: usize },
    AddRowBias { x: usize, bias: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { x: usize, factor: f64 },
    Gelu { x: usize },
    Exp { x: usize },
    Clamp { x: usize, lo: f64, hi: f64 },
    Softmax { x: usize, axis: Axis },
    LayerNorm { x: usize, gain: usize, bias: usize, eps: f64 },
    Transpose { x: usize },
    Reshape { x: usize },
    SliceCols { x: usize, start: usize, end: usize },
    SliceRows { x: usize, start: usize, end: usize },
    ConcatCols { parts: Vec<usize> },
    ConcatRows { parts: Vec<usize> },
    SumAll { x: usize },
    MeanAll { x: usize },
    L1Loss { pred: usize, target: usize },
    KlGaussian { mu: usize, logvar: usize },
}

#[derive(Debug, Clone)]
struct Node<S> {
    shape: Vec<usize>,
    data: Vec<S>,
    grad: Option<Vec<S>>,
    requires_grad: bool,
    op: Op,
}

impl<S: Scalar> Node<S> {
    fn rows(&self) -> usize {
        self.shape[0]
    }

    fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }
}

/// Arena of tensors plus the recording of the ops that produced them.
///
/// Leaves created first act as persistent parameters: [`Tape::checkpoint`]
/// and [`Tape::truncate`] let a training loop rebuild the forward graph
/// every step without re-loading parameter data.
#[derive(Debug, Clone, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

fn matmul_raw<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize, out: &mut [S]) {
    // ikj order keeps the inner loop contiguous over b and out; iterator
    // form lets it vectorize.
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == S::zero() {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o = *o + aip * bv;
            }
        }
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Marker for [`Tape::truncate`].
    pub fn checkpoint(&self) -> usize {
        self.nodes.len()
    }

    /// Drop every node recorded after `checkpoint`. Leaves created before
    /// the checkpoint keep their data and accumulated gradients.
    pub fn truncate(&mut self, checkpoint: usize) {
        self.nodes.truncate(checkpoint);
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<S>, op: Op) -> TensorId {
        self.nodes.push(Node {
            shape,
            data,
            grad: None,
            requires_grad: false,
            op,
        });
        TensorId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, data: Vec<S>, shape: &[usize], requires_grad: bool) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != data.len() || shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(TensorError::ShapeMismatch {
                op: "leaf",
                left: shape.to_vec(),
                right: vec![data.len()],
            });
        }
        let id = self.push(shape.to_vec(), data, Op::Leaf);
        self.nodes[id.0].requires_grad = requires_grad;
        if requires_grad {
            self.nodes[id.0].grad = Some(vec![S::zero(); numel]);
        }
        Ok(id)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, data: Vec<S>, shape: &[usize]) -> Result<TensorId> {
        self.leaf(data, shape, false)
    }

    pub fn scalar(&mut self, value: S) -> TensorId {
        self.push(vec![1], vec![value], Op::Leaf)
    }

    pub fn shape(&self, t: TensorId) -> &[usize] {
        &self.nodes[t.0].shape
    }

    pub fn data(&self, t: TensorId) -> &[S] {
        &self.nodes[t.0].data
    }

    pub fn data_mut(&mut self, t: TensorId) -> &mut [S] {
        &mut self.nodes[t.0].data
    }

    pub fn grad(&self, t: TensorId) -> Option<&[S]> {
        self.nodes[t.0].grad.as_deref()
    }

    pub fn requires_grad(&self, t: TensorId) -> bool {
        self.nodes[t.0].requires_grad
    }

    pub fn value(&self, t: TensorId) -> S {
        self.nodes[t.0].data[0]
    }

    /// Reset accumulated gradients on every grad-carrying leaf.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            if let Some(g) = node.grad.as_mut() {
                for v in g.iter_mut() {
                    *v = S::zero();
                }
            }
        }
    }

    fn check_same_shape(&self, op: &'static str, a: TensorId, b: TensorId) -> Result<()> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(TensorError::ShapeMismatch {
                op,
                left: self.nodes[a.0].shape.clone(),
                right: self.nodes[b.0].shape.clone(),
            });
        }
        Ok(())
    }

    fn check_2d(&self, op: &'static str, t: TensorId) -> Result<(usize, usize)> {
        let shape = &self.nodes[t.0].shape;
        if shape.len() != 2 {
            return Err(TensorError::ShapeMismatch {
                op,
                left: shape.clone(),
                right: vec![],
            });
        }
        Ok((shape[0], shape[1]))
    }

    // ---- forward ops -------------------------------------------------

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (m, k) = self.check_2d("matmul", a)?;
        let (kb, n) = self.check_2d("matmul", b)?;
        if k != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: self.nodes[a.0].shape.clone(),
                right: self.nodes[b.0].shape.clone(),
            });
        }
        let mut out = vec![S::zero(); m * n];
        matmul_raw(&self.nodes[a.0].data, &self.nodes[b.0].data, m, k, n, &mut out);
        Ok(self.push(vec![m, n], out, Op::Matmul { a: a.0, b: b.0 }))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_same_shape("add", a, b)?;
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| x + y)
            .collect();
        Ok(self.push(self.nodes[a.0].shape.clone(), data, Op::Add { a: a.0, b: b.0 }))
    }

    /// Row-wise bias: `[r x c] + [c]`. The only broadcast the engine has.
    pub fn add_row_bias(&mut self, x: TensorId, bias: TensorId) -> Result<TensorId> {
        let (r, c) = self.check_2d("add_row_bias", x)?;
        if self.nodes[bias.0].shape != [c] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row_bias",
                left: self.nodes[x.0].shape.clone(),
                right: self.nodes[bias.0].shape.clone(),
            });
        }
        let mut data = self.nodes[x.0].data.clone();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] = data[i * c + j] + self.nodes[bias.0].data[j];
            }
        }
        Ok(self.push(vec![r, c], data, Op::AddRowBias { x: x.0, bias: bias.0 }))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_same_shape("sub", a, b)?;
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| x - y)
            .collect();
        Ok(self.push(self.nodes[a.0].shape.clone(), data, Op::Sub { a: a.0, b: b.0 }))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_same_shape("mul", a, b)?;
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| x * y)
            .collect();
        Ok(self.push(self.nodes[a.0].shape.clone(), data, Op::Mul { a: a.0, b: b.0 }))
    }

    pub fn scale(&mut self, x: TensorId, factor: f64) -> TensorId {
        let f = S::c(factor);
        let data = self.nodes[x.0].data.iter().map(|&v| v * f).collect();
        self.push(self.nodes[x.0].shape.clone(), data, Op::Scale { x: x.0, factor })
    }

    /// GELU approximated as `x * sigmoid(1.702 x)`.
    pub fn gelu(&mut self, x: TensorId) -> TensorId {
        let k = S::c(1.702);
        let data = self.nodes[x.0]
            .data
            .iter()
            .map(|&v| v * sigmoid(k * v))
            .collect();
        self.push(self.nodes[x.0].shape.clone(), data, Op::Gelu { x: x.0 })
    }

    pub fn exp(&mut self, x: TensorId) -> TensorId {
        let data = self.nodes[x.0].data.iter().map(|&v| v.exp()).collect();
        self.push(self.nodes[x.0].shape.clone(), data, Op::Exp { x: x.0 })
    }

    pub fn clamp(&mut self, x: TensorId, lo: f64, hi: f64) -> TensorId {
        let (l, h) = (S::c(lo), S::c(hi));
        let data = self.nodes[x.0]
            .data
            .iter()
            .map(|&v| if v < l { l } else if v > h { h } else { v })
            .collect();
        self.push(self.nodes[x.0].shape.clone(), data, Op::Clamp { x: x.0, lo, hi })
    }

    /// Max-subtracted softmax along `axis` of a 2-D tensor.
    pub fn softmax(&mut self, x: TensorId, axis: Axis) -> Result<TensorId> {
        let (r, c) = self.check_2d("softmax", x)?;
        let mut data = self.nodes[x.0].data.clone();
        for_each_lane(r, c, axis, |lane| {
            let mut max = S::neg_infinity();
            for &i in lane {
                if data[i] > max {
                    max = data[i];
                }
            }
            let mut sum = S::zero();
            for &i in lane {
                let e = (data[i] - max).exp();
                data[i] = e;
                sum = sum + e;
            }
            for &i in lane {
                data[i] = data[i] / sum;
            }
        });
        Ok(self.push(vec![r, c], data, Op::Softmax { x: x.0, axis }))
    }

    /// Per-row normalization of a 2-D tensor: `(x - mean) / sqrt(var + eps)`,
    /// then elementwise gain and bias over the row dimension.
    pub fn layer_norm(
        &mut self,
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
        eps: f64,
    ) -> Result<TensorId> {
        let (r, c) = self.check_2d("layer_norm", x)?;
        if self.nodes[gain.0].shape != [c] || self.nodes[bias.0].shape != [c] {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm",
                left: vec![r, c],
                right: self.nodes[gain.0].shape.clone(),
            });
        }
        let e = S::c(eps);
        let inv_c = S::one() / S::from_usize(c).unwrap();
        let mut data = vec![S::zero(); r * c];
        for i in 0..r {
            let row = &self.nodes[x.0].data[i * c..(i + 1) * c];
            let mut mean = S::zero();
            for &v in row {
                mean = mean + v;
            }
            mean = mean * inv_c;
            let mut var = S::zero();
            for &v in row {
                let d = v - mean;
                var = var + d * d;
            }
            var = var * inv_c;
            let inv_std = S::one() / (var + e).sqrt();
            for j in 0..c {
                let norm = (row[j] - mean) * inv_std;
                data[i * c + j] = norm * self.nodes[gain.0].data[j] + self.nodes[bias.0].data[j];
            }
        }
        Ok(self.push(
            vec![r, c],
            data,
            Op::LayerNorm { x: x.0, gain: gain.0, bias: bias.0, eps },
        ))
    }

    pub fn transpose(&mut self, x: TensorId) -> Result<TensorId> {
        let (r, c) = self.check_2d("transpose", x)?;
        let src = &self.nodes[x.0].data;
        let mut data = vec![S::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        Ok(self.push(vec![c, r], data, Op::Transpose { x: x.0 }))
    }

    pub fn reshape(&mut self, x: TensorId, shape: &[usize]) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != self.nodes[x.0].data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: self.nodes[x.0].shape.clone(),
                right: shape.to_vec(),
            });
        }
        let data = self.nodes[x.0].data.clone();
        Ok(self.push(shape.to_vec(), data, Op::Reshape { x: x.0 }))
    }

    pub fn slice_cols(&mut self, x: TensorId, start: usize, end: usize) -> Result<TensorId> {
        let (r, c) = self.check_2d("slice_cols", x)?;
        if start >= end || end > c {
            return Err(TensorError::ContractViolation(format!(
                "slice_cols range {start}..{end} outside 0..{c}"
            )));
        }
        let w = end - start;
        let mut data = vec![S::zero(); r * w];
        for i in 0..r {
            data[i * w..(i + 1) * w]
                .copy_from_slice(&self.nodes[x.0].data[i * c + start..i * c + end]);
        }
        Ok(self.push(vec![r, w], data, Op::SliceCols { x: x.0, start, end }))
    }

    pub fn slice_rows(&mut self, x: TensorId, start: usize, end: usize) -> Result<TensorId> {
        let (r, c) = self.check_2d("slice_rows", x)?;
        if start >= end || end > r {
            return Err(TensorError::ContractViolation(format!(
                "slice_rows range {start}..{end} outside 0..{r}"
            )));
        }
        let data = self.nodes[x.0].data[start * c..end * c].to_vec();
        Ok(self.push(vec![end - start, c], data, Op::SliceRows { x: x.0, start, end }))
    }

    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(TensorError::ContractViolation("concat_cols of nothing".into()));
        }
        let (r, _) = self.check_2d("concat_cols", parts[0])?;
        let mut widths = Vec::with_capacity(parts.len());
        let mut total = 0;
        for &p in parts {
            let (rp, cp) = self.check_2d("concat_cols", p)?;
            if rp != r {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.nodes[parts[0].0].shape.clone(),
                    right: self.nodes[p.0].shape.clone(),
                });
            }
            widths.push(cp);
            total += cp;
        }
        let mut data = vec![S::zero(); r * total];
        for i in 0..r {
            let mut offset = 0;
            for (&p, &w) in parts.iter().zip(&widths) {
                data[i * total + offset..i * total + offset + w]
                    .copy_from_slice(&self.nodes[p.0].data[i * w..(i + 1) * w]);
                offset += w;
            }
        }
        Ok(self.push(
            vec![r, total],
            data,
            Op::ConcatCols { parts: parts.iter().map(|p| p.0).collect() },
        ))
    }

    pub fn concat_rows(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(TensorError::ContractViolation("concat_rows of nothing".into()));
        }
        let (_, c) = self.check_2d("concat_rows", parts[0])?;
        let mut total = 0;
        for &p in parts {
            let (rp, cp) = self.check_2d("concat_rows", p)?;
            if cp != c {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    left: self.nodes[parts[0].0].shape.clone(),
                    right: self.nodes[p.0].shape.clone(),
                });
            }
            total += rp;
        }
        let mut data = Vec::with_capacity(total * c);
        for &p in parts {
            data.extend_from_slice(&self.nodes[p.0].data);
        }
        Ok(self.push(
            vec![total, c],
            data,
            Op::ConcatRows { parts: parts.iter().map(|p| p.0).collect() },
        ))
    }

    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let mut s = S::zero();
        for &v in &self.nodes[x.0].data {
            s = s + v;
        }
        self.push(vec![1], vec![s], Op::SumAll { x: x.0 })
    }

    pub fn mean_all(&mut self, x: TensorId) -> TensorId {
        let n = S::from_usize(self.nodes[x.0].data.len()).unwrap();
        let mut s = S::zero();
        for &v in &self.nodes[x.0].data {
            s = s + v;
        }
        self.push(vec![1], vec![s / n], Op::MeanAll { x: x.0 })
    }

    /// Mean absolute difference over all elements.
    pub fn l1_loss(&mut self, pred: TensorId, target: TensorId) -> Result<TensorId> {
        self.check_same_shape("l1_loss", pred, target)?;
        let n = S::from_usize(self.nodes[pred.0].data.len()).unwrap();
        let mut s = S::zero();
        for (&p, &t) in self.nodes[pred.0].data.iter().zip(&self.nodes[target.0].data) {
            s = s + (p - t).abs();
        }
        Ok(self.push(
            vec![1],
            vec![s / n],
            Op::L1Loss { pred: pred.0, target: target.0 },
        ))
    }

    /// KL divergence of a diagonal Gaussian against the standard normal:
    /// `-0.5 * sum(1 + logvar - mu^2 - exp(logvar))`.
    pub fn kl_gaussian(&mut self, mu: TensorId, logvar: TensorId) -> Result<TensorId> {
        self.check_same_shape("kl_gaussian", mu, logvar)?;
        let half = S::c(0.5);
        let mut s = S::zero();
        for (&m, &lv) in self.nodes[mu.0].data.iter().zip(&self.nodes[logvar.0].data) {
            s = s - half * (S::one() + lv - m * m - lv.exp());
        }
        Ok(self.push(
            vec![1],
            vec![s],
            Op::KlGaussian { mu: mu.0, logvar: logvar.0 },
        ))
    }

    // ---- backward ----------------------------------------------------

    /// Reverse sweep from a scalar loss. Gradients of `requires_grad`
    /// leaves accumulate across calls; use [`Tape::zero_grad`] to reset.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.nodes[loss.0].data.len() != 1 {
            return Err(TensorError::ContractViolation(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        // Per-node adjoint buffers for this sweep; leaf adjoints are folded
        // into the persistent grads at the end.
        let n = self.nodes.len();
        let mut adjoint: Vec<Option<Vec<S>>> = vec![None; n];
        adjoint[loss.0] = Some(vec![S::one()]);

        for i in (0..=loss.0).rev() {
            let g = match adjoint[i].take() {
                Some(g) => g,
                None => continue,
            };
            if self.nodes[i].requires_grad {
                let grad = self.nodes[i].grad.get_or_insert_with(|| vec![S::zero(); g.len()]);
                for (dst, &src) in grad.iter_mut().zip(&g) {
                    *dst = *dst + src;
                }
            }
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::Matmul { a, b } => {
                    let m = self.nodes[a].rows();
                    let k = self.nodes[a].cols();
                    let nn = self.nodes[b].cols();
                    // dA = dC . B^T
                    let mut da = vec![S::zero(); m * k];
                    let b_data = &self.nodes[b].data;
                    for ii in 0..m {
                        let g_row = &g[ii * nn..(ii + 1) * nn];
                        let da_row = &mut da[ii * k..(ii + 1) * k];
                        for (p, slot) in da_row.iter_mut().enumerate() {
                            let b_row = &b_data[p * nn..(p + 1) * nn];
                            let mut s = S::zero();
                            for (&gv, &bv) in g_row.iter().zip(b_row) {
                                s = s + gv * bv;
                            }
                            *slot = s;
                        }
                    }
                    // dB = A^T . dC
                    let mut db = vec![S::zero(); k * nn];
                    let a_data = &self.nodes[a].data;
                    for ii in 0..m {
                        let g_row = &g[ii * nn..(ii + 1) * nn];
                        for p in 0..k {
                            let aip = a_data[ii * k + p];
                            if aip == S::zero() {
                                continue;
                            }
                            let db_row = &mut db[p * nn..(p + 1) * nn];
                            for (d, &gv) in db_row.iter_mut().zip(g_row) {
                                *d = *d + aip * gv;
                            }
                        }
                    }
                    accumulate(&mut adjoint[a], da);
                    accumulate(&mut adjoint[b], db);
                }
                Op::Add { a, b } => {
                    accumulate(&mut adjoint[a], g.clone());
                    accumulate(&mut adjoint[b], g);
                }
                Op::AddRowBias { x, bias } => {
                    let c = self.nodes[bias].data.len();
                    let r = g.len() / c;
                    let mut db = vec![S::zero(); c];
                    for i2 in 0..r {
                        for j in 0..c {
                            db[j] = db[j] + g[i2 * c + j];
                        }
                    }
                    accumulate(&mut adjoint[x], g);
                    accumulate(&mut adjoint[bias], db);
                }
                Op::Sub { a, b } => {
                    let neg: Vec<S> = g.iter().map(|&v| -v).collect();
                    accumulate(&mut adjoint[a], g);
                    accumulate(&mut adjoint[b], neg);
                }
                Op::Mul { a, b } => {
                    let da: Vec<S> = g
                        .iter()
                        .zip(&self.nodes[b].data)
                        .map(|(&gv, &bv)| gv * bv)
                        .collect();
                    let db: Vec<S> = g
                        .iter()
                        .zip(&self.nodes[a].data)
                        .map(|(&gv, &av)| gv * av)
                        .collect();
                    accumulate(&mut adjoint[a], da);
                    accumulate(&mut adjoint[b], db);
                }
                Op::Scale { x, factor } => {
                    let f = S::c(factor);
                    let dx: Vec<S> = g.iter().map(|&v| v * f).collect();
                    accumulate(&mut adjoint[x], dx);
                }
                Op::Gelu { x } => {
                    let k = S::c(1.702);
                    let dx: Vec<S> = g
                        .iter()
                        .zip(&self.nodes[x].data)
                        .map(|(&gv, &xv)| {
                            let s = sigmoid(k * xv);
                            gv * (s + k * xv * s * (S::one() - s))
                        })
                        .collect();
                    accumulate(&mut adjoint[x], dx);
                }
                Op::Exp { x } => {
                    let dx: Vec<S> = g
                        .iter()
                        .zip(&self.nodes[i].data)
                        .map(|(&gv, &out)| gv * out)
                        .collect();
                    accumulate(&mut adjoint[x], dx);
                }
                Op::Clamp { x, lo, hi } => {
                    let (l, h) = (S::c(lo), S::c(hi));
                    let dx: Vec<S> = g
                        .iter()
                        .zip(&self.nodes[x].data)
                        .map(|(&gv, &xv)| if xv < l || xv > h { S::zero() } else { gv })
                        .collect();
                    accumulate(&mut adjoint[x], dx);
                }
                Op::Softmax { x, axis } => {
                    let r = self.nodes[i].rows();
                    let c = self.nodes[i].cols();
                    let y = &self.nodes[i].data;
                    let mut dx = vec![S::zero(); r * c];
                    for_each_lane(r, c, axis, |lane| {
                        let mut dot = S::zero();
                        for &idx in lane {
                            dot = dot + g[idx] * y[idx];
                        }
                        for &idx in lane {
                            dx[idx] = y[idx] * (g[idx] - dot);
                        }
                    });
                    accumulate(&mut adjoint[x], dx);
                }
                Op::LayerNorm { x, gain, bias, eps } => {
                    let r = self.nodes[x].rows();
                    let c = self.nodes[x].cols();
                    let e = S::c(eps);
                    let inv_c = S::one() / S::from_usize(c).unwrap();
                    let mut dx = vec![S::zero(); r * c];
                    let mut dgain = vec![S::zero(); c];
                    let mut dbias = vec![S::zero(); c];
                    for i2 in 0..r {
                        let row = &self.nodes[x].data[i2 * c..(i2 + 1) * c];
                        let grow = &g[i2 * c..(i2 + 1) * c];
                        let mut mean = S::zero();
                        for &v in row {
                            mean = mean + v;
                        }
                        mean = mean * inv_c;
                        let mut var = S::zero();
                        for &v in row {
                            let d = v - mean;
                            var = var + d * d;
                        }
                        var = var * inv_c;
                        let inv_std = S::one() / (var + e).sqrt();
                        // dg = gain .* grad; dx = (dg - mean(dg) - xhat*mean(dg*xhat)) * inv_std
                        let mut mean_dg = S::zero();
                        let mut mean_dg_xhat = S::zero();
                        for j in 0..c {
                            let xhat = (row[j] - mean) * inv_std;
                            let dg = self.nodes[gain].data[j] * grow[j];
                            mean_dg = mean_dg + dg;
                            mean_dg_xhat = mean_dg_xhat + dg * xhat;
                            dgain[j] = dgain[j] + grow[j] * xhat;
                            dbias[j] = dbias[j] + grow[j];
                        }
                        mean_dg = mean_dg * inv_c;
                        mean_dg_xhat = mean_dg_xhat * inv_c;
                        for j in 0..c {
                            let xhat = (row[j] - mean) * inv_std;
                            let dg = self.nodes[gain].data[j] * grow[j];
                            dx[i2 * c + j] = (dg - mean_dg - xhat * mean_dg_xhat) * inv_std;
                        }
                    }
                    accumulate(&mut adjoint[x], dx);
                    accumulate(&mut adjoint[gain], dgain);
                    accumulate(&mut adjoint[bias], dbias);
                }
                Op::Transpose { x } => {
                    let r = self.nodes[i].rows();
                    let c = self.nodes[i].cols();
                    let mut dx = vec![S::zero(); r * c];
                    for ii in 0..r {
                        for j in 0..c {
                            dx[j * r + ii] = g[ii * c + j];
                        }
                    }
                    accumulate(&mut adjoint[x], dx);
                }
                Op::Reshape { x } => {
                    accumulate(&mut adjoint[x], g);
                }
                Op::SliceCols { x, start, end } => {
                    let c = self.nodes[x].cols();
                    let w = end - start;
                    let r = g.len() / w;
                    let mut dx = vec![S::zero(); r * c];
                    for ii in 0..r {
                        for j in 0..w {
                            dx[ii * c + start + j] = g[ii * w + j];
                        }
                    }
                    accumulate(&mut adjoint[x], dx);
                }
                Op::SliceRows { x, start, end } => {
                    let c = self.nodes[x].cols();
                    let r = self.nodes[x].rows();
                    let mut dx = vec![S::zero(); r * c];
                    dx[start * c..end * c].copy_from_slice(&g);
                    accumulate(&mut adjoint[x], dx);
                }
                Op::ConcatCols { parts } => {
                    let total = self.nodes[i].cols();
                    let r = self.nodes[i].rows();
                    let mut offset = 0;
                    for &p in &parts {
                        let w = self.nodes[p].cols();
                        let mut dp = vec![S::zero(); r * w];
                        for ii in 0..r {
                            dp[ii * w..(ii + 1) * w]
                                .copy_from_slice(&g[ii * total + offset..ii * total + offset + w]);
                        }
                        accumulate(&mut adjoint[p], dp);
                        offset += w;
                    }
                }
                Op::ConcatRows { parts } => {
                    let mut offset = 0;
                    for &p in &parts {
                        let len = self.nodes[p].data.len();
                        accumulate(&mut adjoint[p], g[offset..offset + len].to_vec());
                        offset += len;
                    }
                }
                Op::SumAll { x } => {
                    let gv = g[0];
                    accumulate(&mut adjoint[x], vec![gv; self.nodes[x].data.len()]);
                }
                Op::MeanAll { x } => {
                    let len = self.nodes[x].data.len();
                    let gv = g[0] / S::from_usize(len).unwrap();
                    accumulate(&mut adjoint[x], vec![gv; len]);
                }
                Op::L1Loss { pred, target } => {
                    let len = self.nodes[pred].data.len();
                    let gv = g[0] / S::from_usize(len).unwrap();
                    let mut dp = vec![S::zero(); len];
                    let mut dt = vec![S::zero(); len];
                    for j in 0..len {
                        let d = self.nodes[pred].data[j] - self.nodes[target].data[j];
                        let s = if d > S::zero() {
                            S::one()
                        } else if d < S::zero() {
                            -S::one()
                        } else {
                            S::zero()
                        };
                        dp[j] = gv * s;
                        dt[j] = -gv * s;
                    }
                    accumulate(&mut adjoint[pred], dp);
                    accumulate(&mut adjoint[target], dt);
                }
                Op::KlGaussian { mu, logvar } => {
                    let gv = g[0];
                    let half = S::c(0.5);
                    let dm: Vec<S> = self.nodes[mu].data.iter().map(|&m| gv * m).collect();
                    let dl: Vec<S> = self.nodes[logvar]
                        .data
                        .iter()
                        .map(|&lv| gv * half * (lv.exp() - S::one()))
                        .collect();
                    accumulate(&mut adjoint[mu], dm);
                    accumulate(&mut adjoint[logvar], dl);
                }
            }
        }
        Ok(())
    }
}

fn accumulate<S: Scalar>(slot: &mut Option<Vec<S>>, delta: Vec<S>) {
    match slot {
        Some(existing) => {
            for (dst, src) in existing.iter_mut().zip(delta) {
                *dst = *dst + src;
            }
        }
        None => *slot = Some(delta),
    }
}

fn for_each_lane(r: usize, c: usize, axis: Axis, mut f: impl FnMut(&[usize])) {
    let mut lane = Vec::new();
    match axis {
        Axis::Cols => {
            // lanes run along columns: one lane per row
            for i in 0..r {
                lane.clear();
                lane.extend((0..c).map(|j| i * c + j));
                f(&lane);
            }
        }
        Axis::Rows => {
            for j in 0..c {
                lane.clear();
                lane.extend((0..r).map(|i| i * c + j));
                f(&lane);
            }
        }
    }
}
