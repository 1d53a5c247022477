//! Operation tape for reverse-mode differentiation.
//!
//! Every primitive evaluates eagerly and appends a node holding its value
//! plus whatever the reverse pass needs. Parameters are borrowed, not copied.

use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::attention::{self, attention_backward, AttentionDropout};
use super::ops::{self, gelu_grad, layer_norm_parts};
use super::scalar::{gemm, Operand};
use super::{Scalar, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Constant,
    Input,
    Param,
    MatMul { a: Var, b: Var },
    BatchMatMul { a: Var, b: Var, transpose_b: bool },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    AddBias { x: Var, bias: Var },
    AddConst { x: Var },
    MulConst { x: Var, factor: Tensor<T> },
    Scale { x: Var, factor: T },
    Reshape { x: Var },
    Softmax { x: Var },
    Attention { q: Var, k: Var, v: Var, key_mask: Vec<bool>, scale: T, dropout: Option<AttentionDropout> },
    LayerNorm { x: Var, gain: Var, bias: Var, normalized: Tensor<T>, inv_std: Vec<T> },
    Gelu { x: Var },
    MaskedMse { pred: Var, residual: Tensor<T>, denom: T },
    Sum { x: Var },
}

struct Node<'a, T: Clone> {
    value: Cow<'a, Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Linear record of a forward computation.
pub struct Tape<'a, T: Scalar> {
    nodes: Vec<Node<'a, T>>,
    params: BTreeMap<String, Var>,
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Cow<'a, Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Value that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(Cow::Owned(value), Op::Constant, false)
    }

    /// Non-parameter value whose gradient is still reported (see [`Gradients::wrt`]).
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(Cow::Owned(value), Op::Input, true)
    }

    /// Registers a named parameter; registering a name twice returns the first handle.
    pub fn param(&mut self, name: &str, value: &'a Tensor<T>) -> Var {
        if let Some(&v) = self.params.get(name) {
            return v;
        }
        let v = self.push(Cow::Borrowed(value), Op::Param, true);
        self.params.insert(name.to_string(), v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Cow::Owned(value), Op::MatMul { a, b }, rg))
    }

    /// Batched product over the leading axis; see [`ops::batch_matmul`].
    pub fn batch_matmul(&mut self, a: Var, b: Var, transpose_b: bool) -> Result<Var> {
        let value = ops::batch_matmul(self.value(a), self.value(b), transpose_b)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Cow::Owned(value), Op::BatchMatMul { a, b, transpose_b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Cow::Owned(value), Op::Add { a, b }, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Cow::Owned(value), Op::Mul { a, b }, rg))
    }

    /// Adds a vector along the last axis.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(bias);
        let d = xv.last_dim();
        if bv.len() != d {
            return Err(Error::dim(
                "add_bias",
                format!("{:?} + {:?}", xv.shape(), bv.shape()),
            ));
        }
        let mut value = xv.clone();
        if d > 0 {
            for row in value.data_mut().chunks_mut(d) {
                for (v, &b) in row.iter_mut().zip(bv.data()) {
                    *v += b;
                }
            }
        }
        let rg = self.needs(&[x, bias]);
        Ok(self.push(Cow::Owned(value), Op::AddBias { x, bias }, rg))
    }

    pub fn add_const(&mut self, x: Var, c: &Tensor<T>) -> Result<Var> {
        let value = self.value(x).add(c)?;
        let rg = self.needs(&[x]);
        Ok(self.push(Cow::Owned(value), Op::AddConst { x }, rg))
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mul_const(&mut self, x: Var, factor: Tensor<T>) -> Result<Var> {
        let value = self.value(x).zip_map(&factor, "mul_const", |a, b| a * b)?;
        let rg = self.needs(&[x]);
        Ok(self.push(Cow::Owned(value), Op::MulConst { x, factor }, rg))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let value = self.value(x).scale(factor);
        let rg = self.needs(&[x]);
        self.push(Cow::Owned(value), Op::Scale { x, factor }, rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        let rg = self.needs(&[x]);
        Ok(self.push(Cow::Owned(value), Op::Reshape { x }, rg))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let value = ops::softmax_rows(self.value(x));
        let rg = self.needs(&[x]);
        self.push(Cow::Owned(value), Op::Softmax { x }, rg)
    }

    /// Softmax of `[B, Tq, Tk]` scores with masked keys forced to zero weight.
    pub fn masked_softmax(&mut self, x: Var, key_mask: &[bool]) -> Result<Var> {
        let value = ops::masked_softmax(self.value(x), key_mask)?;
        let rg = self.needs(&[x]);
        // Masked entries have p == 0, so the plain softmax reverse rule
        // already sends them exactly zero gradient.
        Ok(self.push(Cow::Owned(value), Op::Softmax { x }, rg))
    }

    /// Fused single-head attention; see [`attention::attention`].
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        key_mask: &[bool],
        scale: T,
        dropout: Option<AttentionDropout>,
    ) -> Result<Var> {
        let value = attention::attention(self.value(q), self.value(k), self.value(v), key_mask, scale, dropout.as_ref())?;
        let rg = self.needs(&[q, k, v]);
        let op = Op::Attention { q, k, v, key_mask: key_mask.to_vec(), scale, dropout };
        Ok(self.push(Cow::Owned(value), op, rg))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let parts = layer_norm_parts(self.value(x), self.value(gain), self.value(bias), eps)?;
        let rg = self.needs(&[x, gain, bias]);
        Ok(self.push(
            Cow::Owned(parts.output),
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized: parts.normalized,
                inv_std: parts.inv_std,
            },
            rg,
        ))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(ops::gelu);
        let rg = self.needs(&[x]);
        self.push(Cow::Owned(value), Op::Gelu { x }, rg)
    }

    /// Mean squared error over frames whose mask entry is set.
    ///
    /// `pred` and `target` share a shape whose last axis holds channels; the
    /// mask has one entry per frame (all leading axes flattened).
    pub fn masked_mse(&mut self, pred: Var, target: &Tensor<T>, mask: &[bool]) -> Result<Var> {
        let (loss, residual, denom) = masked_residual(self.value(pred), target, mask)?;
        let rg = self.needs(&[pred]);
        Ok(self.push(
            Cow::Owned(Tensor::scalar(loss)),
            Op::MaskedMse { pred, residual, denom },
            rg,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let rg = self.needs(&[x]);
        self.push(Cow::Owned(value), Op::Sum { x }, rg)
    }

    /// Runs the reverse pass from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::dim(
                "backward",
                format!("loss must be scalar, shape {:?}", lv.shape()),
            ));
        }
        if !lv.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {}", lv.data()[0])));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Input | Op::Param | Op::Constant) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.reverse_node(node, &g, &mut grads)?;
        }

        let params = self
            .params
            .iter()
            .map(|(name, v)| {
                let g = grads[v.0]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(self.value(*v).shape()));
                (name.clone(), g)
            })
            .collect();
        Ok(Gradients { params, leaves: grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn reverse_node(&self, node: &Node<'a, T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        match &node.op {
            Op::Constant | Op::Input | Op::Param => {}
            Op::MatMul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if self.nodes[a.0].requires_grad {
                    let mut da = vec![T::zero(); m * k];
                    gemm(op(g.data(), m, n, false), op(bv.data(), k, n, true), T::zero(), &mut da);
                    self.accumulate(grads, *a, Tensor::new(vec![m, k], da)?);
                }
                if self.nodes[b.0].requires_grad {
                    let mut db = vec![T::zero(); k * n];
                    gemm(op(av.data(), m, k, true), op(g.data(), m, n, false), T::zero(), &mut db);
                    self.accumulate(grads, *b, Tensor::new(vec![k, n], db)?);
                }
            }
            Op::BatchMatMul { a, b, transpose_b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (batch, m, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
                let (rb, cb) = (bv.shape()[1], bv.shape()[2]);
                let n = if *transpose_b { rb } else { cb };
                if self.nodes[a.0].requires_grad {
                    let mut da = vec![T::zero(); batch * m * k];
                    for i in 0..batch {
                        let gi = &g.data()[i * m * n..(i + 1) * m * n];
                        let bi = &bv.data()[i * rb * cb..(i + 1) * rb * cb];
                        // dA = G · op(B)ᵀ
                        gemm(op(gi, m, n, false), op(bi, rb, cb, !*transpose_b), T::zero(), &mut da[i * m * k..(i + 1) * m * k]);
                    }
                    self.accumulate(grads, *a, Tensor::new(av.shape().to_vec(), da)?);
                }
                if self.nodes[b.0].requires_grad {
                    let mut db = vec![T::zero(); batch * rb * cb];
                    for i in 0..batch {
                        let gi = &g.data()[i * m * n..(i + 1) * m * n];
                        let ai = &av.data()[i * m * k..(i + 1) * m * k];
                        let out = &mut db[i * rb * cb..(i + 1) * rb * cb];
                        if *transpose_b {
                            // B stored n × k: dB = Gᵀ · A
                            gemm(op(gi, m, n, true), op(ai, m, k, false), T::zero(), out);
                        } else {
                            gemm(op(ai, m, k, true), op(gi, m, n, false), T::zero(), out);
                        }
                    }
                    self.accumulate(grads, *b, Tensor::new(bv.shape().to_vec(), db)?);
                }
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, g.zip_map(bv, "mul", |x, y| x * y)?);
                self.accumulate(grads, *b, g.zip_map(av, "mul", |x, y| x * y)?);
            }
            Op::AddBias { x, bias } => {
                self.accumulate(grads, *x, g.clone());
                if self.nodes[bias.0].requires_grad {
                    let d = g.last_dim();
                    let mut db = vec![T::zero(); d];
                    for row in g.data().chunks(d.max(1)) {
                        for (acc, &v) in db.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    let shape = self.value(*bias).shape().to_vec();
                    self.accumulate(grads, *bias, Tensor::new(shape, db)?);
                }
            }
            Op::AddConst { x } => self.accumulate(grads, *x, g.clone()),
            Op::MulConst { x, factor } => {
                self.accumulate(grads, *x, g.zip_map(factor, "mul_const", |a, b| a * b)?)
            }
            Op::Scale { x, factor } => self.accumulate(grads, *x, g.scale(*factor)),
            Op::Reshape { x } => {
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(grads, *x, g.clone().reshape(&shape)?);
            }
            Op::Softmax { x } => {
                let p = &node.value;
                let d = p.last_dim();
                let mut dx = g.clone();
                if d > 0 {
                    for (drow, prow) in dx.data_mut().chunks_mut(d).zip(p.data().chunks(d)) {
                        let dot: T = drow.iter().zip(prow).map(|(&a, &b)| a * b).sum();
                        for (dv, &pv) in drow.iter_mut().zip(prow) {
                            *dv = pv * (*dv - dot);
                        }
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::Attention { q, k, v, key_mask, scale, dropout } => {
                let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                let d = attention_backward(qv, kv, vv, key_mask, *scale, dropout.as_ref(), g)?;
                self.accumulate(grads, *q, Tensor::new(qv.shape().to_vec(), d.dq)?);
                self.accumulate(grads, *k, Tensor::new(kv.shape().to_vec(), d.dk)?);
                self.accumulate(grads, *v, Tensor::new(vv.shape().to_vec(), d.dv)?);
            }
            Op::LayerNorm { x, gain, bias, normalized, inv_std } => {
                let d = g.last_dim();
                let gv = self.value(*gain);
                let mut dgain = vec![T::zero(); d];
                let mut dbias = vec![T::zero(); d];
                let mut dx = g.clone();
                let dn = T::from_usize(d).unwrap();
                for (r, rs) in inv_std.iter().enumerate() {
                    let grow = g.row(r);
                    let nrow = normalized.row(r);
                    let mut mean_dn = T::zero();
                    let mut mean_dn_n = T::zero();
                    for j in 0..d {
                        dgain[j] += grow[j] * nrow[j];
                        dbias[j] += grow[j];
                        let dnj = grow[j] * gv.data()[j];
                        mean_dn += dnj;
                        mean_dn_n += dnj * nrow[j];
                    }
                    mean_dn /= dn;
                    mean_dn_n /= dn;
                    let out = &mut dx.data_mut()[r * d..(r + 1) * d];
                    for j in 0..d {
                        let dnj = grow[j] * gv.data()[j];
                        out[j] = *rs * (dnj - mean_dn - nrow[j] * mean_dn_n);
                    }
                }
                self.accumulate(grads, *x, dx);
                let gshape = gv.shape().to_vec();
                self.accumulate(grads, *gain, Tensor::new(gshape, dgain)?);
                let bshape = self.value(*bias).shape().to_vec();
                self.accumulate(grads, *bias, Tensor::new(bshape, dbias)?);
            }
            Op::Gelu { x } => {
                let dx = g.zip_map(self.value(*x), "gelu", |gv, xv| gv * gelu_grad(xv))?;
                self.accumulate(grads, *x, dx);
            }
            Op::MaskedMse { pred, residual, denom } => {
                let c = g.data()[0] * T::lit(2.0) / *denom;
                self.accumulate(grads, *pred, residual.scale(c));
            }
            Op::Sum { x } => {
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(grads, *x, Tensor::full(&shape, g.data()[0]));
            }
        }
        Ok(())
    }
}

fn op<T>(data: &[T], rows: usize, cols: usize, transposed: bool) -> Operand<'_, T> {
    Operand { data, rows, cols, transposed }
}

/// Masked squared-error pieces: `(loss, masked residual, denominator)`.
pub(crate) fn masked_residual<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    mask: &[bool],
) -> Result<(T, Tensor<T>, T)> {
    pred.expect_same_shape(target, "masked_mse")?;
    let channels = pred.last_dim();
    if mask.len() != pred.outer_len() {
        return Err(Error::dim(
            "masked_mse",
            format!("mask length {} for shape {:?}", mask.len(), pred.shape()),
        ));
    }
    let valid = mask.iter().filter(|&&m| m).count();
    if valid == 0 || channels == 0 {
        return Err(Error::DegenerateBatch);
    }
    let mut residual = Tensor::zeros(pred.shape());
    let mut total = T::zero();
    for (f, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let span = f * channels..(f + 1) * channels;
        let out = &mut residual.data_mut()[span.clone()];
        for ((r, &p), &t) in out.iter_mut().zip(&pred.data()[span.clone()]).zip(&target.data()[span]) {
            *r = p - t;
            total += *r * *r;
        }
    }
    let denom = T::from_usize(valid * channels).unwrap();
    Ok((total / denom, residual, denom))
}

/// Gradients produced by one reverse pass.
pub struct Gradients<T> {
    params: BTreeMap<String, Tensor<T>>,
    leaves: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a registered parameter (zeros if the loss ignores it).
    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    /// Gradient of an [`Tape::input`] leaf; `None` if nothing flowed into it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(v.0).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.get_mut(name)
    }

    pub fn into_map(self) -> BTreeMap<String, Tensor<T>> {
        self.params
    }

    pub fn from_map(params: BTreeMap<String, Tensor<T>>) -> Self {
        Self { params, leaves: Vec::new() }
    }
}
