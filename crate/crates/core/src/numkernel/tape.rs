use std::cell::{Ref, RefCell};
use std::sync::atomic::{AtomicU64, Ordering};

use super::params::{ParamId, ParamStore};
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, softmax_in_place, Real, Tensor};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    MatMulNt(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulCol(usize, usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Softmax(usize),
    SoftmaxNll {
        logits: usize,
        targets: Vec<usize>,
        weights: Vec<T>,
        probs: Vec<T>,
    },
    Sum(usize),
    GatherRows(usize, Vec<usize>),
    SliceRows(usize, usize),
    SliceCols(usize, usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Where(usize, usize, usize),
    Boundary(usize),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Records forward operations so their adjoints can be replayed in
/// reverse. One tape per forward pass; drop it after `backward`.
pub struct Tape<T> {
    id: u64,
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn is_matrix<T: Real>(t: &Tensor<T>) -> bool {
    t.shape().len() == 2
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<T>, op: Op<T>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self.id,
            idx: nodes.len() - 1,
        }
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape != self.id {
            return Err(Error::Usage("value was not recorded on this tape".into()));
        }
        Ok(v.idx)
    }

    fn node(&self, v: Var) -> Result<Ref<'_, Tensor<T>>> {
        let idx = self.check(v)?;
        Ok(Ref::map(self.nodes.borrow(), |n| &n[idx].value))
    }

    pub fn value(&self, v: Var) -> Tensor<T> {
        self.node(v).expect("foreign var").clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.node(v).expect("foreign var").shape().to_vec()
    }

    pub fn constant(&self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    /// `a(m×k) · b(k×n)`.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let nodes = self.nodes.borrow();
        let (ta, tb) = (&nodes[ia].value, &nodes[ib].value);
        let ((m, k), (k2, n)) = (ta.dims2(), tb.dims2());
        if !is_matrix(ta) || !is_matrix(tb) || k != k2 {
            return Err(Error::dim("matmul", ta.shape(), tb.shape()));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nn(m, k, n, ta.data(), tb.data(), T::zero(), &mut out);
        drop(nodes);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(ia, ib)))
    }

    /// `a(m×k) · b(n×k)ᵀ`; applies a weight stored as (out × in) to a
    /// batch of row vectors.
    pub fn matmul_nt(&self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let nodes = self.nodes.borrow();
        let (ta, tb) = (&nodes[ia].value, &nodes[ib].value);
        let ((m, k), (n, k2)) = (ta.dims2(), tb.dims2());
        if !is_matrix(ta) || !is_matrix(tb) || k != k2 {
            return Err(Error::dim("matmul_nt", ta.shape(), tb.shape()));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nt(m, k, n, ta.data(), tb.data(), T::zero(), &mut out);
        drop(nodes);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMulNt(ia, ib)))
    }

    fn zip(&self, a: Var, b: Var, name: &'static str, f: impl Fn(T, T) -> T) -> Result<(Tensor<T>, usize, usize)> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let nodes = self.nodes.borrow();
        let (ta, tb) = (&nodes[ia].value, &nodes[ib].value);
        if ta.shape() != tb.shape() {
            return Err(Error::dim(name, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok((Tensor::from_parts(ta.shape().to_vec(), data), ia, ib))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let (t, ia, ib) = self.zip(a, b, "add", |x, y| x + y)?;
        Ok(self.push(t, Op::Add(ia, ib)))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let (t, ia, ib) = self.zip(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(ia, ib)))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let (t, ia, ib) = self.zip(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(ia, ib)))
    }

    /// Adds the vector `bias` (length n) to every row of `a` (m×n).
    pub fn add_row(&self, a: Var, bias: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(bias)?);
        let nodes = self.nodes.borrow();
        let (ta, tb) = (&nodes[ia].value, &nodes[ib].value);
        let (_, n) = ta.dims2();
        if tb.len() != n {
            return Err(Error::dim("add_row", ta.shape(), tb.shape()));
        }
        let mut data = ta.data().to_vec();
        for row in data.chunks_exact_mut(n) {
            for (x, &b) in row.iter_mut().zip(tb.data()) {
                *x = *x + b;
            }
        }
        let shape = ta.shape().to_vec();
        drop(nodes);
        Ok(self.push(Tensor::from_parts(shape, data), Op::AddRow(ia, ib)))
    }

    /// Scales row i of `a` (m×n) by `col[i]` (col has m entries).
    pub fn mul_col(&self, a: Var, col: Var) -> Result<Var> {
        let (ia, ic) = (self.check(a)?, self.check(col)?);
        let nodes = self.nodes.borrow();
        let (ta, tc) = (&nodes[ia].value, &nodes[ic].value);
        let (m, n) = ta.dims2();
        if tc.len() != m {
            return Err(Error::dim("mul_col", ta.shape(), tc.shape()));
        }
        let mut data = ta.data().to_vec();
        for (row, &c) in data.chunks_exact_mut(n).zip(tc.data()) {
            row.iter_mut().for_each(|x| *x = *x * c);
        }
        let shape = ta.shape().to_vec();
        drop(nodes);
        Ok(self.push(Tensor::from_parts(shape, data), Op::MulCol(ia, ic)))
    }

    fn unary(&self, a: Var, f: impl Fn(T) -> T) -> Result<(Tensor<T>, usize)> {
        let ia = self.check(a)?;
        let t = self.nodes.borrow()[ia].value.map(f);
        Ok((t, ia))
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var> {
        let (t, ia) = self.unary(a, sigmoid)?;
        Ok(self.push(t, Op::Sigmoid(ia)))
    }

    pub fn tanh(&self, a: Var) -> Result<Var> {
        let (t, ia) = self.unary(a, T::tanh)?;
        Ok(self.push(t, Op::Tanh(ia)))
    }

    pub fn relu(&self, a: Var) -> Result<Var> {
        let (t, ia) = self.unary(a, |x| x.max(T::zero()))?;
        Ok(self.push(t, Op::Relu(ia)))
    }

    /// Row-wise softmax.
    pub fn softmax(&self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let mut t = self.nodes.borrow()[ia].value.clone();
        let (_, n) = t.dims2();
        t.data_mut().chunks_exact_mut(n).for_each(softmax_in_place);
        Ok(self.push(t, Op::Softmax(ia)))
    }

    /// Weighted negative log-likelihood of `targets` under the row-wise
    /// softmax of `logits`: `-Σ_i w_i log softmax(logits_i)[targets_i]`.
    pub fn softmax_nll(&self, logits: Var, targets: &[usize], weights: &[T]) -> Result<Var> {
        let il = self.check(logits)?;
        let nodes = self.nodes.borrow();
        let tl = &nodes[il].value;
        let (m, n) = tl.dims2();
        if targets.len() != m || weights.len() != m {
            return Err(Error::dim("softmax_nll", tl.shape(), &[targets.len(), weights.len()]));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= n) {
            return Err(Error::Vocabulary { index: bad, size: n });
        }
        let mut probs = tl.data().to_vec();
        let mut loss = T::zero();
        for ((row, &t), &w) in probs.chunks_exact_mut(n).zip(targets).zip(weights) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for x in row.iter() {
                sum = sum + (*x - max).exp();
            }
            let lse = max + sum.ln();
            if w != T::zero() {
                loss = loss + w * (lse - row[t]);
            }
            for x in row.iter_mut() {
                *x = (*x - lse).exp();
            }
        }
        drop(nodes);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxNll {
                logits: il,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                probs,
            },
        ))
    }

    pub fn sum(&self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let s = self.nodes.borrow()[ia].value.data().iter().copied().sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(ia)))
    }

    /// Selects rows of a matrix; the adjoint scatters back into the
    /// selected rows only.
    pub fn gather_rows(&self, src: Var, rows: &[usize]) -> Result<Var> {
        let is = self.check(src)?;
        if rows.is_empty() {
            return Err(Error::Usage("gather of zero rows".into()));
        }
        let nodes = self.nodes.borrow();
        let ts = &nodes[is].value;
        let (r, n) = ts.dims2();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &i in rows {
            if i >= r {
                return Err(Error::Vocabulary { index: i, size: r });
            }
            data.extend_from_slice(ts.row(i));
        }
        drop(nodes);
        Ok(self.push(Tensor::from_parts(vec![rows.len(), n], data), Op::GatherRows(is, rows.to_vec())))
    }

    pub fn slice_rows(&self, src: Var, start: usize, end: usize) -> Result<Var> {
        let is = self.check(src)?;
        let nodes = self.nodes.borrow();
        let ts = &nodes[is].value;
        let (r, n) = ts.dims2();
        if start >= end || end > r {
            return Err(Error::dim("slice_rows", ts.shape(), &[start, end]));
        }
        let data = ts.data()[start * n..end * n].to_vec();
        drop(nodes);
        Ok(self.push(Tensor::from_parts(vec![end - start, n], data), Op::SliceRows(is, start)))
    }

    pub fn slice_cols(&self, src: Var, start: usize, end: usize) -> Result<Var> {
        let is = self.check(src)?;
        let nodes = self.nodes.borrow();
        let ts = &nodes[is].value;
        let (r, n) = ts.dims2();
        if start >= end || end > n {
            return Err(Error::dim("slice_cols", ts.shape(), &[start, end]));
        }
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&ts.row(i)[start..end]);
        }
        drop(nodes);
        Ok(self.push(Tensor::from_parts(vec![r, end - start], data), Op::SliceCols(is, start)))
    }

    pub fn concat_rows(&self, parts: &[Var]) -> Result<Var> {
        let ids = parts.iter().map(|&v| self.check(v)).collect::<Result<Vec<_>>>()?;
        let nodes = self.nodes.borrow();
        let first = &nodes[*ids.first().ok_or_else(|| Error::Usage("empty concat".into()))?].value;
        let n = first.dims2().1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &i in &ids {
            let t = &nodes[i].value;
            if t.dims2().1 != n {
                return Err(Error::dim("concat_rows", first.shape(), t.shape()));
            }
            rows += t.dims2().0;
            data.extend_from_slice(t.data());
        }
        drop(nodes);
        Ok(self.push(Tensor::from_parts(vec![rows, n], data), Op::ConcatRows(ids)))
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Result<Var> {
        let ids = parts.iter().map(|&v| self.check(v)).collect::<Result<Vec<_>>>()?;
        let nodes = self.nodes.borrow();
        let first = &nodes[*ids.first().ok_or_else(|| Error::Usage("empty concat".into()))?].value;
        let m = first.dims2().0;
        let mut total = 0;
        for &i in &ids {
            let t = &nodes[i].value;
            if t.dims2().0 != m {
                return Err(Error::dim("concat_cols", first.shape(), t.shape()));
            }
            total += t.dims2().1;
        }
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for &i in &ids {
                data.extend_from_slice(nodes[i].value.row(r));
            }
        }
        drop(nodes);
        Ok(self.push(Tensor::from_parts(vec![m, total], data), Op::ConcatCols(ids)))
    }

    /// Row-wise layer normalization: `gain ⊙ (x − mean) / sqrt(var + eps) + bias`
    /// with statistics over each row's n entries.
    pub fn layer_norm(&self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let (ix, ig, ib) = (self.check(x)?, self.check(gain)?, self.check(bias)?);
        let nodes = self.nodes.borrow();
        let (tx, tg, tb) = (&nodes[ix].value, &nodes[ig].value, &nodes[ib].value);
        let (m, n) = tx.dims2();
        if tg.len() != n || tb.len() != n {
            return Err(Error::dim("layer_norm", tx.shape(), tg.shape()));
        }
        let nf = T::from_usize(n).unwrap();
        let mut xhat = Vec::with_capacity(m * n);
        let mut rstd = Vec::with_capacity(m);
        let mut out = Vec::with_capacity(m * n);
        for r in 0..m {
            let row = tx.row(r);
            let mean = row.iter().copied().sum::<T>() / nf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let s = T::one() / (var + eps).sqrt();
            rstd.push(s);
            for (j, &v) in row.iter().enumerate() {
                let h = (v - mean) * s;
                xhat.push(h);
                out.push(tg.data()[j] * h + tb.data()[j]);
            }
        }
        let shape = tx.shape().to_vec();
        drop(nodes);
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::LayerNorm {
                x: ix,
                gain: ig,
                bias: ib,
                xhat,
                rstd,
            },
        ))
    }

    /// Per-row choice: `mask_i · a_i + (1 − mask_i) · b_i`. Rows with a
    /// mask of exactly 1 or 0 copy `a` or `b` bit for bit.
    pub fn select_rows(&self, mask: Var, a: Var, b: Var) -> Result<Var> {
        let (im, ia, ib) = (self.check(mask)?, self.check(a)?, self.check(b)?);
        let nodes = self.nodes.borrow();
        let (tm, ta, tb) = (&nodes[im].value, &nodes[ia].value, &nodes[ib].value);
        let (m, n) = ta.dims2();
        if ta.shape() != tb.shape() || tm.len() != m {
            return Err(Error::dim("select_rows", ta.shape(), tb.shape()));
        }
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            let z = tm.data()[r];
            if z == T::one() {
                data.extend_from_slice(ta.row(r));
            } else if z == T::zero() {
                data.extend_from_slice(tb.row(r));
            } else {
                data.extend(ta.row(r).iter().zip(tb.row(r)).map(|(&x, &y)| z * x + (T::one() - z) * y));
            }
        }
        let shape = ta.shape().to_vec();
        drop(nodes);
        Ok(self.push(Tensor::from_parts(shape, data), Op::Where(im, ia, ib)))
    }

    /// Binary boundary detector: forward `1[hard_sigmoid(x) > 0.5]`,
    /// backward passes the hard-sigmoid slope straight through.
    pub fn boundary(&self, x: Var) -> Result<Var> {
        let (t, ix) = self.unary(x, |v| {
            if hard_sigmoid(v) > T::lit(0.5) {
                T::one()
            } else {
                T::zero()
            }
        })?;
        Ok(self.push(t, Op::Boundary(ix)))
    }

    /// Replays the tape backwards from the scalar `loss`, accumulating
    /// parameter gradients into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<Gradients<T>> {
        let il = self.check(loss)?;
        let nodes = self.nodes.borrow();
        if nodes[il].value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[il].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[il] = Some(Tensor::full(nodes[il].value.shape(), T::one()));
        for i in (0..=il).rev() {
            let Some(g) = grads[i].take() else { continue };
            backprop_node(&nodes, i, &g, &mut grads, store);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }
}

/// Adjoints of every taped value reached from the loss.
pub struct Gradients<T> {
    tape: u64,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.idx).and_then(Option::as_ref)
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn hard_sigmoid<T: Real>(x: T) -> T {
    ((x + T::one()) * T::lit(0.5)).max(T::zero()).min(T::one())
}

fn slot<'a, T: Real>(grads: &'a mut [Option<Tensor<T>>], nodes: &[Node<T>], i: usize) -> &'a mut Tensor<T> {
    grads[i].get_or_insert_with(|| Tensor::zeros(nodes[i].value.shape()))
}

fn acc_map<T: Real>(
    grads: &mut [Option<Tensor<T>>],
    nodes: &[Node<T>],
    i: usize,
    g: &Tensor<T>,
    f: impl Fn(usize, T) -> T,
) {
    let s = slot(grads, nodes, i);
    for (k, (d, &gv)) in s.data_mut().iter_mut().zip(g.data()).enumerate() {
        *d = *d + f(k, gv);
    }
}

fn backprop_node<T: Real>(
    nodes: &[Node<T>],
    i: usize,
    g: &Tensor<T>,
    grads: &mut [Option<Tensor<T>>],
    store: &mut ParamStore<T>,
) {
    let out = &nodes[i].value;
    match &nodes[i].op {
        Op::Leaf => {}
        Op::Param(pid) => {
            let p = store.get_mut(*pid);
            for (d, &gv) in p.grad.data_mut().iter_mut().zip(g.data()) {
                *d = *d + gv;
            }
        }
        &Op::MatMul(a, b) => {
            let ((m, k), (_, n)) = (nodes[a].value.dims2(), nodes[b].value.dims2());
            gemm_nt(m, n, k, g.data(), nodes[b].value.data(), T::one(), slot(grads, nodes, a).data_mut());
            gemm_tn(k, m, n, nodes[a].value.data(), g.data(), T::one(), slot(grads, nodes, b).data_mut());
        }
        &Op::MatMulNt(a, b) => {
            let ((m, k), (n, _)) = (nodes[a].value.dims2(), nodes[b].value.dims2());
            // ga = g(m×n) · b(n×k); gb = gᵀ(n×m) · a(m×k)
            gemm_nn(m, n, k, g.data(), nodes[b].value.data(), T::one(), slot(grads, nodes, a).data_mut());
            gemm_tn(n, m, k, g.data(), nodes[a].value.data(), T::one(), slot(grads, nodes, b).data_mut());
        }
        &Op::Add(a, b) => {
            acc_map(grads, nodes, a, g, |_, gv| gv);
            acc_map(grads, nodes, b, g, |_, gv| gv);
        }
        &Op::Sub(a, b) => {
            acc_map(grads, nodes, a, g, |_, gv| gv);
            acc_map(grads, nodes, b, g, |_, gv| -gv);
        }
        &Op::Mul(a, b) => {
            let (av, bv) = (nodes[a].value.data(), nodes[b].value.data());
            acc_map(grads, nodes, a, g, |k, gv| gv * bv[k]);
            acc_map(grads, nodes, b, g, |k, gv| gv * av[k]);
        }
        &Op::AddRow(a, b) => {
            acc_map(grads, nodes, a, g, |_, gv| gv);
            let n = nodes[b].value.len();
            let s = slot(grads, nodes, b);
            for row in g.data().chunks_exact(n) {
                for (d, &gv) in s.data_mut().iter_mut().zip(row) {
                    *d = *d + gv;
                }
            }
        }
        &Op::MulCol(a, c) => {
            let (_, n) = nodes[a].value.dims2();
            let cv = nodes[c].value.data();
            acc_map(grads, nodes, a, g, |k, gv| gv * cv[k / n]);
            let av = nodes[a].value.data();
            let s = slot(grads, nodes, c);
            for (r, d) in s.data_mut().iter_mut().enumerate() {
                let dot = (0..n).fold(T::zero(), |acc, j| acc + g.data()[r * n + j] * av[r * n + j]);
                *d = *d + dot;
            }
        }
        &Op::Sigmoid(a) => {
            let y = out.data();
            acc_map(grads, nodes, a, g, |k, gv| gv * y[k] * (T::one() - y[k]));
        }
        &Op::Tanh(a) => {
            let y = out.data();
            acc_map(grads, nodes, a, g, |k, gv| gv * (T::one() - y[k] * y[k]));
        }
        &Op::Relu(a) => {
            let x = nodes[a].value.data();
            acc_map(grads, nodes, a, g, |k, gv| if x[k] > T::zero() { gv } else { T::zero() });
        }
        &Op::Softmax(a) => {
            let (_, n) = out.dims2();
            let y = out.data();
            let dots: Vec<T> = y
                .chunks_exact(n)
                .zip(g.data().chunks_exact(n))
                .map(|(yr, gr)| yr.iter().zip(gr).fold(T::zero(), |acc, (&p, &q)| acc + p * q))
                .collect();
            acc_map(grads, nodes, a, g, |k, gv| y[k] * (gv - dots[k / n]));
        }
        Op::SoftmaxNll {
            logits,
            targets,
            weights,
            probs,
        } => {
            let gs = g.item();
            let (_, n) = nodes[*logits].value.dims2();
            let s = slot(grads, nodes, *logits);
            for (r, (row, pr)) in s.data_mut().chunks_exact_mut(n).zip(probs.chunks_exact(n)).enumerate() {
                let w = weights[r] * gs;
                if w == T::zero() {
                    continue;
                }
                for (d, &p) in row.iter_mut().zip(pr) {
                    *d = *d + w * p;
                }
                row[targets[r]] = row[targets[r]] - w;
            }
        }
        &Op::Sum(a) => {
            let gs = g.item();
            let s = slot(grads, nodes, a);
            s.data_mut().iter_mut().for_each(|d| *d = *d + gs);
        }
        Op::GatherRows(src, rows) => {
            let (_, n) = out.dims2();
            let s = slot(grads, nodes, *src);
            for (k, &r) in rows.iter().enumerate() {
                let dst = &mut s.data_mut()[r * n..(r + 1) * n];
                for (d, &gv) in dst.iter_mut().zip(&g.data()[k * n..(k + 1) * n]) {
                    *d = *d + gv;
                }
            }
        }
        &Op::SliceRows(src, start) => {
            let (_, n) = out.dims2();
            let s = slot(grads, nodes, src);
            let dst = &mut s.data_mut()[start * n..start * n + g.len()];
            for (d, &gv) in dst.iter_mut().zip(g.data()) {
                *d = *d + gv;
            }
        }
        &Op::SliceCols(src, start) => {
            let (m, w) = out.dims2();
            let (_, n) = nodes[src].value.dims2();
            let s = slot(grads, nodes, src);
            for r in 0..m {
                for j in 0..w {
                    let d = &mut s.data_mut()[r * n + start + j];
                    *d = *d + g.data()[r * w + j];
                }
            }
        }
        Op::ConcatRows(ids) => {
            let mut offset = 0;
            for &p in ids {
                let len = nodes[p].value.len();
                let s = slot(grads, nodes, p);
                for (d, &gv) in s.data_mut().iter_mut().zip(&g.data()[offset..offset + len]) {
                    *d = *d + gv;
                }
                offset += len;
            }
        }
        Op::ConcatCols(ids) => {
            let (m, total) = out.dims2();
            let mut col = 0;
            for &p in ids {
                let (_, w) = nodes[p].value.dims2();
                let s = slot(grads, nodes, p);
                for r in 0..m {
                    for j in 0..w {
                        let d = &mut s.data_mut()[r * w + j];
                        *d = *d + g.data()[r * total + col + j];
                    }
                }
                col += w;
            }
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            rstd,
        } => {
            let (m, n) = out.dims2();
            let nf = T::from_usize(n).unwrap();
            let gainv = nodes[*gain].value.data().to_vec();
            {
                let sg = slot(grads, nodes, *gain);
                for r in 0..m {
                    for j in 0..n {
                        let d = &mut sg.data_mut()[j];
                        *d = *d + g.data()[r * n + j] * xhat[r * n + j];
                    }
                }
            }
            {
                let sb = slot(grads, nodes, *bias);
                for r in 0..m {
                    for j in 0..n {
                        let d = &mut sb.data_mut()[j];
                        *d = *d + g.data()[r * n + j];
                    }
                }
            }
            let sx = slot(grads, nodes, *x);
            for r in 0..m {
                let gh: Vec<T> = (0..n).map(|j| g.data()[r * n + j] * gainv[j]).collect();
                let xh = &xhat[r * n..(r + 1) * n];
                let mean_g = gh.iter().copied().sum::<T>() / nf;
                let mean_gx = gh.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() / nf;
                for j in 0..n {
                    let d = &mut sx.data_mut()[r * n + j];
                    *d = *d + rstd[r] * (gh[j] - mean_g - xh[j] * mean_gx);
                }
            }
        }
        &Op::Where(mask, a, b) => {
            let (_, n) = out.dims2();
            let zv = nodes[mask].value.data().to_vec();
            acc_map(grads, nodes, a, g, |k, gv| zv[k / n] * gv);
            acc_map(grads, nodes, b, g, |k, gv| (T::one() - zv[k / n]) * gv);
            let (av, bv) = (nodes[a].value.data(), nodes[b].value.data());
            let s = slot(grads, nodes, mask);
            for (r, d) in s.data_mut().iter_mut().enumerate() {
                let dot = (0..n).fold(T::zero(), |acc, j| {
                    let k = r * n + j;
                    acc + (av[k] - bv[k]) * g.data()[k]
                });
                *d = *d + dot;
            }
        }
        &Op::Boundary(x) => {
            let xv = nodes[x].value.data();
            let (lo, hi) = (-T::one(), T::one());
            acc_map(grads, nodes, x, g, |k, gv| {
                if xv[k] > lo && xv[k] < hi {
                    gv * T::lit(0.5)
                } else {
                    T::zero()
                }
            });
        }
    }
}
