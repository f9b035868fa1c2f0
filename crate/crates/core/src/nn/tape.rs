//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node holding its output value and enough
//! information to run its backward rule. [`Tape::backward`] walks the nodes in
//! reverse recording order, visiting each node once and accumulating (never
//! overwriting) gradients into its inputs. Parameters enter the tape through
//! [`Tape::param`], which copies the value out of a [`ParamStore`] once per
//! name; after `backward` the leaf gradients are added back into the store.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::kernels::{matmul_acc, matmul_nt_acc, matmul_tn_acc};
use crate::nn::{ParamStore, Real, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise operations, dispatched by [`Tape::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Mul,
    Sigmoid,
    Tanh,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    AddBias(Var, Var),
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    GatherRows { table: Var, ids: Vec<usize> },
    SoftmaxXent { logits: Var, probs: Vec<T>, targets: Vec<usize>, mask: Vec<bool> },
    Sum(Var),
    Scale(Var, T),
    RowDot(Var, Var),
    ScaleRows(Var, Var),
    MaskedSoftmax { x: Var, mask: Vec<bool> },
    BlendRows { new: Var, old: Var, take_new: Vec<bool> },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Summed cross-entropy over the unmasked rows of a logits matrix.
#[derive(Debug, Clone, Copy)]
pub struct XentLoss {
    /// Scalar sum of `-log p(target)` over unmasked rows.
    pub sum: Var,
    /// Number of unmasked rows.
    pub tokens: usize,
}

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: BTreeMap<String, Var>,
    grads: Vec<Option<Vec<T>>>,
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::Shape {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: BTreeMap::new(),
            grads: Vec::new(),
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

    /// Gradient of the last `backward` call with respect to `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Variables bound through [`Tape::param`], by name.
    pub fn params(&self) -> &BTreeMap<String, Var> {
        &self.params
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dims2()
    }

    fn vals(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.values()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: value.without_grad(),
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable leaf not backed by the parameter store.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: value.without_grad(),
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Binds the named parameter. Repeated calls return the same leaf so that
    /// every use accumulates into one gradient.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let t = store
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?;
        let v = self.input(t.clone());
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    /// Copies the value into a fresh leaf that blocks gradient flow.
    pub fn detach(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.clone();
        self.constant(value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![T::zero(); m * n];
        matmul_acc(self.vals(a), self.vals(b), &mut out, m, k, n);
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(t, Op::MatMul(a, b), &[a, b]))
    }

    fn zip_same(&self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        let vals = self
            .vals(a)
            .iter()
            .zip(self.vals(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(sa.to_vec(), vals)
    }

    fn map(&self, a: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let vals = self.vals(a).iter().map(|&x| f(x)).collect();
        Tensor::new(self.shape(a).to_vec(), vals).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), &[a, b]))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.map(a, sigmoid);
        self.push(t, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.map(a, |x| x.tanh());
        self.push(t, Op::Tanh(a), &[a])
    }

    pub fn elementwise(&mut self, op: Elementwise, inputs: &[Var]) -> Result<Var> {
        match (op, inputs) {
            (Elementwise::Add, &[a, b]) => self.add(a, b),
            (Elementwise::Mul, &[a, b]) => self.mul(a, b),
            (Elementwise::Sigmoid, &[a]) => Ok(self.sigmoid(a)),
            (Elementwise::Tanh, &[a]) => Ok(self.tanh(a)),
            _ => Err(Error::Invalid(format!(
                "{op:?} does not take {} inputs",
                inputs.len()
            ))),
        }
    }

    /// Adds a length-`n` bias vector to every row of an `m×n` matrix.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.shape(x).len() != 2 || self.nodes[b.0].value.numel() != n {
            return Err(shape_err("add_bias", self.shape(x), self.shape(b)));
        }
        let bias = self.vals(b);
        let mut out = self.vals(x).to_vec();
        for row in out.chunks_mut(n) {
            for (o, &bv) in row.iter_mut().zip(bias) {
                *o += bv;
            }
        }
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(t, Op::AddBias(x, b), &[x, b]))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.dims(x);
        if len == 0 || start + len > n {
            return Err(shape_err("slice_cols", self.shape(x), &[start, len]));
        }
        let src = self.vals(x);
        let mut out = Vec::with_capacity(m * len);
        for i in 0..m {
            out.extend_from_slice(&src[i * n + start..i * n + start + len]);
        }
        let t = Tensor::new(vec![m, len], out)?;
        Ok(self.push(t, Op::SliceCols { x, start }, &[x]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Invalid("concat_cols of nothing".into()));
        };
        let m = self.dims(first).0;
        let mut width = 0;
        for &p in parts {
            if self.shape(p).len() != 2 || self.dims(p).0 != m {
                return Err(shape_err("concat_cols", self.shape(first), self.shape(p)));
            }
            width += self.dims(p).1;
        }
        let mut out = Vec::with_capacity(m * width);
        for i in 0..m {
            for &p in parts {
                out.extend_from_slice(self.nodes[p.0].value.row(i));
            }
        }
        let t = Tensor::new(vec![m, width], out)?;
        Ok(self.push(t, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Row lookup: output row `r` is `table[ids[r]]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, e) = self.dims(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Index {
                what: "embedding row",
                index: bad,
                size: v,
            });
        }
        if ids.is_empty() {
            return Err(Error::Invalid("gather_rows with no ids".into()));
        }
        let src = self.vals(table);
        let mut out = Vec::with_capacity(ids.len() * e);
        for &i in ids {
            out.extend_from_slice(&src[i * e..(i + 1) * e]);
        }
        let t = Tensor::new(vec![ids.len(), e], out)?;
        Ok(self.push(t, Op::GatherRows { table, ids: ids.to_vec() }, &[table]))
    }

    /// `Σ_{rows with mask} -log softmax(logits[row])[targets[row]]`, computed
    /// with max subtraction.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Result<XentLoss> {
        let (b, v) = self.dims(logits);
        if targets.len() != b || mask.len() != b {
            return Err(shape_err("softmax_cross_entropy", self.shape(logits), &[targets.len(), mask.len()]));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= v) {
            return Err(Error::Index {
                what: "target",
                index: bad,
                size: v,
            });
        }
        let x = self.vals(logits);
        let mut probs = vec![T::zero(); b * v];
        let mut total = T::zero();
        let mut tokens = 0;
        for i in 0..b {
            if !mask[i] {
                continue;
            }
            tokens += 1;
            let row = &x[i * v..(i + 1) * v];
            let lse = log_sum_exp(row);
            total += lse - row[targets[i]];
            for (p, &z) in probs[i * v..(i + 1) * v].iter_mut().zip(row) {
                *p = (z - lse).exp();
            }
        }
        let op = Op::SoftmaxXent {
            logits,
            probs,
            targets: targets.to_vec(),
            mask: mask.to_vec(),
        };
        let sum = self.push(Tensor::scalar(total), op, &[logits]);
        Ok(XentLoss { sum, tokens })
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.vals(a).iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let t = self.map(a, |x| x * c);
        self.push(t, Op::Scale(a, c), &[a])
    }

    /// Per-row dot product of two `m×n` matrices, giving `m×1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb || sa.len() != 2 {
            return Err(shape_err("row_dot", sa, sb));
        }
        let (m, n) = (sa[0], sa[1]);
        let (x, y) = (self.vals(a), self.vals(b));
        let out = (0..m)
            .map(|i| {
                x[i * n..(i + 1) * n]
                    .iter()
                    .zip(&y[i * n..(i + 1) * n])
                    .fold(T::zero(), |s, (&p, &q)| s + p * q)
            })
            .collect();
        let t = Tensor::new(vec![m, 1], out)?;
        Ok(self.push(t, Op::RowDot(a, b), &[a, b]))
    }

    /// Multiplies row `i` of `x (m×n)` by `s[i]` where `s` is `m×1`.
    pub fn scale_rows(&mut self, x: Var, s: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.shape(x).len() != 2 || self.shape(s) != [m, 1] {
            return Err(shape_err("scale_rows", self.shape(x), self.shape(s)));
        }
        let sv = self.vals(s);
        let out = self
            .vals(x)
            .iter()
            .enumerate()
            .map(|(idx, &v)| v * sv[idx / n])
            .collect();
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(t, Op::ScaleRows(x, s), &[x, s]))
    }

    /// Row-wise softmax over the columns whose `mask` entry is set; masked
    /// columns get weight exactly zero. `mask` is row-major `m×n`.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Result<Var> {
        let (m, n) = self.dims(x);
        if mask.len() != m * n {
            return Err(shape_err("masked_softmax", self.shape(x), &[mask.len()]));
        }
        let src = self.vals(x);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let mrow = &mask[i * n..(i + 1) * n];
            let Some(max) = row
                .iter()
                .zip(mrow)
                .filter(|(_, &k)| k)
                .map(|(&v, _)| v)
                .reduce(T::max)
            else {
                return Err(Error::Invalid(format!(
                    "masked_softmax: row {i} has no unmasked position"
                )));
            };
            let mut z = T::zero();
            for j in 0..n {
                if mrow[j] {
                    let e = (row[j] - max).exp();
                    out[i * n + j] = e;
                    z += e;
                }
            }
            for o in &mut out[i * n..(i + 1) * n] {
                *o /= z;
            }
        }
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(t, Op::MaskedSoftmax { x, mask: mask.to_vec() }, &[x]))
    }

    /// Row `i` comes from `new` when `take_new[i]`, otherwise from `old`.
    pub fn blend_rows(&mut self, new: Var, old: Var, take_new: &[bool]) -> Result<Var> {
        let (sn, so) = (self.shape(new), self.shape(old));
        if sn != so || sn.len() != 2 || take_new.len() != sn[0] {
            return Err(shape_err("blend_rows", sn, so));
        }
        let n = sn[1];
        let (a, b) = (self.vals(new), self.vals(old));
        let mut out = Vec::with_capacity(a.len());
        for (i, &k) in take_new.iter().enumerate() {
            let src = if k { a } else { b };
            out.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        let t = Tensor::new(sn.to_vec(), out)?;
        Ok(self.push(
            t,
            Op::BlendRows {
                new,
                old,
                take_new: take_new.to_vec(),
            },
            &[new, old],
        ))
    }

    /// Propagates d(loss)/d(node) to every node reachable from `loss` and adds
    /// the gradients of bound parameters into `store`. Every store parameter
    /// ends up with a gradient slot; unreachable ones receive zeros.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<T>) -> Result<()> {
        self.backward_only(loss)?;
        for (_, t) in store.iter_mut() {
            if t.grad().is_none() {
                t.zero_grad();
            }
        }
        for (name, &v) in &self.params {
            if let Some(g) = self.grads[v.0].as_deref() {
                if let Some(t) = store.get_mut(name) {
                    t.accumulate_grad(g);
                }
            }
        }
        Ok(())
    }

    /// Like [`Tape::backward`] but only fills the tape's own gradient slots.
    pub fn backward_only(&mut self, loss: Var) -> Result<()> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::Invalid("loss is not recorded on this tape".into()));
        }
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::Invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.backward_node(node, &gy, &mut grads);
            grads[i] = Some(gy);
        }
        self.grads = grads;
        Ok(())
    }

    fn backward_node(&self, node: &Node<T>, gy: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let y = node.value.values();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (m, k) = nodes[a.0].value.dims2();
                let n = nodes[b.0].value.dims2().1;
                let (av, bv) = (nodes[a.0].value.values(), nodes[b.0].value.values());
                if let Some(ga) = slot(nodes, grads, a) {
                    matmul_nt_acc(gy, bv, ga, m, n, k);
                }
                if let Some(gb) = slot(nodes, grads, b) {
                    matmul_tn_acc(av, gy, gb, m, k, n);
                }
            }
            &Op::Add(a, b) => {
                for v in [a, b] {
                    if let Some(g) = slot(nodes, grads, v) {
                        add_into(g, gy);
                    }
                }
            }
            &Op::Sub(a, b) => {
                if let Some(g) = slot(nodes, grads, a) {
                    add_into(g, gy);
                }
                if let Some(g) = slot(nodes, grads, b) {
                    g.iter_mut().zip(gy).for_each(|(o, &d)| *o -= d);
                }
            }
            &Op::Mul(a, b) => {
                let (av, bv) = (nodes[a.0].value.values(), nodes[b.0].value.values());
                if let Some(g) = slot(nodes, grads, a) {
                    for ((o, &d), &w) in g.iter_mut().zip(gy).zip(bv) {
                        *o += d * w;
                    }
                }
                if let Some(g) = slot(nodes, grads, b) {
                    for ((o, &d), &w) in g.iter_mut().zip(gy).zip(av) {
                        *o += d * w;
                    }
                }
            }
            &Op::Sigmoid(a) => {
                if let Some(g) = slot(nodes, grads, a) {
                    for ((o, &d), &s) in g.iter_mut().zip(gy).zip(y) {
                        *o += d * s * (T::one() - s);
                    }
                }
            }
            &Op::Tanh(a) => {
                if let Some(g) = slot(nodes, grads, a) {
                    for ((o, &d), &t) in g.iter_mut().zip(gy).zip(y) {
                        *o += d * (T::one() - t * t);
                    }
                }
            }
            &Op::AddBias(x, b) => {
                if let Some(g) = slot(nodes, grads, x) {
                    add_into(g, gy);
                }
                if let Some(g) = slot(nodes, grads, b) {
                    let n = g.len();
                    for row in gy.chunks(n) {
                        add_into(g, row);
                    }
                }
            }
            &Op::SliceCols { x, start } => {
                let n = nodes[x.0].value.dims2().1;
                let len = node.value.dims2().1;
                if let Some(g) = slot(nodes, grads, x) {
                    for (i, row) in gy.chunks(len).enumerate() {
                        add_into(&mut g[i * n + start..i * n + start + len], row);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let width = node.value.dims2().1;
                let mut offset = 0;
                for &p in parts {
                    let w = nodes[p.0].value.dims2().1;
                    if let Some(g) = slot(nodes, grads, p) {
                        for (i, row) in g.chunks_mut(w).enumerate() {
                            add_into(row, &gy[i * width + offset..i * width + offset + w]);
                        }
                    }
                    offset += w;
                }
            }
            Op::GatherRows { table, ids } => {
                let e = nodes[table.0].value.dims2().1;
                if let Some(g) = slot(nodes, grads, *table) {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut g[id * e..(id + 1) * e], &gy[r * e..(r + 1) * e]);
                    }
                }
            }
            Op::SoftmaxXent {
                logits,
                probs,
                targets,
                mask,
            } => {
                let v = nodes[logits.0].value.dims2().1;
                let d = gy[0];
                if let Some(g) = slot(nodes, grads, *logits) {
                    for (i, (&t, &keep)) in targets.iter().zip(mask).enumerate() {
                        if !keep {
                            continue;
                        }
                        let row = &mut g[i * v..(i + 1) * v];
                        for (o, &p) in row.iter_mut().zip(&probs[i * v..(i + 1) * v]) {
                            *o += d * p;
                        }
                        row[t] -= d;
                    }
                }
            }
            &Op::Sum(a) => {
                if let Some(g) = slot(nodes, grads, a) {
                    g.iter_mut().for_each(|o| *o += gy[0]);
                }
            }
            &Op::Scale(a, c) => {
                if let Some(g) = slot(nodes, grads, a) {
                    g.iter_mut().zip(gy).for_each(|(o, &d)| *o += c * d);
                }
            }
            &Op::RowDot(a, b) => {
                let n = nodes[a.0].value.dims2().1;
                let (av, bv) = (nodes[a.0].value.values(), nodes[b.0].value.values());
                for (target, other) in [(a, bv), (b, av)] {
                    if let Some(g) = slot(nodes, grads, target) {
                        for (i, &d) in gy.iter().enumerate() {
                            for (o, &w) in g[i * n..(i + 1) * n].iter_mut().zip(&other[i * n..(i + 1) * n]) {
                                *o += d * w;
                            }
                        }
                    }
                }
            }
            &Op::ScaleRows(x, s) => {
                let n = nodes[x.0].value.dims2().1;
                let (xv, sv) = (nodes[x.0].value.values(), nodes[s.0].value.values());
                if let Some(g) = slot(nodes, grads, x) {
                    for (idx, (o, &d)) in g.iter_mut().zip(gy).enumerate() {
                        *o += d * sv[idx / n];
                    }
                }
                if let Some(g) = slot(nodes, grads, s) {
                    for (i, o) in g.iter_mut().enumerate() {
                        let mut acc = T::zero();
                        for j in 0..n {
                            acc += gy[i * n + j] * xv[i * n + j];
                        }
                        *o += acc;
                    }
                }
            }
            Op::MaskedSoftmax { x, mask } => {
                let n = node.value.dims2().1;
                if let Some(g) = slot(nodes, grads, *x) {
                    for (i, row) in g.chunks_mut(n).enumerate() {
                        let yr = &y[i * n..(i + 1) * n];
                        let gr = &gy[i * n..(i + 1) * n];
                        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for j in 0..n {
                            if mask[i * n + j] {
                                row[j] += yr[j] * (gr[j] - dot);
                            }
                        }
                    }
                }
            }
            Op::BlendRows { new, old, take_new } => {
                let n = node.value.dims2().1;
                for (target, want) in [(*new, true), (*old, false)] {
                    if let Some(g) = slot(nodes, grads, target) {
                        for (i, &k) in take_new.iter().enumerate() {
                            if k == want {
                                add_into(&mut g[i * n..(i + 1) * n], &gy[i * n..(i + 1) * n]);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Accumulator for input `v`, or None when `v` needs no gradient.
fn slot<'a, T: Real>(nodes: &[Node<T>], grads: &'a mut [Option<Vec<T>>], v: Var) -> Option<&'a mut Vec<T>> {
    if !nodes[v.0].needs_grad {
        return None;
    }
    let n = nodes[v.0].value.numel();
    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); n]))
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (o, &d) in dst.iter_mut().zip(src) {
        *o += d;
    }
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn log_sum_exp<T: Real>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let s: T = row.iter().map(|&z| (z - max).exp()).sum();
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, v).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_cases() {
        let mut g = Tape::<f64>::new();
        let i2 = g.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let m = g.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let p = g.matmul(i2, m).unwrap();
        assert_eq!(g.value(p).values(), &[1.0, 2.0, 3.0, 4.0]);

        let a = g.constant(t(&[1, 2], &[1.0, 2.0]));
        let b = g.constant(t(&[2, 1], &[3.0, 4.0]));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).values(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Tape::<f64>::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        let msg = g.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("matmul"), "{msg}");
    }

    #[test]
    fn elementwise_basics() {
        let mut g = Tape::<f64>::new();
        let z = g.constant(t(&[1], &[0.0]));
        let s = g.elementwise(Elementwise::Sigmoid, &[z]).unwrap();
        let th = g.elementwise(Elementwise::Tanh, &[z]).unwrap();
        assert_eq!(g.value(s).item(), 0.5);
        assert_eq!(g.value(th).item(), 0.0);
        let a = g.constant(t(&[2], &[1.0, 2.0]));
        let b = g.constant(t(&[2], &[3.0, 4.0]));
        let c = g.elementwise(Elementwise::Add, &[a, b]).unwrap();
        assert_eq!(g.value(c).values(), &[4.0, 6.0]);
        let short = g.constant(t(&[3], &[1.0, 2.0, 3.0]));
        assert!(g.add(a, short).is_err());
        assert!(g.elementwise(Elementwise::Tanh, &[a, b]).is_err());
    }

    #[test]
    fn cross_entropy_uniform_and_saturated() {
        let mut g = Tape::<f64>::new();
        let l = g.constant(t(&[1, 4], &[0.0; 4]));
        let x = g.softmax_cross_entropy(l, &[2], &[true]).unwrap();
        assert!((g.value(x.sum).item() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(x.tokens, 1);

        let l = g.constant(t(&[1, 2], &[1000.0, 0.0]));
        let x = g.softmax_cross_entropy(l, &[0], &[true]).unwrap();
        assert!(g.value(x.sum).item().abs() < 1e-6);

        let l = g.constant(t(&[1, 2], &[0.0, 0.0]));
        assert!(g.softmax_cross_entropy(l, &[2], &[true]).is_err());
    }

    #[test]
    fn masked_rows_contribute_nothing() {
        let mut g = Tape::<f64>::new();
        let l = g.input(t(&[2, 3], &[0.3, -1.0, 2.0, 5.0, 1.0, 0.0]));
        let x = g.softmax_cross_entropy(l, &[1, 0], &[true, false]).unwrap();
        let mut store = ParamStore::new();
        g.backward(x.sum, &mut store).unwrap();
        assert_eq!(&g.grad(l).unwrap()[3..], &[0.0, 0.0, 0.0]);
        let row: f64 = g.grad(l).unwrap()[..3].iter().sum();
        assert!(row.abs() < 1e-12);
    }

    #[test]
    fn backward_sum_and_half_square() {
        let mut store = ParamStore::new();
        store.insert("p", t(&[3], &[1.0, -2.0, 0.5])).unwrap();
        let mut g = Tape::new();
        let p = g.param(&store, "p").unwrap();
        let s = g.sum(p);
        g.backward(s, &mut store).unwrap();
        assert_eq!(store.get("p").unwrap().grad().unwrap(), &[1.0, 1.0, 1.0]);

        store.zero_grad();
        let mut g = Tape::new();
        let p = g.param(&store, "p").unwrap();
        let sq = g.mul(p, p).unwrap();
        let s = g.sum(sq);
        let half = g.scale(s, 0.5);
        g.backward(half, &mut store).unwrap();
        assert_eq!(store.get("p").unwrap().grad().unwrap(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_zero_fills_unreached() {
        let mut store = ParamStore::new();
        store.insert("a", t(&[2], &[1.0, 2.0])).unwrap();
        store.insert("b", t(&[2], &[1.0, 2.0])).unwrap();
        let mut g = Tape::new();
        let a = g.param(&store, "a").unwrap();
        assert!(g.backward(a, &mut store).is_err());
        let s = g.sum(a);
        g.backward(s, &mut store).unwrap();
        assert_eq!(store.get("b").unwrap().grad().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_accumulates_into_store() {
        let mut store = ParamStore::new();
        store.insert("p", t(&[1], &[3.0])).unwrap();
        for _ in 0..2 {
            let mut g = Tape::new();
            let p = g.param(&store, "p").unwrap();
            let s = g.sum(p);
            g.backward(s, &mut store).unwrap();
        }
        assert_eq!(store.get("p").unwrap().grad().unwrap(), &[2.0]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut store = ParamStore::new();
        store.insert("p", t(&[2], &[1.0, 2.0])).unwrap();
        let mut g = Tape::new();
        let p = g.param(&store, "p").unwrap();
        let d = g.detach(p);
        let prod = g.mul(p, d).unwrap();
        let s = g.sum(prod);
        g.backward(s, &mut store).unwrap();
        // Only the non-detached factor contributes: d/dp (p * const) = const.
        assert_eq!(store.get("p").unwrap().grad().unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn masked_softmax_rejects_fully_masked_row() {
        let mut g = Tape::<f64>::new();
        let x = g.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        assert!(g.masked_softmax(x, &[true, false, false, false]).is_err());
        let w = g.masked_softmax(x, &[true, false, true, true]).unwrap();
        let v = g.value(w).values();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 0.0);
        assert!((v[2] + v[3] - 1.0).abs() < 1e-12);
    }
}
