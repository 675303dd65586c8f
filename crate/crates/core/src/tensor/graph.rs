//! Tape of tensor operations with reverse-mode gradients.
//!
//! A [`Graph`] borrows a [`ParamStore`] and records every operation applied
//! to [`Var`] handles. [`Graph::backward`] walks the tape in reverse and
//! returns the gradient of a scalar output with respect to every parameter
//! that contributed to it.

use super::{gelu, gelu_grad, sigmoid, softmax, Gradients, ParamId, ParamStore, Scalar, Tensor, TensorError};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Param(ParamId),
    Lookup { param: ParamId, row: usize },
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddN(Vec<Var>),
    Scale(Var, T),
    ScaleBy(Var, Var),
    OneMinus(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Sigmoid(Var),
    Tanh(Var),
    Gelu(Var),
    Softmax(Var),
    Log { x: Var, lo: T, hi: T },
    Dot(Var, Var),
    Sum(Var),
    Pick(Var, usize),
    ScatterAdd { base: Var, src: Var, index: Vec<usize> },
    WeightedSum { weights: Var, vectors: Vec<Var> },
    Map { x: Var, grad: fn(T) -> T },
}

struct Node<T> {
    /// `None` for parameter nodes, whose value lives in the store.
    value: Option<Tensor<T>>,
    op: Op<T>,
}

pub struct Graph<'p, T> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
}

fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> TensorError {
    TensorError::Shape {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

fn add_into<T: Scalar>(acc: &mut [T], g: &[T]) {
    for (a, &b) in acc.iter_mut().zip(g) {
        *a = *a + b;
    }
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            (None, _) => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn data(&self, v: Var) -> &[T] {
        self.value(v).data()
    }

    /// First element of a value, for scalars.
    pub fn scalar(&self, v: Var) -> T {
        self.data(v)[0]
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    /// A constant input (no gradient flows out of the graph from it).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    /// Row `row` of a 2-D parameter, as a vector.
    pub fn lookup(&mut self, id: ParamId, row: usize) -> Result<Var, TensorError> {
        let table = self.params.get(id);
        if table.shape().len() != 2 || row >= table.shape()[0] {
            return Err(TensorError::Index {
                op: "lookup",
                index: row,
                len: table.shape().first().copied().unwrap_or(0),
            });
        }
        let value = Tensor::vector(table.row(row).to_vec());
        Ok(self.push(value, Op::Lookup { param: id, row }))
    }

    /// `w · x` for `w` of shape `[m, n]` and `x` of length `n`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var, TensorError> {
        let (ws, xs) = (self.shape(w), self.shape(x));
        if ws.len() != 2 || xs.len() != 1 || ws[1] != xs[0] {
            return Err(shape_err("matvec", ws, xs));
        }
        let (m, n) = (ws[0], ws[1]);
        let wd = self.data(w);
        let xd = self.data(x);
        let out = (0..m)
            .map(|i| {
                wd[i * n..(i + 1) * n]
                    .iter()
                    .zip(xd)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(w, x)))
    }

    fn zip_with(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>, TensorError> {
        self.same_shape(op, a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(self.shape(a).to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = self.zip_with("add", a, b, |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = self.zip_with("sub", a, b, |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = self.zip_with("mul", a, b, |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// Sum of equally shaped values.
    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let first = *xs.first().ok_or_else(|| shape_err("add_n", &[], &[]))?;
        let mut acc = self.value(first).clone();
        for &x in &xs[1..] {
            self.same_shape("add_n", first, x)?;
            add_into(acc.data_mut(), self.data(x));
        }
        Ok(self.push(acc, Op::AddN(xs.to_vec())))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|e| *e = *e * c);
        self.push(v, Op::Scale(x, c))
    }

    /// `s * x` where `s` is a one-element value.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var, TensorError> {
        if self.value(s).len() != 1 {
            return Err(shape_err("scale_by", self.shape(x), self.shape(s)));
        }
        let c = self.scalar(s);
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|e| *e = *e * c);
        Ok(self.push(v, Op::ScaleBy(x, s)))
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|e| *e = T::one() - *e);
        self.push(v, Op::OneMinus(x))
    }

    /// Concatenation of vectors.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let mut out = Vec::new();
        for &x in xs {
            if self.shape(x).len() != 1 {
                return Err(shape_err("concat", self.shape(x), &[]));
            }
            out.extend_from_slice(self.data(x));
        }
        Ok(self.push(Tensor::vector(out), Op::Concat(xs.to_vec())))
    }

    /// Elements `start..start + len` of a vector.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let n = self.value(x).len();
        if start + len > n {
            return Err(TensorError::Index {
                op: "slice",
                index: start + len,
                len: n,
            });
        }
        let v = Tensor::vector(self.data(x)[start..start + len].to_vec());
        Ok(self.push(v, Op::Slice(x, start)))
    }

    fn map_value(&self, x: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|e| *e = f(*e));
        v
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.map_value(x, sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.map_value(x, T::tanh);
        self.push(v, Op::Tanh(x))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.map_value(x, gelu);
        self.push(v, Op::Gelu(x))
    }

    /// Elementwise function with a caller-supplied derivative.
    pub fn map(&mut self, x: Var, f: fn(T) -> T, grad: fn(T) -> T) -> Var {
        let v = self.map_value(x, f);
        self.push(v, Op::Map { x, grad })
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var, TensorError> {
        if self.shape(x).len() != 1 || self.value(x).is_empty() {
            return Err(shape_err("softmax", self.shape(x), &[]));
        }
        let v = Tensor::vector(softmax(self.data(x)));
        Ok(self.push(v, Op::Softmax(x)))
    }

    /// Natural log after clamping the input to `[lo, hi]`; the gradient is
    /// zero where clamping is active.
    pub fn log_clamped(&mut self, x: Var, lo: T, hi: T) -> Var {
        let v = self.map_value(x, |e| e.max(lo).min(hi).ln());
        self.push(v, Op::Log { x, lo, hi })
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.log_clamped(x, T::min_positive_value(), T::infinity())
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("dot", a, b)?;
        let s = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Element `i` of a vector as a scalar.
    pub fn pick(&mut self, x: Var, i: usize) -> Result<Var, TensorError> {
        let n = self.value(x).len();
        let v = *self.data(x).get(i).ok_or(TensorError::Index {
            op: "pick",
            index: i,
            len: n,
        })?;
        Ok(self.push(Tensor::scalar(v), Op::Pick(x, i)))
    }

    /// `out[j] = base[j] + Σ_{i: index[i] = j} src[i]`, with `base`
    /// zero-padded to `out_len`.
    pub fn scatter_add(&mut self, base: Var, src: Var, index: &[usize], out_len: usize) -> Result<Var, TensorError> {
        let b = self.data(base);
        let s = self.data(src);
        if s.len() != index.len() || b.len() > out_len {
            return Err(shape_err("scatter_add", self.shape(src), &[index.len()]));
        }
        let mut out = vec![T::zero(); out_len];
        out[..b.len()].copy_from_slice(b);
        for (&j, &v) in index.iter().zip(s) {
            if j >= out_len {
                return Err(TensorError::Index {
                    op: "scatter_add",
                    index: j,
                    len: out_len,
                });
            }
            out[j] = out[j] + v;
        }
        Ok(self.push(
            Tensor::vector(out),
            Op::ScatterAdd {
                base,
                src,
                index: index.to_vec(),
            },
        ))
    }

    /// `Σ_i weights[i] · vectors[i]`.
    pub fn weighted_sum(&mut self, weights: Var, vectors: &[Var]) -> Result<Var, TensorError> {
        let w = self.data(weights);
        if w.len() != vectors.len() || vectors.is_empty() {
            return Err(shape_err("weighted_sum", self.shape(weights), &[vectors.len()]));
        }
        let dim = self.value(vectors[0]).len();
        let mut out = vec![T::zero(); dim];
        for (&wi, &v) in w.iter().zip(vectors) {
            let d = self.data(v);
            if d.len() != dim {
                return Err(shape_err("weighted_sum", &[dim], self.shape(v)));
            }
            for (o, &x) in out.iter_mut().zip(d) {
                *o = *o + wi * x;
            }
        }
        Ok(self.push(
            Tensor::vector(out),
            Op::WeightedSum {
                weights,
                vectors: vectors.to_vec(),
            },
        ))
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, TensorError> {
        if self.value(loss).len() != 1 {
            return Err(shape_err("backward", self.shape(loss), &[1]));
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![T::one()]);
        let mut out = Gradients::new(self.params.len());

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            macro_rules! acc {
                ($v:expr) => {{
                    let v: Var = $v;
                    let len = self.value(v).len();
                    grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
                }};
            }
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let len = self.params.get(*id).len();
                    add_into(out.buffer(*id, len), &g);
                }
                Op::Lookup { param, row } => {
                    let table = self.params.get(*param);
                    let cols = table.shape()[1];
                    let buf = out.buffer(*param, table.len());
                    add_into(&mut buf[row * cols..(row + 1) * cols], &g);
                }
                Op::MatVec(w, x) => {
                    let n = self.value(*x).len();
                    let wd = self.data(*w);
                    let xd = self.data(*x);
                    let gx = acc!(*x);
                    for (i, &gi) in g.iter().enumerate() {
                        if gi != T::zero() {
                            for (gxj, &wij) in gx.iter_mut().zip(&wd[i * n..(i + 1) * n]) {
                                *gxj = *gxj + gi * wij;
                            }
                        }
                    }
                    let gw = acc!(*w);
                    for (i, &gi) in g.iter().enumerate() {
                        if gi != T::zero() {
                            for (gwij, &xj) in gw[i * n..(i + 1) * n].iter_mut().zip(xd) {
                                *gwij = *gwij + gi * xj;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(acc!(*a), &g);
                    add_into(acc!(*b), &g);
                }
                Op::Sub(a, b) => {
                    add_into(acc!(*a), &g);
                    for (x, &gi) in acc!(*b).iter_mut().zip(&g) {
                        *x = *x - gi;
                    }
                }
                Op::Mul(a, b) => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    for ((x, &gi), &bv) in acc!(*a).iter_mut().zip(&g).zip(bd) {
                        *x = *x + gi * bv;
                    }
                    for ((x, &gi), &av) in acc!(*b).iter_mut().zip(&g).zip(ad) {
                        *x = *x + gi * av;
                    }
                }
                Op::AddN(xs) => {
                    for &x in xs {
                        add_into(acc!(x), &g);
                    }
                }
                Op::Scale(x, c) => {
                    for (e, &gi) in acc!(*x).iter_mut().zip(&g) {
                        *e = *e + gi * *c;
                    }
                }
                Op::ScaleBy(x, s) => {
                    let c = self.scalar(*s);
                    let xd = self.data(*x);
                    for (e, &gi) in acc!(*x).iter_mut().zip(&g) {
                        *e = *e + gi * c;
                    }
                    let gs = g.iter().zip(xd).fold(T::zero(), |a, (&gi, &xi)| a + gi * xi);
                    let es = &mut acc!(*s)[0];
                    *es = *es + gs;
                }
                Op::OneMinus(x) => {
                    for (e, &gi) in acc!(*x).iter_mut().zip(&g) {
                        *e = *e - gi;
                    }
                }
                Op::Concat(xs) => {
                    let mut offset = 0;
                    for &x in xs {
                        let n = self.value(x).len();
                        add_into(acc!(x), &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Slice(x, start) => {
                    let n = g.len();
                    add_into(&mut acc!(*x)[*start..*start + n], &g);
                }
                Op::Sigmoid(x) => {
                    let y = node.value.as_ref().expect("value").data();
                    for ((e, &gi), &yi) in acc!(*x).iter_mut().zip(&g).zip(y) {
                        *e = *e + gi * yi * (T::one() - yi);
                    }
                }
                Op::Tanh(x) => {
                    let y = node.value.as_ref().expect("value").data();
                    for ((e, &gi), &yi) in acc!(*x).iter_mut().zip(&g).zip(y) {
                        *e = *e + gi * (T::one() - yi * yi);
                    }
                }
                Op::Gelu(x) => {
                    let xd = self.data(*x);
                    for ((e, &gi), &xi) in acc!(*x).iter_mut().zip(&g).zip(xd) {
                        *e = *e + gi * gelu_grad(xi);
                    }
                }
                Op::Map { x, grad } => {
                    let xd = self.data(*x);
                    for ((e, &gi), &xi) in acc!(*x).iter_mut().zip(&g).zip(xd) {
                        *e = *e + gi * grad(xi);
                    }
                }
                Op::Softmax(x) => {
                    let y = node.value.as_ref().expect("value").data();
                    let gy = g.iter().zip(y).fold(T::zero(), |a, (&gi, &yi)| a + gi * yi);
                    for ((e, &gi), &yi) in acc!(*x).iter_mut().zip(&g).zip(y) {
                        *e = *e + yi * (gi - gy);
                    }
                }
                Op::Log { x, lo, hi } => {
                    let xd = self.data(*x);
                    for ((e, &gi), &xi) in acc!(*x).iter_mut().zip(&g).zip(xd) {
                        if xi >= *lo && xi <= *hi {
                            *e = *e + gi / xi;
                        }
                    }
                }
                Op::Dot(a, b) => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    for (e, &bv) in acc!(*a).iter_mut().zip(bd) {
                        *e = *e + g[0] * bv;
                    }
                    for (e, &av) in acc!(*b).iter_mut().zip(ad) {
                        *e = *e + g[0] * av;
                    }
                }
                Op::Sum(x) => {
                    for e in acc!(*x).iter_mut() {
                        *e = *e + g[0];
                    }
                }
                Op::Pick(x, i) => {
                    let e = &mut acc!(*x)[*i];
                    *e = *e + g[0];
                }
                Op::ScatterAdd { base, src, index } => {
                    let n = self.value(*base).len();
                    add_into(acc!(*base), &g[..n]);
                    for (e, &j) in acc!(*src).iter_mut().zip(index) {
                        *e = *e + g[j];
                    }
                }
                Op::WeightedSum { weights, vectors } => {
                    let w = self.data(*weights);
                    for (k, &v) in vectors.iter().enumerate() {
                        let vd = self.data(v);
                        let gw = g.iter().zip(vd).fold(T::zero(), |a, (&gi, &x)| a + gi * x);
                        let ew = &mut acc!(*weights)[k];
                        *ew = *ew + gw;
                        let wk = w[k];
                        for (e, &gi) in acc!(v).iter_mut().zip(&g) {
                            *e = *e + wk * gi;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
