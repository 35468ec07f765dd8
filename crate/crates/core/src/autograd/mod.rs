//! Minimal reverse-mode automatic differentiation over `f64` vectors.
//!
//! Parameters live in a [`ParamSet`] (named dense matrices). A [`Graph`]
//! records one forward computation over vector-valued nodes; parameters
//! enter only through dedicated ops (`linear`, `embed`, `param`), so the
//! graph never copies a weight matrix. [`Graph::backward`] accumulates
//! parameter gradients into a [`Grads`] buffer shaped like the set.

mod nn;
mod optim;

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use nn::{BiLstm, Encoded, Lstm};
pub use optim::{clip_grad_norm, Adam, AdamConfig};

/// Row-major dense matrix. Vectors are stored as `rows x 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn uniform<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-scale..=scale))
            .collect();
        Tensor { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable matrices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.values
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn all_finite(&self) -> bool {
        self.values
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Flattened view over all scalars, for finite-difference checks.
    pub fn scalar(&self, flat: usize) -> f64 {
        let (p, k) = self.locate(flat);
        self.values[p].data[k]
    }

    pub fn set_scalar(&mut self, flat: usize, v: f64) {
        let (p, k) = self.locate(flat);
        self.values[p].data[k] = v;
    }

    fn locate(&self, mut flat: usize) -> (usize, usize) {
        for (p, t) in self.values.iter().enumerate() {
            if flat < t.len() {
                return (p, flat);
            }
            flat -= t.len();
        }
        panic!("scalar index out of range");
    }

    /// Copies values from `arrays` by name; every parameter must be present
    /// with a matching shape.
    pub fn load_named(&mut self, arrays: &HashMap<String, Tensor>, prefix: &str) -> crate::Result<()> {
        for (name, value) in self.names.iter().zip(self.values.iter_mut()) {
            let key = format!("{prefix}{name}");
            let src = arrays
                .get(&key)
                .ok_or_else(|| crate::Error::Checkpoint(format!("missing array {key}")))?;
            if (src.rows, src.cols) != (value.rows, value.cols) {
                return Err(crate::Error::Checkpoint(format!(
                    "array {key} has shape {}x{}, expected {}x{}",
                    src.rows, src.cols, value.rows, value.cols
                )));
            }
            value.data.clone_from(&src.data);
        }
        Ok(())
    }

    pub fn export_named(&self, prefix: &str) -> Vec<(String, Tensor)> {
        self.iter()
            .map(|(n, t)| (format!("{prefix}{n}"), t.clone()))
            .collect()
    }
}

/// Gradient buffers shaped like a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Tensor>,
}

impl Grads {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Grads {
            tensors: params
                .values
                .iter()
                .map(|t| Tensor::zeros(t.rows, t.cols))
                .collect(),
        }
    }

    pub fn clear(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors.iter().map(Tensor::sq_norm).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v *= c);
        }
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn scalar(&self, mut flat: usize) -> f64 {
        for t in &self.tensors {
            if flat < t.len() {
                return t.data[flat];
            }
            flat -= t.len();
        }
        panic!("scalar index out of range");
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    Embed(ParamId, usize),
    Linear(ParamId, Var),
    AddParam(Var, ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Dot(Var, Var),
    Sum(Var),
    AddAll(Vec<Var>),
    Softmax(Var),
    LogSoftmax(Var, Option<Arc<[bool]>>),
    Pick(Var, usize),
    WeightedSum(Var, Vec<Var>),
    MaxPool(Vec<Var>, Vec<usize>),
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

/// One recorded forward computation over a single [`ParamSet`].
pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable log-softmax; masked entries get `-inf`.
pub fn log_softmax(x: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let allowed = |i: usize| mask.is_none_or(|m| !m[i]);
    let max = x
        .iter()
        .enumerate()
        .filter(|&(i, _)| allowed(i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = x
        .iter()
        .enumerate()
        .filter(|&(i, _)| allowed(i))
        .map(|(_, &v)| (v - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    x.iter()
        .enumerate()
        .map(|(i, &v)| if allowed(i) { v - lse } else { f64::NEG_INFINITY })
        .collect()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    log_softmax(x, None).into_iter().map(f64::exp).collect()
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn len_of(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.input(vec![0.0; n])
    }

    /// A whole parameter as a vector leaf.
    pub fn param(&mut self, p: ParamId) -> Var {
        let v = self.params.get(p).data.clone();
        self.push(v, Op::Param(p))
    }

    /// Row `row` of an embedding matrix.
    pub fn embed(&mut self, p: ParamId, row: usize) -> Var {
        let v = self.params.get(p).row(row).to_vec();
        self.push(v, Op::Embed(p, row))
    }

    /// `W x` for a parameter matrix `W`.
    pub fn linear(&mut self, w: ParamId, x: Var) -> Var {
        let m = self.params.get(w);
        let xv = &self.nodes[x.0].value;
        debug_assert_eq!(m.cols, xv.len(), "linear shape mismatch");
        let out = (0..m.rows)
            .map(|r| m.row(r).iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        self.push(out, Op::Linear(w, x))
    }

    pub fn add_param(&mut self, x: Var, b: ParamId) -> Var {
        let bv = &self.params.get(b).data;
        let out = self.nodes[x.0].value.iter().zip(bv).map(|(a, b)| a + b).collect();
        self.push(out, Op::AddParam(x, b))
    }

    /// `W x + b`.
    pub fn affine(&mut self, w: ParamId, b: ParamId, x: Var) -> Var {
        let l = self.linear(w, x);
        self.add_param(l, b)
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        debug_assert_eq!(av.len(), bv.len());
        av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect()
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes[a.0].value.iter().map(|&x| f(x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.map(a, |x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let v = parts
            .iter()
            .flat_map(|p| self.nodes[p.0].value.iter().copied())
            .collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.nodes[a.0].value[start..start + len].to_vec();
        self.push(v, Op::Slice(a, start))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let s = self.zip(a, b, |x, y| x * y).iter().sum();
        self.push(vec![s], Op::Dot(a, b))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum();
        self.push(vec![s], Op::Sum(a))
    }

    /// Elementwise sum of equally-shaped nodes.
    pub fn add_all(&mut self, parts: &[Var]) -> Var {
        let n = self.nodes[parts[0].0].value.len();
        let mut out = vec![0.0; n];
        for p in parts {
            for (o, v) in out.iter_mut().zip(&self.nodes[p.0].value) {
                *o += v;
            }
        }
        self.push(out, Op::AddAll(parts.to_vec()))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let v = softmax(&self.nodes[a.0].value);
        self.push(v, Op::Softmax(a))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let v = log_softmax(&self.nodes[a.0].value, None);
        self.push(v, Op::LogSoftmax(a, None))
    }

    /// Log-softmax restricted to entries where `mask` is false; masked
    /// entries are `-inf` and receive no gradient.
    pub fn log_softmax_masked(&mut self, a: Var, mask: Arc<[bool]>) -> Var {
        let v = log_softmax(&self.nodes[a.0].value, Some(&mask));
        self.push(v, Op::LogSoftmax(a, Some(mask)))
    }

    pub fn pick(&mut self, a: Var, i: usize) -> Var {
        let v = vec![self.nodes[a.0].value[i]];
        self.push(v, Op::Pick(a, i))
    }

    /// `sum_i w[i] * xs[i]` for a weight vector node `w`.
    pub fn weighted_sum(&mut self, w: Var, xs: &[Var]) -> Var {
        let n = self.nodes[xs[0].0].value.len();
        let mut out = vec![0.0; n];
        for (k, x) in xs.iter().enumerate() {
            let wk = self.nodes[w.0].value[k];
            for (o, v) in out.iter_mut().zip(&self.nodes[x.0].value) {
                *o += wk * v;
            }
        }
        self.push(out, Op::WeightedSum(w, xs.to_vec()))
    }

    /// Elementwise max over equally-shaped nodes.
    pub fn max_pool(&mut self, xs: &[Var]) -> Var {
        let n = self.nodes[xs[0].0].value.len();
        let mut out = vec![f64::NEG_INFINITY; n];
        let mut arg = vec![0usize; n];
        for (k, x) in xs.iter().enumerate() {
            for (j, &v) in self.nodes[x.0].value.iter().enumerate() {
                if v > out[j] {
                    out[j] = v;
                    arg[j] = k;
                }
            }
        }
        self.push(out, Op::MaxPool(xs.to_vec(), arg))
    }

    /// Back-propagates `d(seed * out)/d(params)` into `grads`, where `out`
    /// is a scalar node.
    pub fn backward_scaled(&self, out: Var, seed: f64, grads: &mut Grads) {
        debug_assert_eq!(self.nodes[out.0].value.len(), 1, "backward needs a scalar");
        let mut adj: Vec<Option<Vec<f64>>> = (0..=out.0).map(|_| None).collect();
        adj[out.0] = Some(vec![seed]);

        fn acc(adj: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            adj[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=out.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let lenof = |v: Var| self.nodes[v.0].value.len();
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    for (a, b) in grads.tensors[p.0].data.iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Embed(p, row) => {
                    let t = &mut grads.tensors[p.0];
                    let cols = t.cols;
                    for (a, b) in t.data[row * cols..(row + 1) * cols].iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Linear(w, x) => {
                    let m = self.params.get(*w);
                    let xv = &self.nodes[x.0].value;
                    let gw = &mut grads.tensors[w.0];
                    for (r, &gr) in g.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        let row = &mut gw.data[r * m.cols..(r + 1) * m.cols];
                        for (a, &xc) in row.iter_mut().zip(xv) {
                            *a += gr * xc;
                        }
                    }
                    let gx = acc(&mut adj, *x, m.cols);
                    for (r, &gr) in g.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        for (a, &w) in gx.iter_mut().zip(m.row(r)) {
                            *a += gr * w;
                        }
                    }
                }
                Op::AddParam(x, b) => {
                    for (a, v) in grads.tensors[b.0].data.iter_mut().zip(&g) {
                        *a += v;
                    }
                    let gx = acc(&mut adj, *x, g.len());
                    gx.iter_mut().zip(&g).for_each(|(a, v)| *a += v);
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    let ga = acc(&mut adj, *a, g.len());
                    ga.iter_mut().zip(&g).for_each(|(x, v)| *x += v);
                    let gb = acc(&mut adj, *b, g.len());
                    gb.iter_mut().zip(&g).for_each(|(x, v)| *x += sign * v);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = acc(&mut adj, *a, g.len());
                    for ((x, v), y) in ga.iter_mut().zip(&g).zip(bv) {
                        *x += v * y;
                    }
                    let gb = acc(&mut adj, *b, g.len());
                    for ((x, v), y) in gb.iter_mut().zip(&g).zip(av) {
                        *x += v * y;
                    }
                }
                Op::Scale(a, c) => {
                    let ga = acc(&mut adj, *a, g.len());
                    ga.iter_mut().zip(&g).for_each(|(x, v)| *x += c * v);
                }
                Op::Sigmoid(a) => {
                    let ga = acc(&mut adj, *a, g.len());
                    for ((x, v), s) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *x += v * s * (1.0 - s);
                    }
                }
                Op::Tanh(a) => {
                    let ga = acc(&mut adj, *a, g.len());
                    for ((x, v), t) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *x += v * (1.0 - t * t);
                    }
                }
                Op::Relu(a) => {
                    let ga = acc(&mut adj, *a, g.len());
                    for ((x, v), o) in ga.iter_mut().zip(&g).zip(&node.value) {
                        if *o > 0.0 {
                            *x += v;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = lenof(*p);
                        let gp = acc(&mut adj, *p, n);
                        gp.iter_mut().zip(&g[off..off + n]).for_each(|(x, v)| *x += v);
                        off += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = lenof(*a);
                    let ga = acc(&mut adj, *a, n);
                    for (k, v) in g.iter().enumerate() {
                        ga[start + k] += v;
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let s = g[0];
                    let n = av.len();
                    let ga = acc(&mut adj, *a, n);
                    ga.iter_mut().zip(bv).for_each(|(x, y)| *x += s * y);
                    let gb = acc(&mut adj, *b, n);
                    gb.iter_mut().zip(av).for_each(|(x, y)| *x += s * y);
                }
                Op::Sum(a) => {
                    let n = lenof(*a);
                    let ga = acc(&mut adj, *a, n);
                    ga.iter_mut().for_each(|x| *x += g[0]);
                }
                Op::AddAll(parts) => {
                    for p in parts {
                        let gp = acc(&mut adj, *p, g.len());
                        gp.iter_mut().zip(&g).for_each(|(x, v)| *x += v);
                    }
                }
                Op::Softmax(a) => {
                    let p = &node.value;
                    let gp: f64 = g.iter().zip(p).map(|(x, y)| x * y).sum();
                    let ga = acc(&mut adj, *a, g.len());
                    for ((x, v), pi) in ga.iter_mut().zip(&g).zip(p) {
                        *x += pi * (v - gp);
                    }
                }
                Op::LogSoftmax(a, mask) => {
                    let lp = &node.value;
                    let allowed = |i: usize| mask.as_ref().is_none_or(|m| !m[i]);
                    let gsum: f64 = g
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| allowed(i))
                        .map(|(_, v)| v)
                        .sum();
                    let ga = acc(&mut adj, *a, g.len());
                    for (i, x) in ga.iter_mut().enumerate() {
                        if allowed(i) {
                            *x += g[i] - lp[i].exp() * gsum;
                        }
                    }
                }
                Op::Pick(a, i) => {
                    let n = lenof(*a);
                    acc(&mut adj, *a, n)[*i] += g[0];
                }
                Op::WeightedSum(w, xs) => {
                    let wv = &self.nodes[w.0].value;
                    let gw: Vec<f64> = xs
                        .iter()
                        .map(|x| self.nodes[x.0].value.iter().zip(&g).map(|(a, b)| a * b).sum())
                        .collect();
                    let gwa = acc(&mut adj, *w, wv.len());
                    gwa.iter_mut().zip(&gw).for_each(|(x, v)| *x += v);
                    for (k, x) in xs.iter().enumerate() {
                        let gx = acc(&mut adj, *x, g.len());
                        gx.iter_mut().zip(&g).for_each(|(a, v)| *a += wv[k] * v);
                    }
                }
                Op::MaxPool(xs, arg) => {
                    for (j, &k) in arg.iter().enumerate() {
                        let n = lenof(xs[k]);
                        acc(&mut adj, xs[k], n)[j] += g[j];
                    }
                }
            }
        }
    }

    pub fn backward(&self, out: Var, grads: &mut Grads) {
        self.backward_scaled(out, 1.0, grads);
    }
}

/// Sums per-item gradients computed in parallel. `f` builds a scalar loss
/// for one item (or `None` to skip it). The reduction runs in item order,
/// so the result does not depend on thread scheduling. Returns the summed
/// gradients and the summed loss.
pub fn parallel_grads<T, F>(params: &ParamSet, items: &[T], f: F) -> (Grads, f64)
where
    T: Sync,
    F: Fn(&mut Graph, &T) -> Option<Var> + Sync,
{
    use rayon::prelude::*;
    let parts: Vec<Option<(Grads, f64)>> = items
        .par_iter()
        .map(|item| {
            let mut g = Graph::new(params);
            let loss = f(&mut g, item)?;
            let mut grads = Grads::zeros_like(params);
            g.backward(loss, &mut grads);
            Some((grads, g.scalar(loss)))
        })
        .collect();
    let mut total = Grads::zeros_like(params);
    let mut loss = 0.0;
    for (gr, l) in parts.into_iter().flatten() {
        total.add_assign(&gr);
        loss += l;
    }
    (total, loss)
}
