use rand::Rng;

use super::{numel, softmax, Gradients, ParamSet, Tensor, TensorError};

/// Names accepted by [`Tape::apply`]. Ops that carry non-tensor arguments
/// (gathers, dropout, cross-entropy, scaling) have dedicated methods.
pub const SUPPORTED_OPS: &[&str] = &[
    "add",
    "sub",
    "mul",
    "matmul",
    "transpose",
    "sigmoid",
    "tanh",
    "softmax",
    "concat",
    "stack_rows",
    "sum",
    "mean",
    "one_minus",
];

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    AddN(Vec<Var>),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    StackRows(Vec<Var>),
    Row(Var, usize),
    Gather(Var, Vec<usize>),
    GatherMean(Var, Vec<Vec<usize>>),
    Mask(Var, Vec<f64>),
    CrossEntropy {
        logits: Var,
        target: usize,
        probs: Vec<f64>,
    },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    tracked: bool,
}

/// A define-by-run computation record.
///
/// Every forward pass builds a fresh tape. Nodes are appended in evaluation
/// order, so the node list is already topologically sorted and backward is a
/// single reverse sweep. A tape can be differentiated once.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(usize, Var)>,
    grad_enabled: bool,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: Vec::new(),
            grad_enabled: true,
            consumed: false,
        }
    }

    /// A tape that records values only; nothing on it is differentiable.
    pub fn inference() -> Self {
        Tape {
            grad_enabled: false,
            ..Tape::new()
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        let tracked = self.grad_enabled && inputs.iter().any(|v| self.nodes[v.0].tracked);
        let op = if tracked { op } else { Op::Leaf };
        self.nodes.push(Node {
            shape,
            value,
            op,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.nodes.push(Node {
            shape,
            value: t.into_data(),
            op: Op::Leaf,
            tracked: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Var {
        self.constant(Tensor::zeros(shape))
    }

    /// A differentiable input; its gradient is available through [`Grads::wrt`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.nodes.push(Node {
            shape,
            value: t.into_data(),
            op: Op::Leaf,
            tracked: self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers parameter `index` of a [`ParamSet`] as a differentiable leaf.
    pub fn param(&mut self, index: usize, t: &Tensor) -> Var {
        let v = self.leaf(t.clone());
        self.params.push((index, v));
        v
    }

    /// Registers every parameter in order; the returned handles are aligned
    /// with the set.
    pub fn bind(&mut self, params: &ParamSet) -> Vec<Var> {
        (0..params.len())
            .map(|i| self.param(i, params.get(i)))
            .collect()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("tape nodes are well formed")
    }

    /// The single element of a scalar node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::ShapeMismatch {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn zip_with(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Vec<usize>, Vec<f64>), TensorError> {
        self.same_shape(op, a, b)?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| f(*x, *y))
            .collect();
        Ok((self.shape(a).to_vec(), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (shape, value) = self.zip_with("add", a, b, |x, y| x + y)?;
        Ok(self.push(shape, value, Op::Add(a, b), &[a, b]))
    }

    /// Elementwise sum of any number of same-shaped nodes.
    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let first = *xs.first().ok_or(TensorError::Arity {
            op: "add_n",
            expected: 1,
            got: 0,
        })?;
        let mut value = self.value(first).to_vec();
        for &x in &xs[1..] {
            self.same_shape("add_n", first, x)?;
            for (acc, v) in value.iter_mut().zip(self.value(x)) {
                *acc += v;
            }
        }
        let shape = self.shape(first).to_vec();
        Ok(self.push(shape, value, Op::AddN(xs.to_vec()), xs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (shape, value) = self.zip_with("sub", a, b, |x, y| x - y)?;
        Ok(self.push(shape, value, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (shape, value) = self.zip_with("mul", a, b, |x, y| x * y)?;
        Ok(self.push(shape, value, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).iter().map(|x| x * factor).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Scale(a, factor), &[a])
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| 1.0 - x).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::OneMinus(a), &[a])
    }

    /// Matrix product. 1-D operands act as a row (left) or column (right)
    /// vector and the matching output axis is dropped.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let mismatch = || TensorError::ShapeMismatch {
            op: "matmul",
            left: sa.clone(),
            right: sb.clone(),
        };
        let (m, k) = match sa.as_slice() {
            [k] => (1, *k),
            [m, k] => (*m, *k),
            _ => return Err(mismatch()),
        };
        let (k2, n) = match sb.as_slice() {
            [k2] => (*k2, 1),
            [k2, n] => (*k2, *n),
            _ => return Err(mismatch()),
        };
        if k != k2 {
            return Err(mismatch());
        }
        let shape = match (sa.len(), sb.len()) {
            (2, 2) => vec![m, n],
            (2, 1) => vec![m],
            (1, 2) => vec![n],
            _ => vec![1],
        };
        let value = matmul_raw(self.value(a), self.value(b), m, k, n);
        Ok(self.push(shape, value, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let (r, c) = match self.shape(a) {
            [r, c] => (*r, *c),
            other => {
                return Err(TensorError::ShapeMismatch {
                    op: "transpose",
                    left: other.to_vec(),
                    right: vec![],
                })
            }
        };
        let src = self.value(a);
        let mut value = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                value[j * r + i] = src[i * c + j];
            }
        }
        Ok(self.push(vec![c, r], value, Op::Transpose(a), &[a]))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|&x| super::sigmoid(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| x.tanh()).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Tanh(a), &[a])
    }

    /// Softmax over the last axis (per row for matrices).
    pub fn softmax(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let cols = *shape.last().unwrap();
        let value = self.value(a).chunks(cols).flat_map(softmax).collect();
        self.push(shape, value, Op::Softmax(a), &[a])
    }

    /// Concatenates 1-D nodes.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let mut value = Vec::new();
        for &x in xs {
            if self.shape(x).len() != 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: self.shape(xs[0]).to_vec(),
                    right: self.shape(x).to_vec(),
                });
            }
            value.extend_from_slice(self.value(x));
        }
        if value.is_empty() {
            return Err(TensorError::Arity {
                op: "concat",
                expected: 1,
                got: 0,
            });
        }
        Ok(self.push(vec![value.len()], value, Op::Concat(xs.to_vec()), xs))
    }

    /// Stacks equally sized 1-D nodes into the rows of a matrix.
    pub fn stack_rows(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let first = *xs.first().ok_or(TensorError::Arity {
            op: "stack_rows",
            expected: 1,
            got: 0,
        })?;
        let mut value = Vec::new();
        for &x in xs {
            if self.shape(x).len() != 1 || self.shape(x) != self.shape(first) {
                return Err(TensorError::ShapeMismatch {
                    op: "stack_rows",
                    left: self.shape(first).to_vec(),
                    right: self.shape(x).to_vec(),
                });
            }
            value.extend_from_slice(self.value(x));
        }
        let d = self.shape(first)[0];
        Ok(self.push(vec![xs.len(), d], value, Op::StackRows(xs.to_vec()), xs))
    }

    /// Row `index` of a matrix, e.g. one embedding lookup.
    pub fn row(&mut self, table: Var, index: usize) -> Result<Var, TensorError> {
        let (rows, cols) = self.matrix_dims("row", table)?;
        if index >= rows {
            return Err(TensorError::OutOfRange {
                op: "row",
                index,
                bound: rows,
            });
        }
        let value = self.value(table)[index * cols..(index + 1) * cols].to_vec();
        Ok(self.push(vec![cols], value, Op::Row(table, index), &[table]))
    }

    /// Embedding lookup: the rows `ids` of `table`, stacked.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var, TensorError> {
        let (rows, cols) = self.matrix_dims("gather", table)?;
        if ids.is_empty() {
            return Err(TensorError::Arity {
                op: "gather",
                expected: 1,
                got: 0,
            });
        }
        let src = self.value(table);
        let mut value = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(TensorError::OutOfRange {
                    op: "gather",
                    index: id,
                    bound: rows,
                });
            }
            value.extend_from_slice(&src[id * cols..(id + 1) * cols]);
        }
        Ok(self.push(
            vec![ids.len(), cols],
            value,
            Op::Gather(table, ids.to_vec()),
            &[table],
        ))
    }

    /// One output row per group: the mean of that group's rows of `table`.
    pub fn gather_mean(&mut self, table: Var, groups: &[Vec<usize>]) -> Result<Var, TensorError> {
        let (rows, cols) = self.matrix_dims("gather_mean", table)?;
        if groups.is_empty() || groups.iter().any(Vec::is_empty) {
            return Err(TensorError::Arity {
                op: "gather_mean",
                expected: 1,
                got: 0,
            });
        }
        let src = self.value(table);
        let mut value = vec![0.0; groups.len() * cols];
        for (g, ids) in groups.iter().enumerate() {
            let inv = 1.0 / ids.len() as f64;
            let out = &mut value[g * cols..(g + 1) * cols];
            for &id in ids {
                if id >= rows {
                    return Err(TensorError::OutOfRange {
                        op: "gather_mean",
                        index: id,
                        bound: rows,
                    });
                }
                for (o, s) in out.iter_mut().zip(&src[id * cols..(id + 1) * cols]) {
                    *o += s * inv;
                }
            }
        }
        Ok(self.push(
            vec![groups.len(), cols],
            value,
            Op::GatherMean(table, groups.to_vec()),
            &[table],
        ))
    }

    /// Multiplies by an explicit elementwise mask.
    pub fn mask(&mut self, a: Var, mask: Vec<f64>) -> Result<Var, TensorError> {
        if mask.len() != self.value(a).len() {
            return Err(TensorError::ShapeMismatch {
                op: "mask",
                left: self.shape(a).to_vec(),
                right: vec![mask.len()],
            });
        }
        let value = self
            .value(a)
            .iter()
            .zip(&mask)
            .map(|(x, m)| x * m)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, value, Op::Mask(a, mask), &[a]))
    }

    /// Inverted dropout: zeroes each element with probability `rate` and
    /// rescales survivors by `1 / (1 - rate)`. The mask comes from `rng`,
    /// so a seeded generator makes the pass replayable.
    pub fn dropout<R: Rng>(&mut self, a: Var, rate: f64, rng: &mut R) -> Var {
        if rate <= 0.0 {
            return a;
        }
        let keep = 1.0 / (1.0 - rate);
        let mask = (0..self.value(a).len())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        self.mask(a, mask)
            .expect("mask length matches by construction")
    }

    /// `-log softmax(logits)[target]` for 1-D logits.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var, TensorError> {
        if self.shape(logits).len() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "cross_entropy",
                left: self.shape(logits).to_vec(),
                right: vec![target],
            });
        }
        let xs = self.value(logits);
        if target >= xs.len() {
            return Err(TensorError::OutOfRange {
                op: "cross_entropy",
                index: target,
                bound: xs.len(),
            });
        }
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let loss = lse - xs[target];
        let probs = softmax(xs);
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::CrossEntropy {
                logits,
                target,
                probs,
            },
            &[logits],
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(vec![1], vec![s], Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.value(a).iter().sum::<f64>() / n;
        self.push(vec![1], vec![s], Op::Mean(a), &[a])
    }

    fn matrix_dims(&self, op: &'static str, a: Var) -> Result<(usize, usize), TensorError> {
        match self.shape(a) {
            [r, c] => Ok((*r, *c)),
            other => Err(TensorError::ShapeMismatch {
                op,
                left: other.to_vec(),
                right: vec![],
            }),
        }
    }

    /// Applies a tensor-only op by name.
    pub fn apply(&mut self, op: &str, inputs: &[Var]) -> Result<Var, TensorError> {
        fn arity(op: &'static str, inputs: &[Var], n: usize) -> Result<(), TensorError> {
            if inputs.len() != n {
                return Err(TensorError::Arity {
                    op,
                    expected: n,
                    got: inputs.len(),
                });
            }
            Ok(())
        }
        match op {
            "add" => arity("add", inputs, 2).and_then(|_| self.add(inputs[0], inputs[1])),
            "sub" => arity("sub", inputs, 2).and_then(|_| self.sub(inputs[0], inputs[1])),
            "mul" => arity("mul", inputs, 2).and_then(|_| self.mul(inputs[0], inputs[1])),
            "matmul" => arity("matmul", inputs, 2).and_then(|_| self.matmul(inputs[0], inputs[1])),
            "transpose" => arity("transpose", inputs, 1).and_then(|_| self.transpose(inputs[0])),
            "sigmoid" => arity("sigmoid", inputs, 1).map(|_| self.sigmoid(inputs[0])),
            "tanh" => arity("tanh", inputs, 1).map(|_| self.tanh(inputs[0])),
            "softmax" => arity("softmax", inputs, 1).map(|_| self.softmax(inputs[0])),
            "concat" => self.concat(inputs),
            "stack_rows" => self.stack_rows(inputs),
            "sum" => arity("sum", inputs, 1).map(|_| self.sum(inputs[0])),
            "mean" => arity("mean", inputs, 1).map(|_| self.mean(inputs[0])),
            "one_minus" => arity("one_minus", inputs, 1).map(|_| self.one_minus(inputs[0])),
            other => Err(TensorError::UnknownOp(other.to_string())),
        }
    }

    /// Reverse sweep from a scalar `loss`. Consumes the tape: a second call
    /// returns [`TensorError::TapeConsumed`].
    pub fn backward(&mut self, loss: Var) -> Result<Grads, TensorError> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.consumed = true;
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if node.tracked {
                backprop_node(nodes, node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Grads {
            grads,
            lens: nodes.iter().map(|n| n.value.len()).collect(),
            params: self.params.clone(),
        })
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    if n == 1 {
        for i in 0..m {
            out[i] = dot(&a[i * k..(i + 1) * k], b);
        }
        return out;
    }
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn slot<'g>(grads: &'g mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> Option<&'g mut Vec<f64>> {
    if !nodes[v.0].tracked {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]))
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], v: Var, g: &[f64], factor: f64) {
    if let Some(s) = slot(grads, nodes, v) {
        for (acc, x) in s.iter_mut().zip(g) {
            *acc += factor * x;
        }
    }
}

fn backprop_node(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let y = &node.value;
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(grads, nodes, *a, g, 1.0);
            accumulate(grads, nodes, *b, g, 1.0);
        }
        Op::AddN(xs) => {
            for x in xs {
                accumulate(grads, nodes, *x, g, 1.0);
            }
        }
        Op::Sub(a, b) => {
            accumulate(grads, nodes, *a, g, 1.0);
            accumulate(grads, nodes, *b, g, -1.0);
        }
        Op::Mul(a, b) => {
            let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
            if let Some(s) = slot(grads, nodes, *a) {
                for ((acc, gi), bi) in s.iter_mut().zip(g).zip(vb) {
                    *acc += gi * bi;
                }
            }
            if let Some(s) = slot(grads, nodes, *b) {
                for ((acc, gi), ai) in s.iter_mut().zip(g).zip(va) {
                    *acc += gi * ai;
                }
            }
        }
        Op::Scale(a, f) => accumulate(grads, nodes, *a, g, *f),
        Op::OneMinus(a) => accumulate(grads, nodes, *a, g, -1.0),
        Op::MatMul(a, b) => {
            let (na, nb) = (&nodes[a.0], &nodes[b.0]);
            let (m, k) = match na.shape.as_slice() {
                [k] => (1, *k),
                [m, k] => (*m, *k),
                _ => unreachable!(),
            };
            let n = nb.value.len() / k;
            if let Some(s) = slot(grads, nodes, *a) {
                // dA = dC · Bᵀ
                for i in 0..m {
                    let gi = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        s[i * k + p] += dot(gi, &nb.value[p * n..(p + 1) * n]);
                    }
                }
            }
            if let Some(s) = slot(grads, nodes, *b) {
                // dB = Aᵀ · dC
                for i in 0..m {
                    let gi = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let av = na.value[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        for (acc, gv) in s[p * n..(p + 1) * n].iter_mut().zip(gi) {
                            *acc += av * gv;
                        }
                    }
                }
            }
        }
        Op::Transpose(a) => {
            let (r, c) = match nodes[a.0].shape.as_slice() {
                [r, c] => (*r, *c),
                _ => unreachable!(),
            };
            if let Some(s) = slot(grads, nodes, *a) {
                for i in 0..r {
                    for j in 0..c {
                        s[i * c + j] += g[j * r + i];
                    }
                }
            }
        }
        Op::Sigmoid(a) => {
            if let Some(s) = slot(grads, nodes, *a) {
                for ((acc, gi), yi) in s.iter_mut().zip(g).zip(y) {
                    *acc += gi * yi * (1.0 - yi);
                }
            }
        }
        Op::Tanh(a) => {
            if let Some(s) = slot(grads, nodes, *a) {
                for ((acc, gi), yi) in s.iter_mut().zip(g).zip(y) {
                    *acc += gi * (1.0 - yi * yi);
                }
            }
        }
        Op::Softmax(a) => {
            let cols = *node.shape.last().unwrap();
            if let Some(s) = slot(grads, nodes, *a) {
                for ((sr, gr), yr) in s.chunks_mut(cols).zip(g.chunks(cols)).zip(y.chunks(cols)) {
                    let inner = dot(gr, yr);
                    for ((acc, gi), yi) in sr.iter_mut().zip(gr).zip(yr) {
                        *acc += yi * (gi - inner);
                    }
                }
            }
        }
        Op::Concat(xs) => {
            let mut offset = 0;
            for x in xs {
                let len = nodes[x.0].value.len();
                accumulate(grads, nodes, *x, &g[offset..offset + len], 1.0);
                offset += len;
            }
        }
        Op::StackRows(xs) => {
            let d = node.shape[1];
            for (r, x) in xs.iter().enumerate() {
                accumulate(grads, nodes, *x, &g[r * d..(r + 1) * d], 1.0);
            }
        }
        Op::Row(table, index) => {
            let cols = node.value.len();
            if let Some(s) = slot(grads, nodes, *table) {
                for (acc, gv) in s[index * cols..(index + 1) * cols].iter_mut().zip(g) {
                    *acc += gv;
                }
            }
        }
        Op::Gather(table, ids) => {
            let cols = node.shape[1];
            if let Some(s) = slot(grads, nodes, *table) {
                for (r, &id) in ids.iter().enumerate() {
                    for (acc, gv) in s[id * cols..(id + 1) * cols]
                        .iter_mut()
                        .zip(&g[r * cols..(r + 1) * cols])
                    {
                        *acc += gv;
                    }
                }
            }
        }
        Op::GatherMean(table, groups) => {
            let cols = node.shape[1];
            if let Some(s) = slot(grads, nodes, *table) {
                for (r, ids) in groups.iter().enumerate() {
                    let inv = 1.0 / ids.len() as f64;
                    let gr = &g[r * cols..(r + 1) * cols];
                    for &id in ids {
                        for (acc, gv) in s[id * cols..(id + 1) * cols].iter_mut().zip(gr) {
                            *acc += gv * inv;
                        }
                    }
                }
            }
        }
        Op::Mask(a, mask) => {
            if let Some(s) = slot(grads, nodes, *a) {
                for ((acc, gi), m) in s.iter_mut().zip(g).zip(mask) {
                    *acc += gi * m;
                }
            }
        }
        Op::CrossEntropy {
            logits,
            target,
            probs,
        } => {
            if let Some(s) = slot(grads, nodes, *logits) {
                for (acc, p) in s.iter_mut().zip(probs) {
                    *acc += g[0] * p;
                }
                s[*target] -= g[0];
            }
        }
        Op::Sum(a) => {
            if let Some(s) = slot(grads, nodes, *a) {
                s.iter_mut().for_each(|acc| *acc += g[0]);
            }
        }
        Op::Mean(a) => {
            let n = nodes[a.0].value.len() as f64;
            if let Some(s) = slot(grads, nodes, *a) {
                s.iter_mut().for_each(|acc| *acc += g[0] / n);
            }
        }
    }
}

/// The result of [`Tape::backward`].
#[derive(Debug)]
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
    params: Vec<(usize, Var)>,
}

impl Grads {
    /// Gradient of the loss with respect to `v`; zeros when `v` does not
    /// reach the loss.
    pub fn wrt(&self, v: Var) -> Vec<f64> {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| vec![0.0; self.lens[v.0]])
    }

    /// Gradients for every parameter of `params`, zero for those that were
    /// never bound or do not reach the loss.
    pub fn for_params(&self, params: &ParamSet) -> Gradients {
        let mut out = Gradients::zeros_like(params);
        for &(index, var) in &self.params {
            if let Some(g) = &self.grads[var.0] {
                for (acc, v) in out.get_mut(index).iter_mut().zip(g) {
                    *acc += v;
                }
            }
        }
        out
    }
}
