//! Wengert tape: every operation appends a node holding its output value and
//! enough of the forward state to run its vector-Jacobian product. Nodes only
//! reference earlier nodes, so the record is acyclic by construction and the
//! backward sweep is a single reverse pass over the node list.

use super::tensor::{matmul, matmul_at_acc, matmul_bt};
use super::{NumericsError, Tensor};

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
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    Sum(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        ignore_index: usize,
        probs: Vec<f64>,
        counted: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Single-threaded record of a forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated on a leaf by [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<f64>> {
        self.nodes[v.0].value.take_grad()
    }

    pub fn zero_grads(&mut self) {
        self.nodes.iter_mut().for_each(|n| n.value.zero_grad());
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn vals(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.values()
    }

    /// Records an input tensor. Non-finite values are rejected here.
    pub fn leaf(&mut self, t: Tensor) -> Result<Var, NumericsError> {
        if t.shape().len() != 2 {
            return Err(NumericsError::Dimension(format!(
                "tape values are matrices, got shape {:?}",
                t.shape()
            )));
        }
        if !t.is_finite() {
            return Err(NumericsError::NonFinite("leaf input".into()));
        }
        let needs = t.requires_grad();
        Ok(self.push(t, Op::Leaf, needs))
    }

    /// Records a tensor that never receives gradient.
    pub fn constant(&mut self, mut t: Tensor) -> Result<Var, NumericsError> {
        t.set_requires_grad(false);
        self.leaf(t)
    }

    fn out(rows: usize, cols: usize, values: Vec<f64>) -> Tensor {
        Tensor::matrix(rows, cols, values).expect("op output shape")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(NumericsError::Dimension(format!(
                "matmul {m}x{k} by {k2}x{n}"
            )));
        }
        let v = matmul(self.vals(a), self.vals(b), m, k, n);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Self::out(m, n, v), Op::MatMul(a, b), needs))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (m, k) = self.dims(a);
        let (n, k2) = self.dims(b);
        if k != k2 {
            return Err(NumericsError::Dimension(format!(
                "matmul_bt {m}x{k} by ({n}x{k2})ᵀ"
            )));
        }
        let v = matmul_bt(self.vals(a), self.vals(b), m, k, n);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Self::out(m, n, v), Op::MatMulBt(a, b), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (m, n) = self.dims(a);
        if self.dims(b) != (m, n) {
            return Err(NumericsError::Dimension(format!(
                "add {:?} and {:?}",
                (m, n),
                self.dims(b)
            )));
        }
        let v = self
            .vals(a)
            .iter()
            .zip(self.vals(b))
            .map(|(x, y)| x + y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Self::out(m, n, v), Op::Add(a, b), needs))
    }

    /// Adds a `1×n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumericsError> {
        let (m, n) = self.dims(a);
        if self.dims(row) != (1, n) {
            return Err(NumericsError::Dimension(format!(
                "add_row {m}x{n} with {:?}",
                self.dims(row)
            )));
        }
        let r = self.vals(row);
        let v = self
            .vals(a)
            .chunks(n)
            .flat_map(|c| c.iter().zip(r).map(|(x, y)| x + y))
            .collect();
        let needs = self.needs(a) || self.needs(row);
        Ok(self.push(Self::out(m, n, v), Op::AddRow(a, row), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (m, n) = self.dims(a);
        if self.dims(b) != (m, n) {
            return Err(NumericsError::Dimension("mul shape mismatch".into()));
        }
        let v = self
            .vals(a)
            .iter()
            .zip(self.vals(b))
            .map(|(x, y)| x * y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Self::out(m, n, v), Op::Mul(a, b), needs))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let (m, n) = self.dims(a);
        let v = self.vals(a).iter().map(|x| x * s).collect();
        let needs = self.needs(a);
        self.push(Self::out(m, n, v), Op::Scale(a, s), needs)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let (m, n) = self.dims(a);
        let v = self.vals(a).iter().map(|&x| x.max(0.0)).collect();
        let needs = self.needs(a);
        self.push(Self::out(m, n, v), Op::Relu(a), needs)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (m, n) = self.dims(a);
        let v = softmax_rows(self.vals(a), n);
        debug_assert_eq!(v.len(), m * n);
        let needs = self.needs(a);
        self.push(Self::out(m, n, v), Op::SoftmaxRows(a), needs)
    }

    /// Row-wise layer normalization with learned `1×n` gain and bias.
    pub fn layer_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<Var, NumericsError> {
        let (m, n) = self.dims(x);
        if self.dims(gamma) != (1, n) || self.dims(beta) != (1, n) {
            return Err(NumericsError::Dimension("layer_norm parameter width".into()));
        }
        let xs = self.vals(x);
        let g = self.vals(gamma);
        let b = self.vals(beta);
        let mut xhat = Vec::with_capacity(m * n);
        let mut inv_std = Vec::with_capacity(m);
        let mut v = Vec::with_capacity(m * n);
        for row in xs.chunks(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (j, &x) in row.iter().enumerate() {
                let h = (x - mean) * is;
                xhat.push(h);
                v.push(h * g[j] + b[j]);
            }
        }
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            Self::out(m, n, v),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            needs,
        ))
    }

    /// Selects rows of `table` (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var, NumericsError> {
        let (rows, n) = self.dims(table);
        if ids.is_empty() {
            return Err(NumericsError::Dimension("gather of zero rows".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(NumericsError::Index {
                index: bad,
                bound: rows,
            });
        }
        let t = self.vals(table);
        let v = ids
            .iter()
            .flat_map(|&i| t[i * n..(i + 1) * n].iter().copied())
            .collect();
        let needs = self.needs(table);
        Ok(self.push(
            Self::out(ids.len(), n, v),
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            needs,
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let n = match parts.first() {
            Some(&p) => self.dims(p).1,
            None => return Err(NumericsError::Dimension("concat of nothing".into())),
        };
        let mut rows = 0;
        let mut v = Vec::new();
        for &p in parts {
            let (r, c) = self.dims(p);
            if c != n {
                return Err(NumericsError::Dimension(format!(
                    "concat_rows width {c} != {n}"
                )));
            }
            rows += r;
            v.extend_from_slice(self.vals(p));
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Self::out(rows, n, v), Op::ConcatRows(parts.to_vec()), needs))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let m = match parts.first() {
            Some(&p) => self.dims(p).0,
            None => return Err(NumericsError::Dimension("concat of nothing".into())),
        };
        let widths: Vec<usize> = parts.iter().map(|&p| self.dims(p).1).collect();
        if parts.iter().any(|&p| self.dims(p).0 != m) {
            return Err(NumericsError::Dimension("concat_cols row mismatch".into()));
        }
        let total: usize = widths.iter().sum();
        let mut v = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                v.extend_from_slice(&self.vals(p)[r * w..(r + 1) * w]);
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Self::out(m, total, v), Op::ConcatCols(parts.to_vec()), needs))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NumericsError> {
        let (m, n) = self.dims(x);
        if len == 0 || start + len > n {
            return Err(NumericsError::Dimension(format!(
                "slice {start}..{} of width {n}",
                start + len
            )));
        }
        let xs = self.vals(x);
        let v = (0..m)
            .flat_map(|r| xs[r * n + start..r * n + start + len].iter().copied())
            .collect();
        let needs = self.needs(x);
        Ok(self.push(Self::out(m, len, v), Op::SliceCols { x, start }, needs))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.vals(x).iter().sum();
        let needs = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum(x), needs)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.vals(x).len();
        let s = self.sum(x);
        self.scale(s, 1.0 / n as f64)
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`; rows whose target equals `ignore_index` do not count.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        ignore_index: usize,
    ) -> Result<Var, NumericsError> {
        let (steps, vocab) = self.dims(logits);
        if targets.len() != steps {
            return Err(NumericsError::Dimension(format!(
                "{} targets for {steps} steps",
                targets.len()
            )));
        }
        if let Some(&bad) = targets
            .iter()
            .find(|&&t| t != ignore_index && t >= vocab)
        {
            return Err(NumericsError::Index {
                index: bad,
                bound: vocab,
            });
        }
        let probs = softmax_rows(self.vals(logits), vocab);
        let mut total = 0.0;
        let mut counted = 0;
        for (r, &t) in targets.iter().enumerate() {
            if t == ignore_index {
                continue;
            }
            let row = &self.vals(logits)[r * vocab..(r + 1) * vocab];
            total += log_sum_exp(row) - row[t];
            counted += 1;
        }
        if counted == 0 {
            return Err(NumericsError::AllIgnored);
        }
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(total / counted as f64),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                ignore_index,
                probs,
                counted,
            },
            needs,
        ))
    }

    /// Reverse sweep from a scalar `loss`. Gradients are added into the
    /// `grad` buffers of differentiable leaves, so repeated calls accumulate.
    pub fn backward(&mut self, loss: Var) -> Result<(), NumericsError> {
        if self.dims(loss) != (1, 1) {
            return Err(NumericsError::Dimension(format!(
                "backward needs a scalar, got {:?}",
                self.dims(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].value.accumulate_grad(&g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let (m, n) = (node.value.rows(), node.value.cols());
        let mut send = |v: Var, delta: Vec<f64>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let k = self.dims(*a).1;
                if self.needs(*a) {
                    send(*a, matmul_bt(g, self.vals(*b), m, n, k));
                }
                if self.needs(*b) {
                    let mut db = vec![0.0; k * n];
                    matmul_at_acc(&mut db, self.vals(*a), g, m, k, n);
                    send(*b, db);
                }
            }
            Op::MatMulBt(a, b) => {
                let k = self.dims(*a).1;
                if self.needs(*a) {
                    send(*a, matmul(g, self.vals(*b), m, n, k));
                }
                if self.needs(*b) {
                    let mut db = vec![0.0; n * k];
                    matmul_at_acc(&mut db, g, self.vals(*a), m, n, k);
                    send(*b, db);
                }
            }
            Op::Add(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.to_vec());
            }
            Op::AddRow(a, row) => {
                send(*a, g.to_vec());
                if self.needs(*row) {
                    let mut dr = vec![0.0; n];
                    for c in g.chunks(n) {
                        dr.iter_mut().zip(c).for_each(|(d, x)| *d += x);
                    }
                    send(*row, dr);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.vals(*a), self.vals(*b));
                if self.needs(*a) {
                    send(*a, g.iter().zip(bv).map(|(x, y)| x * y).collect());
                }
                if self.needs(*b) {
                    send(*b, g.iter().zip(av).map(|(x, y)| x * y).collect());
                }
            }
            Op::Scale(a, s) => send(*a, g.iter().map(|x| x * s).collect()),
            Op::Relu(a) => send(
                *a,
                g.iter()
                    .zip(self.vals(*a))
                    .map(|(&d, &x)| if x > 0.0 { d } else { 0.0 })
                    .collect(),
            ),
            Op::SoftmaxRows(a) => {
                let y = node.value.values();
                let mut dx = Vec::with_capacity(m * n);
                for (yr, gr) in y.chunks(n).zip(g.chunks(n)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    dx.extend(yr.iter().zip(gr).map(|(y, d)| y * (d - dot)));
                }
                send(*a, dx);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let gv = self.vals(*gamma);
                if self.needs(*gamma) {
                    let mut dg = vec![0.0; n];
                    for (gr, hr) in g.chunks(n).zip(xhat.chunks(n)) {
                        for j in 0..n {
                            dg[j] += gr[j] * hr[j];
                        }
                    }
                    send(*gamma, dg);
                }
                if self.needs(*beta) {
                    let mut db = vec![0.0; n];
                    for gr in g.chunks(n) {
                        db.iter_mut().zip(gr).for_each(|(d, x)| *d += x);
                    }
                    send(*beta, db);
                }
                if self.needs(*x) {
                    let mut dx = Vec::with_capacity(m * n);
                    for r in 0..m {
                        let gr = &g[r * n..(r + 1) * n];
                        let hr = &xhat[r * n..(r + 1) * n];
                        let dh: Vec<f64> = gr.iter().zip(gv).map(|(a, b)| a * b).collect();
                        let mean_dh = dh.iter().sum::<f64>() / n as f64;
                        let mean_dhh =
                            dh.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        dx.extend(
                            dh.iter()
                                .zip(hr)
                                .map(|(d, h)| inv_std[r] * (d - mean_dh - h * mean_dhh)),
                        );
                    }
                    send(*x, dx);
                }
            }
            Op::Gather { table, ids } => {
                let (rows, _) = self.dims(*table);
                let mut dt = vec![0.0; rows * n];
                for (r, &id) in ids.iter().enumerate() {
                    dt[id * n..(id + 1) * n]
                        .iter_mut()
                        .zip(&g[r * n..(r + 1) * n])
                        .for_each(|(d, x)| *d += x);
                }
                send(*table, dt);
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.vals(p).len();
                    send(p, g[off..off + len].to_vec());
                    off += len;
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.dims(p).1;
                    let d = (0..m)
                        .flat_map(|r| g[r * n + start..r * n + start + w].iter().copied())
                        .collect();
                    send(p, d);
                    start += w;
                }
            }
            Op::SliceCols { x, start } => {
                let (xm, xn) = self.dims(*x);
                let mut dx = vec![0.0; xm * xn];
                for r in 0..m {
                    dx[r * xn + start..r * xn + start + n].copy_from_slice(&g[r * n..(r + 1) * n]);
                }
                send(*x, dx);
            }
            Op::Sum(x) => {
                let len = self.vals(*x).len();
                send(*x, vec![g[0]; len]);
            }
            Op::CrossEntropy {
                logits,
                targets,
                ignore_index,
                probs,
                counted,
            } => {
                let (_, vocab) = self.dims(*logits);
                let scale = g[0] / *counted as f64;
                let mut dl = vec![0.0; probs.len()];
                for (r, &t) in targets.iter().enumerate() {
                    if t == *ignore_index {
                        continue;
                    }
                    let row = &mut dl[r * vocab..(r + 1) * vocab];
                    for (d, p) in row.iter_mut().zip(&probs[r * vocab..(r + 1) * vocab]) {
                        *d = p * scale;
                    }
                    row[t] -= scale;
                }
                send(*logits, dl);
            }
        }
    }
}

/// Row-wise softmax of a row-major buffer with `cols` columns, stabilized by
/// subtracting each row's maximum.
pub fn softmax_rows(values: &[f64], cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for row in values.chunks(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut z = 0.0;
        for &x in row {
            let e = (x - max).exp();
            z += e;
            out.push(e);
        }
        out[start..].iter_mut().for_each(|e| *e /= z);
    }
    out
}

pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_of_sum_is_ones() {
        let mut tape = Tape::new();
        let x = tape
            .leaf(Tensor::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, 4.0]).unwrap().with_grad())
            .unwrap();
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn grad_of_sum_of_squares_is_twice_x() {
        let vals = vec![1.0, -2.0, 3.0, 0.25];
        let mut tape = Tape::new();
        let x = tape
            .leaf(Tensor::matrix(1, 4, vals.clone()).unwrap().with_grad())
            .unwrap();
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq);
        tape.backward(s).unwrap();
        let expect: Vec<f64> = vals.iter().map(|v| 2.0 * v).collect();
        assert_eq!(tape.grad(x).unwrap(), expect.as_slice());
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0).with_grad()).unwrap();
        let y = tape.scale(x, 2.0);
        tape.backward(y).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[4.0]);
    }

    #[test]
    fn add_distributes_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap().with_grad()).unwrap();
        let b = tape.leaf(Tensor::matrix(1, 2, vec![5.0, 7.0]).unwrap().with_grad()).unwrap();
        let c = tape.add(a, b).unwrap();
        let s = tape.sum(c);
        let s = tape.scale(s, 3.0);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(a).unwrap(), &[3.0, 3.0]);
        assert_eq!(tape.grad(b).unwrap(), &[3.0, 3.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(2, 2).with_grad()).unwrap();
        assert!(matches!(tape.backward(x), Err(NumericsError::Dimension(_))));
    }

    #[test]
    fn leaf_rejects_nan() {
        let mut tape = Tape::new();
        let t = Tensor::matrix(1, 2, vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(tape.leaf(t), Err(NumericsError::NonFinite(_))));
    }

    #[test]
    fn constants_get_no_grad() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0).with_grad()).unwrap();
        let c = tape.constant(Tensor::scalar(5.0).with_grad()).unwrap();
        let y = tape.mul(x, c).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[5.0]);
        assert!(tape.grad(c).is_none());
    }
}
