//! A small reverse-mode automatic differentiation tape over dense row-major
//! matrices, with exactly the operations the spotting network needs.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(alloc::format!("{rows}x{cols} tensor from {} values", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Self { rows: 1, cols: data.len(), data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for i in 0..y.len() {
        y[i] += alpha * x[i];
    }
}

/// `X · W[:, off..off + X.cols]ᵀ`
fn matmul_wt(x: &Tensor, w: &Tensor, off: usize) -> Tensor {
    let d = x.cols;
    let mut out = Tensor::zeros(x.rows, w.rows);
    for i in 0..x.rows {
        let xi = x.row(i);
        for h in 0..w.rows {
            out.data[i * w.rows + h] = dot(xi, &w.row(h)[off..off + d]);
        }
    }
    out
}

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    EdgeLinear { x: Var, w: Var, b: Var, center: Vec<usize>, neighbor: Vec<usize> },
    Linear { x: Var, w: Var, b: Var },
    LeakyRelu { x: Var, slope: f64 },
    SegmentMax { x: Var, arg: Vec<usize> },
    MeanRows { x: Var },
    StackRows { parts: Vec<Option<Var>> },
    ConcatCols { parts: Vec<Var> },
    SoftmaxRows { x: Var },
    VladAggregate { a: Var, f: Var, c: Var },
    L2NormalizeRows { x: Var },
    FlattenL2Normalize { x: Var },
    CrossEntropy { logits: Var, labels: Vec<usize>, probs: Tensor },
    WeightedSum { x: Var, w: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records operations in evaluation order; [`Tape::backward`] replays them in
/// reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Grads {
    g: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.g[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.g[v.0].take()
    }
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Per-edge first layer of an edge MLP applied to `[x_c ; x_n − x_c]`,
    /// where `w` is `H × 2D`. Edge `e` joins `center[e]` to `neighbor[e]`;
    /// a self pair yields `[x_c ; 0]`.
    pub fn edge_linear(&mut self, x: Var, w: Var, b: Var, center: Vec<usize>, neighbor: Vec<usize>) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let d = xv.cols;
        debug_assert_eq!(wv.cols, 2 * d);
        let p = matmul_wt(xv, wv, 0);
        let q = matmul_wt(xv, wv, d);
        let hdim = wv.rows;
        let mut out = Tensor::zeros(center.len(), hdim);
        for (e, (&c, &n)) in center.iter().zip(&neighbor).enumerate() {
            let row = out.row_mut(e);
            let (pc, qc, qn) = (p.row(c), q.row(c), q.row(n));
            for h in 0..hdim {
                row[h] = pc[h] - qc[h] + qn[h] + bv.data[h];
            }
        }
        self.push(out, Op::EdgeLinear { x, w, b, center, neighbor })
    }

    /// `X · Wᵀ + b`
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let mut out = matmul_wt(self.value(x), self.value(w), 0);
        let bv = &self.value(b).data;
        for r in 0..out.rows {
            for (o, bb) in out.row_mut(r).iter_mut().zip(bv) {
                *o += bb;
            }
        }
        self.push(out, Op::Linear { x, w, b })
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let mut out = self.value(x).clone();
        out.data.iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v *= slope
            }
        });
        self.push(out, Op::LeakyRelu { x, slope })
    }

    /// Column-wise max of the rows of `x` grouped by `segment` (output row of
    /// each input row). Output rows with no input are zero.
    pub fn segment_max(&mut self, x: Var, segment: &[usize], n_out: usize) -> Var {
        let xv = self.value(x);
        let cols = xv.cols;
        let mut out = Tensor { rows: n_out, cols, data: vec![f64::NEG_INFINITY; n_out * cols] };
        let mut arg = vec![usize::MAX; n_out * cols];
        for (r, &s) in segment.iter().enumerate() {
            let src = xv.row(r);
            for c in 0..cols {
                let k = s * cols + c;
                if src[c] > out.data[k] || arg[k] == usize::MAX {
                    out.data[k] = src[c];
                    arg[k] = r;
                }
            }
        }
        for (o, a) in out.data.iter_mut().zip(&arg) {
            if *a == usize::MAX {
                *o = 0.0;
            }
        }
        self.push(out, Op::SegmentMax { x, arg })
    }

    /// Column means as a `1 × cols` row. Each column is summed in sorted
    /// order, so the result does not depend on row order at all.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut out = Tensor::zeros(1, xv.cols);
        if xv.rows > 0 {
            let mut col = Vec::with_capacity(xv.rows);
            for c in 0..xv.cols {
                col.clear();
                col.extend((0..xv.rows).map(|r| xv.get(r, c)));
                col.sort_by(f64::total_cmp);
                out.data[c] = col.iter().sum::<f64>() / xv.rows as f64;
            }
        }
        self.push(out, Op::MeanRows { x })
    }

    /// Stacks `1 × cols` rows; `None` parts become zero rows.
    pub fn stack_rows(&mut self, parts: Vec<Option<Var>>, cols: usize) -> Var {
        let mut out = Tensor::zeros(parts.len(), cols);
        for (r, p) in parts.iter().enumerate() {
            if let Some(v) = p {
                let pv = self.value(*v);
                debug_assert_eq!(pv.len(), cols);
                out.row_mut(r).copy_from_slice(&pv.data);
            }
        }
        self.push(out, Op::StackRows { parts })
    }

    /// Concatenates tensors with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: Vec<Var>) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for p in &parts {
                let pv = self.value(*p);
                out.data[r * cols + off..r * cols + off + pv.cols].copy_from_slice(pv.row(r));
                off += pv.cols;
            }
        }
        self.push(out, Op::ConcatCols { parts })
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for r in 0..out.rows {
            let row = out.row_mut(r);
            let lse = fmath::log_sum_exp(row);
            row.iter_mut().for_each(|v| *v = fmath::exp(*v - lse));
        }
        self.push(out, Op::SoftmaxRows { x })
    }

    /// VLAD residual sums: `V[k] = Σ_t A[t,k] (F[t] − C[k])` for soft
    /// assignments `A` (`T × K`), features `F` (`T × D`), centers `C` (`K × D`).
    pub fn vlad_aggregate(&mut self, a: Var, f: Var, c: Var) -> Var {
        let (av, fv, cv) = (self.value(a), self.value(f), self.value(c));
        let (t, k, d) = (av.rows, av.cols, fv.cols);
        let mut out = Tensor::zeros(k, d);
        for ki in 0..k {
            let row = &mut out.data[ki * d..(ki + 1) * d];
            let mut mass = 0.0;
            for ti in 0..t {
                let w = av.get(ti, ki);
                mass += w;
                axpy(w, fv.row(ti), row);
            }
            axpy(-mass, cv.row(ki), row);
        }
        self.push(out, Op::VladAggregate { a, f, c })
    }

    /// Each row scaled to unit L2 norm; zero rows stay zero.
    pub fn l2_normalize_rows(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for r in 0..out.rows {
            let row = out.row_mut(r);
            let n = fmath::sqrt(dot(row, row));
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
        self.push(out, Op::L2NormalizeRows { x })
    }

    /// Flattens to one row and scales it to unit L2 norm (zero stays zero).
    pub fn flatten_l2_normalize(&mut self, x: Var) -> Var {
        let mut data = self.value(x).data.clone();
        let n = fmath::sqrt(dot(&data, &data));
        if n > 0.0 {
            data.iter_mut().for_each(|v| *v /= n);
        }
        self.push(Tensor::row_vector(data), Op::FlattenL2Normalize { x })
    }

    /// Mean softmax cross-entropy of the rows of `logits` against `labels`,
    /// as a `1 × 1` value.
    pub fn cross_entropy(&mut self, logits: Var, labels: Vec<usize>) -> Var {
        let lv = self.value(logits);
        debug_assert_eq!(lv.rows, labels.len());
        let mut probs = lv.clone();
        let mut loss = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = probs.row_mut(r);
            let lse = fmath::log_sum_exp(row);
            loss += lse - row[y];
            row.iter_mut().for_each(|v| *v = fmath::exp(*v - lse));
        }
        let out = Tensor::row_vector(vec![loss / labels.len().max(1) as f64]);
        self.push(out, Op::CrossEntropy { logits, labels, probs })
    }

    /// `Σ x ⊙ w` for a constant `w` of the same shape, as a `1 × 1` value.
    pub fn weighted_sum(&mut self, x: Var, w: Tensor) -> Var {
        let v = dot(&self.value(x).data, &w.data);
        self.push(Tensor::row_vector(vec![v]), Op::WeightedSum { x, w })
    }

    /// Reverse pass from a scalar (`1 × 1`) output.
    pub fn backward(&self, output: Var) -> Grads {
        let mut g: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let out = self.value(output);
        g[output.0] = Some(Tensor { rows: out.rows, cols: out.cols, data: vec![1.0; out.len()] });
        for idx in (0..=output.0).rev() {
            let Some(gy) = g[idx].take() else { continue };
            self.backprop(idx, &gy, &mut g);
            g[idx] = Some(gy);
        }
        Grads { g }
    }

    fn backprop(&self, idx: usize, gy: &Tensor, g: &mut [Option<Tensor>]) {
        let acc = |g: &mut [Option<Tensor>], v: Var, t: Tensor| match &mut g[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot => *slot = Some(t),
        };
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::EdgeLinear { x, w, b, center, neighbor } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, d, hdim) = (xv.rows, xv.cols, wv.rows);
                let mut dp = Tensor::zeros(n, hdim);
                let mut dq = Tensor::zeros(n, hdim);
                let mut db = Tensor::zeros(1, hdim);
                for (e, (&c, &nb)) in center.iter().zip(neighbor).enumerate() {
                    let ge = gy.row(e);
                    axpy(1.0, ge, dp.row_mut(c));
                    axpy(-1.0, ge, dq.row_mut(c));
                    axpy(1.0, ge, dq.row_mut(nb));
                    axpy(1.0, ge, &mut db.data);
                }
                let mut dw = Tensor::zeros(hdim, 2 * d);
                let mut dx = Tensor::zeros(n, d);
                for i in 0..n {
                    let xi = xv.row(i);
                    for h in 0..hdim {
                        let (a, bq) = (dp.get(i, h), dq.get(i, h));
                        let wr = wv.row(h);
                        let dwr = dw.row_mut(h);
                        if a != 0.0 {
                            axpy(a, xi, &mut dwr[..d]);
                            axpy(a, &wr[..d], &mut dx.data[i * d..(i + 1) * d]);
                        }
                        if bq != 0.0 {
                            axpy(bq, xi, &mut dw.row_mut(h)[d..]);
                            axpy(bq, &wr[d..], &mut dx.data[i * d..(i + 1) * d]);
                        }
                    }
                }
                acc(g, *x, dx);
                acc(g, *w, dw);
                acc(g, *b, db);
            }
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let mut dx = Tensor::zeros(xv.rows, xv.cols);
                let mut dw = Tensor::zeros(wv.rows, wv.cols);
                let mut db = Tensor::zeros(1, wv.rows);
                for i in 0..xv.rows {
                    let gi = gy.row(i);
                    axpy(1.0, gi, &mut db.data);
                    for h in 0..wv.rows {
                        let a = gi[h];
                        if a != 0.0 {
                            axpy(a, xv.row(i), dw.row_mut(h));
                            axpy(a, wv.row(h), dx.row_mut(i));
                        }
                    }
                }
                acc(g, *x, dx);
                acc(g, *w, dw);
                acc(g, *b, db);
            }
            Op::LeakyRelu { x, slope } => {
                let xv = self.value(*x);
                let mut dx = gy.clone();
                for (d, &v) in dx.data.iter_mut().zip(&xv.data) {
                    if v < 0.0 {
                        *d *= slope;
                    }
                }
                acc(g, *x, dx);
            }
            Op::SegmentMax { x, arg } => {
                let xv = self.value(*x);
                let cols = xv.cols;
                let mut dx = Tensor::zeros(xv.rows, cols);
                for (k, &r) in arg.iter().enumerate() {
                    if r != usize::MAX {
                        dx.data[r * cols + k % cols] += gy.data[k];
                    }
                }
                acc(g, *x, dx);
            }
            Op::MeanRows { x } => {
                let xv = self.value(*x);
                let mut dx = Tensor::zeros(xv.rows, xv.cols);
                if xv.rows > 0 {
                    let inv = 1.0 / xv.rows as f64;
                    for r in 0..xv.rows {
                        axpy(inv, &gy.data, dx.row_mut(r));
                    }
                }
                acc(g, *x, dx);
            }
            Op::StackRows { parts } => {
                for (r, p) in parts.iter().enumerate() {
                    if let Some(v) = p {
                        acc(g, *v, Tensor::row_vector(gy.row(r).to_vec()));
                    }
                }
            }
            Op::ConcatCols { parts } => {
                let mut off = 0;
                for p in parts {
                    let pv = self.value(*p);
                    let mut dp = Tensor::zeros(pv.rows, pv.cols);
                    for r in 0..pv.rows {
                        dp.row_mut(r).copy_from_slice(&gy.row(r)[off..off + pv.cols]);
                    }
                    off += pv.cols;
                    acc(g, *p, dp);
                }
            }
            Op::SoftmaxRows { x } => {
                let y = &node.value;
                let mut dx = Tensor::zeros(y.rows, y.cols);
                for r in 0..y.rows {
                    let (yr, gr) = (y.row(r), gy.row(r));
                    let s = dot(yr, gr);
                    for (c, d) in dx.row_mut(r).iter_mut().enumerate() {
                        *d = yr[c] * (gr[c] - s);
                    }
                }
                acc(g, *x, dx);
            }
            Op::VladAggregate { a, f, c } => {
                let (av, fv, cv) = (self.value(*a), self.value(*f), self.value(*c));
                let (t, k, d) = (av.rows, av.cols, fv.cols);
                let mut da = Tensor::zeros(t, k);
                let mut df = Tensor::zeros(t, d);
                let mut dc = Tensor::zeros(k, d);
                for ki in 0..k {
                    let gk = gy.row(ki);
                    let gc = dot(gk, cv.row(ki));
                    let mut mass = 0.0;
                    for ti in 0..t {
                        let w = av.get(ti, ki);
                        mass += w;
                        da.data[ti * k + ki] = dot(gk, fv.row(ti)) - gc;
                        axpy(w, gk, df.row_mut(ti));
                    }
                    axpy(-mass, gk, dc.row_mut(ki));
                }
                acc(g, *a, da);
                acc(g, *f, df);
                acc(g, *c, dc);
            }
            Op::L2NormalizeRows { x } => {
                let (xv, y) = (self.value(*x), &node.value);
                let mut dx = Tensor::zeros(xv.rows, xv.cols);
                for r in 0..xv.rows {
                    let n = fmath::sqrt(dot(xv.row(r), xv.row(r)));
                    if n > 0.0 {
                        let (yr, gr) = (y.row(r), gy.row(r));
                        let s = dot(yr, gr);
                        for (c, d) in dx.row_mut(r).iter_mut().enumerate() {
                            *d = (gr[c] - yr[c] * s) / n;
                        }
                    }
                }
                acc(g, *x, dx);
            }
            Op::FlattenL2Normalize { x } => {
                let (xv, y) = (self.value(*x), &node.value);
                let mut dx = Tensor::zeros(xv.rows, xv.cols);
                let n = fmath::sqrt(dot(&xv.data, &xv.data));
                if n > 0.0 {
                    let s = dot(&y.data, &gy.data);
                    for (i, d) in dx.data.iter_mut().enumerate() {
                        *d = (gy.data[i] - y.data[i] * s) / n;
                    }
                }
                acc(g, *x, dx);
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let scale = gy.data[0] / labels.len().max(1) as f64;
                let mut dl = probs.clone();
                for (r, &y) in labels.iter().enumerate() {
                    dl.data[r * dl.cols + y] -= 1.0;
                }
                dl.data.iter_mut().for_each(|v| *v *= scale);
                acc(g, *logits, dl);
            }
            Op::WeightedSum { x, w } => {
                let mut dx = w.clone();
                dx.data.iter_mut().for_each(|v| *v *= gy.data[0]);
                acc(g, *x, dx);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Reduces a tensor to a scalar with fixed random weights, so every entry
    /// gets a distinct upstream gradient.
    fn probe(tape: &mut Tape, v: Var) -> Var {
        let t = tape.value(v);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let w = rand_tensor(&mut rng, t.rows, t.cols);
        tape.weighted_sum(v, w)
    }

    /// Compares the tape gradient of `f` with central differences for every
    /// entry of `inputs[which]`.
    fn check(inputs: &[Tensor], which: usize, f: impl Fn(&mut Tape, &[Var]) -> Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars);
        let grads = tape.backward(out);
        let g = grads.get(vars[which]).cloned().unwrap_or_else(|| Tensor::zeros(inputs[which].rows, inputs[which].cols));
        let h = 1e-6;
        for i in 0..inputs[which].len() {
            let eval = |delta: f64| {
                let mut ins = inputs.to_vec();
                ins[which].data[i] += delta;
                let mut t = Tape::new();
                let v: Vec<Var> = ins.iter().map(|x| t.leaf(x.clone())).collect();
                let o = f(&mut t, &v);
                t.value(o).data[0]
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let an = g.data[i];
            assert!((an - fd).abs() <= 1e-6 * (1.0 + an.abs().max(fd.abs())), "input {which} entry {i}: analytic {an} vs numeric {fd}");
        }
    }

    #[test]
    fn linear_and_leaky_relu_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ins = [rand_tensor(&mut rng, 4, 3), rand_tensor(&mut rng, 5, 3), rand_tensor(&mut rng, 1, 5)];
        for which in 0..3 {
            check(&ins, which, |t, v| {
                let y = t.linear(v[0], v[1], v[2]);
                let y = t.leaky_relu(y, 0.2);
                probe(t, y)
            });
        }
    }

    #[test]
    fn edge_linear_matches_concatenated_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_tensor(&mut rng, 4, 3);
        let w = rand_tensor(&mut rng, 5, 6);
        let b = rand_tensor(&mut rng, 1, 5);
        let center = vec![0, 0, 1, 2, 3, 3];
        let neighbor = vec![1, 2, 0, 2, 1, 3];
        let mut t = Tape::new();
        let (xv, wv, bv) = (t.leaf(x.clone()), t.leaf(w.clone()), t.leaf(b.clone()));
        let z = t.edge_linear(xv, wv, bv, center.clone(), neighbor.clone());
        for e in 0..center.len() {
            let (xi, xj) = (x.row(center[e]), x.row(neighbor[e]));
            let input: Vec<f64> = xi.iter().copied().chain(xj.iter().zip(xi).map(|(a, b)| a - b)).collect();
            for h in 0..5 {
                let want: f64 = w.row(h).iter().zip(&input).map(|(a, b)| a * b).sum::<f64>() + b.data[h];
                assert!((t.value(z).get(e, h) - want).abs() < 1e-12);
            }
        }
        let ins = [x, w, b];
        for which in 0..3 {
            check(&ins, which, |t, v| {
                let z = t.edge_linear(v[0], v[1], v[2], center.clone(), neighbor.clone());
                probe(t, z)
            });
        }
    }

    #[test]
    fn pooling_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ins = [rand_tensor(&mut rng, 5, 4)];
        check(&ins, 0, |t, v| {
            let m = t.segment_max(v[0], &[0, 1, 0, 2, 1], 3);
            probe(t, m)
        });
        check(&ins, 0, |t, v| {
            let m = t.mean_rows(v[0]);
            probe(t, m)
        });
        check(&ins, 0, |t, v| {
            let a = t.mean_rows(v[0]);
            let s = t.stack_rows(vec![Some(a), None, Some(a)], 4);
            let c = t.concat_cols(vec![s, s]);
            probe(t, c)
        });
    }

    #[test]
    fn normalization_and_softmax_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ins = [rand_tensor(&mut rng, 3, 4)];
        check(&ins, 0, |t, v| {
            let y = t.softmax_rows(v[0]);
            probe(t, y)
        });
        check(&ins, 0, |t, v| {
            let y = t.l2_normalize_rows(v[0]);
            probe(t, y)
        });
        check(&ins, 0, |t, v| {
            let y = t.flatten_l2_normalize(v[0]);
            probe(t, y)
        });
        check(&ins, 0, |t, v| t.cross_entropy(v[0], vec![1, 0, 3]));
    }

    #[test]
    fn vlad_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ins = [rand_tensor(&mut rng, 4, 3), rand_tensor(&mut rng, 4, 2), rand_tensor(&mut rng, 3, 2)];
        for which in 0..3 {
            check(&ins, which, |t, v| {
                let a = t.softmax_rows(v[0]);
                let y = t.vlad_aggregate(a, v[1], v[2]);
                probe(t, y)
            });
        }
    }

    #[test]
    fn zero_rows_normalize_to_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(2, 3));
        let r = t.l2_normalize_rows(x);
        let f = t.flatten_l2_normalize(x);
        assert!(t.value(r).data.iter().chain(&t.value(f).data).all(|&v| v == 0.0));
        let s = t.weighted_sum(f, Tensor::row_vector(vec![1.0; 6]));
        let g = t.backward(s);
        assert!(g.get(x).unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_logits_give_log_class_count() {
        let mut t = Tape::new();
        let l = t.leaf(Tensor::zeros(3, 18));
        let loss = t.cross_entropy(l, vec![0, 5, 17]);
        assert!((t.value(loss).data[0] - 18f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mean_rows_ignores_row_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Tensor::from_vec(7, 2, (0..14).map(|_| rng.gen_range(-1e3..1e3) * rng.gen::<f64>().powi(8)).collect()).unwrap();
        let mut rev = Tensor::zeros(7, 2);
        for r in 0..7 {
            rev.row_mut(r).copy_from_slice(x.row(6 - r));
        }
        let mut t = Tape::new();
        let (a, b) = (t.leaf(x), t.leaf(rev));
        let (ma, mb) = (t.mean_rows(a), t.mean_rows(b));
        assert_eq!(t.value(ma), t.value(mb));
    }
}
