use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{Dataset, ModelParams, SLOTS_PER_HALF};
use crate::actions::NUM_CLASSES;
use crate::autodiff::{Tape, Tensor, Var};
use crate::graph::PlayerGraph;
use crate::{fmath, Error, Result};

/// Directed message pairs: node `center[e]` receives from `neighbor[e]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeList {
    pub center: Vec<usize>,
    pub neighbor: Vec<usize>,
}

impl EdgeList {
    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    fn push(&mut self, c: usize, n: usize) {
        self.center.push(c);
        self.neighbor.push(n);
    }
}

/// Both directions of every proximity edge. A node without neighbors gets a
/// self pair so it still produces an output row.
pub fn physical_edges(graph: &PlayerGraph) -> EdgeList {
    let mut out = EdgeList::default();
    for (c, ns) in graph.adjacency().into_iter().enumerate() {
        if ns.is_empty() {
            out.push(c, c);
        }
        for n in ns {
            out.push(c, n);
        }
    }
    out
}

/// The `min(N − 1, k)` nearest other rows of `x` in Euclidean distance, ties
/// to the lower index. A single node gets a self pair.
pub fn knn_edges(x: &Tensor, k: usize) -> EdgeList {
    let n = x.rows;
    let k = k.min(n.saturating_sub(1));
    let mut out = EdgeList::default();
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for c in 0..n {
        if k == 0 {
            out.push(c, c);
            continue;
        }
        cand.clear();
        let xc = x.row(c);
        for j in (0..n).filter(|&j| j != c) {
            let d: f64 = xc.iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            cand.push((d, j));
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &cand[..k] {
            out.push(c, j);
        }
    }
    out
}

fn block_on_tape(tape: &mut Tape, x: Var, edges: &EdgeList, p: &[Var], slope: f64) -> Var {
    let n = tape.value(x).rows;
    let z = tape.edge_linear(x, p[0], p[1], edges.center.clone(), edges.neighbor.clone());
    let z = tape.leaky_relu(z, slope);
    let z = tape.linear(z, p[2], p[3]);
    tape.segment_max(z, &edges.center, n)
}

/// One edge-convolution block without gradients: for every node, the max
/// over its incoming pairs of `W2 · lrelu(W1 · [x_c ; x_n − x_c] + b1) + b2`.
pub fn edge_conv_block(x: &Tensor, edges: &EdgeList, w1: &Tensor, b1: &Tensor, w2: &Tensor, b2: &Tensor, slope: f64) -> Tensor {
    let mut tape = Tape::new();
    let vars = [x, w1, b1, w2, b2].map(|t| tape.leaf(t.clone()));
    let out = block_on_tape(&mut tape, vars[0], edges, &vars[1..], slope);
    tape.value(out).clone()
}

fn node_tensor(graph: &PlayerGraph) -> Tensor {
    let d = graph.nodes.first().map_or(0, |n| n.0.len());
    let data = graph.nodes.iter().flat_map(|n| n.0.iter().copied()).collect();
    Tensor { rows: graph.nodes.len(), cols: d, data }
}

fn frame_embedding(tape: &mut Tape, params: &ModelParams, pv: &[Var], graph: &PlayerGraph) -> Var {
    let cfg = &params.config;
    let mut x = tape.leaf(node_tensor(graph));
    for b in 0..cfg.blocks {
        let edges = if b == 0 { physical_edges(graph) } else { knn_edges(tape.value(x), cfg.k_dyn) };
        x = block_on_tape(tape, x, &edges, &pv[4 * b..4 * b + 4], cfg.leaky_slope);
    }
    tape.mean_rows(x)
}

fn netvlad(tape: &mut Tape, f: Var, p: &[Var]) -> Var {
    let logits = tape.linear(f, p[0], p[1]);
    let a = tape.softmax_rows(logits);
    let v = tape.vlad_aggregate(a, f, p[2]);
    let v = tape.l2_normalize_rows(v);
    tape.flatten_l2_normalize(v)
}

/// Logits for the windows `idx`, as a `B × 18` value on `tape`.
fn batch_logits(tape: &mut Tape, params: &ModelParams, pv: &[Var], ds: &Dataset, idx: &[usize]) -> Var {
    let cfg = &params.config;
    let vb = 4 * cfg.blocks;
    let mut cache: BTreeMap<u32, Var> = BTreeMap::new();
    let mut rows = Vec::with_capacity(idx.len());
    for &i in idx {
        let w = &ds.windows[i];
        let emb: Vec<Option<Var>> = w
            .slots
            .iter()
            .map(|s| {
                s.map(|f| match cache.get(&f) {
                    Some(&v) => v,
                    None => {
                        let v = frame_embedding(tape, params, pv, &ds.frames[f as usize]);
                        cache.insert(f, v);
                        v
                    }
                })
            })
            .collect();
        let before = tape.stack_rows(emb[..SLOTS_PER_HALF].to_vec(), cfg.hidden);
        let after = tape.stack_rows(emb[SLOTS_PER_HALF..].to_vec(), cfg.hidden);
        let mut parts = alloc::vec![netvlad(tape, before, &pv[vb..vb + 3]), netvlad(tape, after, &pv[vb + 3..vb + 6])];
        for f in &w.fusion {
            parts.push(tape.leaf(Tensor::row_vector(f.clone())));
        }
        let row = tape.concat_cols(parts);
        rows.push(Some(row));
    }
    let x = tape.stack_rows(rows, cfg.head_inputs());
    let h = cfg.head_start();
    tape.linear(x, pv[h], pv[h + 1])
}

fn check_inputs(params: &ModelParams, ds: &Dataset, idx: &[usize]) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= ds.len()) {
        return Err(Error::Contract(alloc::format!("window {bad} out of range ({} windows)", ds.len())));
    }
    for &i in idx {
        let dims: Vec<usize> = ds.windows[i].fusion.iter().map(Vec::len).collect();
        if dims != params.config.fusion_dims {
            return Err(Error::Shape(alloc::format!("window {i} fusion widths {dims:?}, model expects {:?}", params.config.fusion_dims)));
        }
        for f in ds.windows[i].slots.iter().flatten() {
            let g = &ds.frames[*f as usize];
            if g.nodes.first().is_some_and(|n| n.0.len() != params.config.node_dim) {
                return Err(Error::Shape(alloc::format!("window {i} has node features of width {}", g.nodes[0].0.len())));
            }
        }
    }
    Ok(())
}

/// Raw logits, one row of 18 per requested window.
pub fn forward_logits(params: &ModelParams, ds: &Dataset, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_inputs(params, ds, idx)?;
    if idx.is_empty() {
        return Ok(Vec::new());
    }
    let mut tape = Tape::new();
    let pv: Vec<Var> = params.tensors.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = batch_logits(&mut tape, params, &pv, ds, idx);
    let v = tape.value(out);
    Ok((0..v.rows).map(|r| v.row(r).to_vec()).collect())
}

/// Softmax class probabilities, background last.
pub fn predict_probs(params: &ModelParams, ds: &Dataset, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
    let mut out = forward_logits(params, ds, idx)?;
    for row in &mut out {
        let lse = fmath::log_sum_exp(row);
        row.iter_mut().for_each(|v| *v = fmath::exp(*v - lse));
    }
    Ok(out)
}

/// Mean cross-entropy over the windows `idx` and its gradient with respect to
/// every parameter tensor.
pub fn loss_and_grad(params: &ModelParams, ds: &Dataset, idx: &[usize]) -> Result<(f64, Vec<Tensor>)> {
    check_inputs(params, ds, idx)?;
    if idx.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let mut tape = Tape::new();
    let pv: Vec<Var> = params.tensors.iter().map(|t| tape.leaf(t.clone())).collect();
    let logits = batch_logits(&mut tape, params, &pv, ds, idx);
    let lv = tape.value(logits);
    for (r, &i) in idx.iter().enumerate() {
        let row = lv.row(r);
        debug_assert_eq!(row.len(), NUM_CLASSES);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { index: i, center_time_s: ds.windows[i].center_time_s });
        }
    }
    let labels = idx.iter().map(|&i| ds.windows[i].label).collect();
    let loss_var = tape.cross_entropy(logits, labels);
    let loss = tape.value(loss_var).data[0];
    if !loss.is_finite() {
        let i = idx[0];
        return Err(Error::NonFiniteLoss { index: i, center_time_s: ds.windows[i].center_time_s });
    }
    let mut grads = tape.backward(loss_var);
    let out = pv
        .iter()
        .zip(&params.tensors)
        .map(|(&v, t)| grads.take(v).unwrap_or_else(|| Tensor::zeros(t.rows, t.cols)))
        .collect();
    Ok((loss, out))
}
