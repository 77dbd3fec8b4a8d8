use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::ops::matmul_raw;
use crate::tensor::Tensor;
use crate::{Result, TensorError};

/// One recorded operation: which inputs feed it and how to push gradients
/// back through it. Saved data is `Arc`-shared with the tensors that own it.
#[derive(Debug)]
pub(crate) enum Rule {
    Leaf,
    Add { a: Option<u32>, b: Option<u32> },
    Sub { a: Option<u32>, b: Option<u32> },
    Mul { a: Option<u32>, b: Option<u32>, a_data: Arc<Vec<f64>>, b_data: Arc<Vec<f64>> },
    Div { a: Option<u32>, b: Option<u32>, a_data: Arc<Vec<f64>>, b_data: Arc<Vec<f64>> },
    Scale { x: u32, factor: f64 },
    /// y = s * x with s a one-element tensor.
    ScaleT { x: Option<u32>, s: Option<u32>, x_data: Arc<Vec<f64>>, s_val: f64 },
    AddScalar { x: u32 },
    /// y[r, c] = x[r, c] + bias[c]
    AddBias { x: Option<u32>, bias: Option<u32>, rows: usize, cols: usize },
    Matmul { a: Option<u32>, b: Option<u32>, a_data: Arc<Vec<f64>>, b_data: Arc<Vec<f64>>, m: usize, k: usize, n: usize },
    Transpose2d { x: u32, rows: usize, cols: usize },
    Reshape { x: u32 },
    SliceCols { x: u32, start: usize, width: usize, in_cols: usize, rows: usize },
    ConcatCols { xs: Vec<Option<u32>>, widths: Vec<usize>, rows: usize },
    ConcatRows { xs: Vec<Option<u32>>, sizes: Vec<usize> },
    Exp { x: u32, y_data: Arc<Vec<f64>> },
    Ln { x: u32, x_data: Arc<Vec<f64>> },
    AbsFloor { x: u32, x_data: Arc<Vec<f64>>, floor: f64 },
    Relu { x: u32, x_data: Arc<Vec<f64>> },
    Gelu { x: u32, x_data: Arc<Vec<f64>> },
    SoftmaxLast { x: u32, y_data: Arc<Vec<f64>>, cols: usize },
    LayerNorm {
        x: Option<u32>,
        gamma: Option<u32>,
        beta: Option<u32>,
        x_data: Arc<Vec<f64>>,
        gamma_data: Arc<Vec<f64>>,
        cols: usize,
        eps: f64,
    },
    Dropout { x: u32, mask: Arc<Vec<f64>> },
    EmbedLookup { table: u32, ids: Arc<Vec<usize>>, table_rows: usize, dim: usize },
    CrossEntropy { logits: u32, logits_data: Arc<Vec<f64>>, targets: Arc<Vec<usize>>, pad: usize, vocab: usize },
    KlDiv { a: Option<u32>, b: Option<u32>, a_data: Arc<Vec<f64>>, b_data: Arc<Vec<f64>>, rows: usize, cols: usize },
    Sum { x: u32, numel: usize },
    Mean { x: u32, numel: usize },
}

pub(crate) struct Node {
    pub(crate) rule: Rule,
    /// Element count of this node's output, for gradient allocation.
    pub(crate) numel: usize,
    pub(crate) is_leaf: bool,
}

pub(crate) struct Tape {
    pub(crate) generation: u64,
    pub(crate) nodes: Vec<Node>,
}

impl Tape {
    pub(crate) fn push(&mut self, rule: Rule, numel: usize) -> u32 {
        let is_leaf = matches!(rule, Rule::Leaf);
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { rule, numel, is_leaf });
        id
    }
}

thread_local! {
    static ACTIVE: RefCell<Option<Tape>> = const { RefCell::new(None) };
}

static GENERATION: AtomicU64 = AtomicU64::new(1);

/// Run `f` with a fresh gradient tape installed on this thread. Operations
/// executed inside record backward rules; [`backward`] may be called any
/// number of times before the scope closes. Scopes do not nest.
pub fn scope<R>(f: impl FnOnce() -> R) -> R {
    let generation = GENERATION.fetch_add(1, Ordering::Relaxed);
    ACTIVE.with(|slot| {
        let mut slot = slot.borrow_mut();
        assert!(slot.is_none(), "tape scopes do not nest");
        *slot = Some(Tape { generation, nodes: Vec::new() });
    });
    struct Guard;
    impl Drop for Guard {
        fn drop(&mut self) {
            ACTIVE.with(|slot| *slot.borrow_mut() = None);
        }
    }
    let _guard = Guard;
    f()
}

/// True while a tape scope is open on this thread.
pub fn is_recording() -> bool {
    ACTIVE.with(|slot| slot.borrow().is_some())
}

/// Register `t` as a differentiable leaf on the open tape and return the
/// tracked handle. Outside a scope this is the identity.
pub fn watch(t: &Tensor) -> Tensor {
    ACTIVE.with(|slot| {
        let mut slot = slot.borrow_mut();
        match slot.as_mut() {
            Some(tape) => {
                let id = tape.push(Rule::Leaf, t.numel());
                t.with_node(Some((tape.generation, id)))
            }
            None => t.detached(),
        }
    })
}

/// Record an op on the active tape, if any. Returns the node handle for the
/// output tensor. `inputs_tracked` short-circuits recording when no input
/// participates in differentiation.
pub(crate) fn record(
    inputs_tracked: bool,
    numel: usize,
    rule: impl FnOnce(&Tape) -> Rule,
) -> Option<(u64, u32)> {
    if !inputs_tracked {
        return None;
    }
    ACTIVE.with(|slot| {
        let mut slot = slot.borrow_mut();
        slot.as_mut().map(|tape| {
            let r = rule(tape);
            let id = tape.push(r, numel);
            (tape.generation, id)
        })
    })
}

/// Current tape generation, if a scope is open.
pub(crate) fn current_generation() -> Option<u64> {
    ACTIVE.with(|slot| slot.borrow().as_ref().map(|t| t.generation))
}

/// Gradients produced by [`backward`], keyed by tape node.
pub struct GradMap {
    generation: u64,
    grads: HashMap<u32, Arc<Vec<f64>>>,
}

impl GradMap {
    /// Gradient of the loss with respect to `t`. `None` when `t` was not
    /// tracked on the tape this map came from.
    pub fn get(&self, t: &Tensor) -> Option<&[f64]> {
        let id = t.node_in(self.generation)?;
        self.grads.get(&id).map(|v| v.as_slice())
    }
}

/// Reverse pass over the active tape. `loss` must be a tracked one-element
/// tensor. Every leaf receives a gradient; leaves the loss does not reach
/// get zeros. The tape is left intact, so a second call yields identical
/// results.
pub fn backward(loss: &Tensor) -> Result<GradMap> {
    if loss.numel() != 1 {
        return Err(TensorError::NotScalar(loss.shape().to_vec()));
    }
    ACTIVE.with(|slot| {
        let slot = slot.borrow();
        let tape = slot.as_ref().ok_or(TensorError::NoTape)?;
        let loss_id = loss.node_in(tape.generation).ok_or(TensorError::NoTape)?;

        let n = tape.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss_id as usize] = Some(vec![1.0]);

        for id in (0..n).rev() {
            let upstream = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            step_back(&tape.nodes[id].rule, &upstream, &tape.nodes, &mut grads);
            // Leaves keep their accumulated gradient for the output map.
            if tape.nodes[id].is_leaf {
                grads[id] = Some(upstream);
            }
        }

        let mut out = HashMap::new();
        for (id, node) in tape.nodes.iter().enumerate() {
            if node.is_leaf {
                let g = grads[id].take().unwrap_or_else(|| vec![0.0; node.numel]);
                out.insert(id as u32, Arc::new(g));
            }
        }
        Ok(GradMap { generation: tape.generation, grads: out })
    })
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: u32, contrib: &[f64]) {
    let slot = &mut grads[id as usize];
    match slot {
        Some(existing) => {
            for (e, c) in existing.iter_mut().zip(contrib) {
                *e += c;
            }
        }
        None => {
            debug_assert_eq!(contrib.len(), nodes[id as usize].numel);
            *slot = Some(contrib.to_vec());
        }
    }
}

#[allow(clippy::too_many_lines)]
fn step_back(rule: &Rule, g: &[f64], nodes: &[Node], grads: &mut [Option<Vec<f64>>]) {
    match rule {
        Rule::Leaf => {}
        Rule::Add { a, b } => {
            if let Some(a) = a {
                accumulate(grads, nodes, *a, g);
            }
            if let Some(b) = b {
                accumulate(grads, nodes, *b, g);
            }
        }
        Rule::Sub { a, b } => {
            if let Some(a) = a {
                accumulate(grads, nodes, *a, g);
            }
            if let Some(b) = b {
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                accumulate(grads, nodes, *b, &neg);
            }
        }
        Rule::Mul { a, b, a_data, b_data } => {
            if let Some(a) = a {
                let da: Vec<f64> = g.iter().zip(b_data.iter()).map(|(g, b)| g * b).collect();
                accumulate(grads, nodes, *a, &da);
            }
            if let Some(b) = b {
                let db: Vec<f64> = g.iter().zip(a_data.iter()).map(|(g, a)| g * a).collect();
                accumulate(grads, nodes, *b, &db);
            }
        }
        Rule::Div { a, b, a_data, b_data } => {
            if let Some(a) = a {
                let da: Vec<f64> = g.iter().zip(b_data.iter()).map(|(g, b)| g / b).collect();
                accumulate(grads, nodes, *a, &da);
            }
            if let Some(b) = b {
                let db: Vec<f64> = g
                    .iter()
                    .zip(a_data.iter().zip(b_data.iter()))
                    .map(|(g, (a, b))| -g * a / (b * b))
                    .collect();
                accumulate(grads, nodes, *b, &db);
            }
        }
        Rule::Scale { x, factor } => {
            let dx: Vec<f64> = g.iter().map(|v| v * factor).collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::ScaleT { x, s, x_data, s_val } => {
            if let Some(x) = x {
                let dx: Vec<f64> = g.iter().map(|v| v * s_val).collect();
                accumulate(grads, nodes, *x, &dx);
            }
            if let Some(s) = s {
                let ds: f64 = g.iter().zip(x_data.iter()).map(|(g, x)| g * x).sum();
                accumulate(grads, nodes, *s, &[ds]);
            }
        }
        Rule::AddScalar { x } => accumulate(grads, nodes, *x, g),
        Rule::AddBias { x, bias, rows, cols } => {
            if let Some(x) = x {
                accumulate(grads, nodes, *x, g);
            }
            if let Some(bias) = bias {
                let mut db = vec![0.0; *cols];
                for r in 0..*rows {
                    for c in 0..*cols {
                        db[c] += g[r * cols + c];
                    }
                }
                accumulate(grads, nodes, *bias, &db);
            }
        }
        Rule::Matmul { a, b, a_data, b_data, m, k, n } => {
            let (m, k, n) = (*m, *k, *n);
            if let Some(a) = a {
                // dA = g @ B^T
                let mut bt = vec![0.0; n * k];
                transpose_raw(b_data, &mut bt, k, n);
                let mut da = vec![0.0; m * k];
                matmul_raw(g, &bt, &mut da, m, n, k);
                accumulate(grads, nodes, *a, &da);
            }
            if let Some(b) = b {
                // dB = A^T @ g
                let mut at = vec![0.0; k * m];
                transpose_raw(a_data, &mut at, m, k);
                let mut db = vec![0.0; k * n];
                matmul_raw(&at, g, &mut db, k, m, n);
                accumulate(grads, nodes, *b, &db);
            }
        }
        Rule::Transpose2d { x, rows, cols } => {
            // Output was cols x rows; transpose the gradient back.
            let mut dx = vec![0.0; rows * cols];
            transpose_raw(g, &mut dx, *cols, *rows);
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::Reshape { x } => accumulate(grads, nodes, *x, g),
        Rule::SliceCols { x, start, width, in_cols, rows } => {
            let mut dx = vec![0.0; rows * in_cols];
            for r in 0..*rows {
                for c in 0..*width {
                    dx[r * in_cols + start + c] = g[r * width + c];
                }
            }
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::ConcatCols { xs, widths, rows } => {
            let total: usize = widths.iter().sum();
            let mut offset = 0;
            for (x, w) in xs.iter().zip(widths) {
                if let Some(x) = x {
                    let mut dx = vec![0.0; rows * w];
                    for r in 0..*rows {
                        dx[r * w..(r + 1) * w].copy_from_slice(&g[r * total + offset..r * total + offset + w]);
                    }
                    accumulate(grads, nodes, *x, &dx);
                }
                offset += w;
            }
        }
        Rule::ConcatRows { xs, sizes } => {
            let mut offset = 0;
            for (x, sz) in xs.iter().zip(sizes) {
                if let Some(x) = x {
                    accumulate(grads, nodes, *x, &g[offset..offset + sz]);
                }
                offset += sz;
            }
        }
        Rule::Exp { x, y_data } => {
            let dx: Vec<f64> = g.iter().zip(y_data.iter()).map(|(g, y)| g * y).collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::Ln { x, x_data } => {
            let dx: Vec<f64> = g.iter().zip(x_data.iter()).map(|(g, x)| g / x).collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::AbsFloor { x, x_data, floor } => {
            let dx: Vec<f64> = g
                .iter()
                .zip(x_data.iter())
                .map(|(g, x)| if x.abs() > *floor { g * x.signum() } else { 0.0 })
                .collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::Relu { x, x_data } => {
            let dx: Vec<f64> = g
                .iter()
                .zip(x_data.iter())
                .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                .collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::Gelu { x, x_data } => {
            // d/dx x*Phi(x) = Phi(x) + x * phi(x)
            let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
            let dx: Vec<f64> = g
                .iter()
                .zip(x_data.iter())
                .map(|(g, &x)| {
                    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
                    let pdf = inv_sqrt_2pi * (-0.5 * x * x).exp();
                    g * (cdf + x * pdf)
                })
                .collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::SoftmaxLast { x, y_data, cols } => {
            let rows = y_data.len() / cols;
            let mut dx = vec![0.0; y_data.len()];
            for r in 0..rows {
                let base = r * cols;
                let mut dot = 0.0;
                for c in 0..*cols {
                    dot += g[base + c] * y_data[base + c];
                }
                for c in 0..*cols {
                    dx[base + c] = y_data[base + c] * (g[base + c] - dot);
                }
            }
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::LayerNorm { x, gamma, beta, x_data, gamma_data, cols, eps } => {
            let c = *cols;
            let rows = x_data.len() / c;
            let mut dx = vec![0.0; x_data.len()];
            let mut dgamma = vec![0.0; c];
            let mut dbeta = vec![0.0; c];
            for r in 0..rows {
                let row = &x_data[r * c..(r + 1) * c];
                let mean = row.iter().sum::<f64>() / c as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
                let inv_std = 1.0 / (var + eps).sqrt();
                // xhat and the two row reductions the input gradient needs.
                let mut sum_gy = 0.0;
                let mut sum_gy_xhat = 0.0;
                let mut xhat = vec![0.0; c];
                for i in 0..c {
                    xhat[i] = (row[i] - mean) * inv_std;
                    let gy = g[r * c + i] * gamma_data[i];
                    sum_gy += gy;
                    sum_gy_xhat += gy * xhat[i];
                }
                for i in 0..c {
                    let gy = g[r * c + i] * gamma_data[i];
                    dx[r * c + i] = inv_std * (gy - sum_gy / c as f64 - xhat[i] * sum_gy_xhat / c as f64);
                    dgamma[i] += g[r * c + i] * xhat[i];
                    dbeta[i] += g[r * c + i];
                }
            }
            if let Some(x) = x {
                accumulate(grads, nodes, *x, &dx);
            }
            if let Some(gamma) = gamma {
                accumulate(grads, nodes, *gamma, &dgamma);
            }
            if let Some(beta) = beta {
                accumulate(grads, nodes, *beta, &dbeta);
            }
        }
        Rule::Dropout { x, mask } => {
            let dx: Vec<f64> = g.iter().zip(mask.iter()).map(|(g, m)| g * m).collect();
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::EmbedLookup { table, ids, table_rows, dim } => {
            let mut dt = vec![0.0; table_rows * dim];
            for (pos, &id) in ids.iter().enumerate() {
                for d in 0..*dim {
                    dt[id * dim + d] += g[pos * dim + d];
                }
            }
            accumulate(grads, nodes, *table, &dt);
        }
        Rule::CrossEntropy { logits, logits_data, targets, pad, vocab } => {
            let v = *vocab;
            let scale = g[0];
            let n_valid = targets.iter().filter(|&&t| t != *pad).count() as f64;
            let mut dl = vec![0.0; logits_data.len()];
            for (pos, &t) in targets.iter().enumerate() {
                if t == *pad {
                    continue;
                }
                let row = &logits_data[pos * v..(pos + 1) * v];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for j in 0..v {
                    let e = (row[j] - max).exp();
                    dl[pos * v + j] = e;
                    sum += e;
                }
                for j in 0..v {
                    dl[pos * v + j] /= sum;
                }
                dl[pos * v + t] -= 1.0;
                for j in 0..v {
                    dl[pos * v + j] *= scale / n_valid;
                }
            }
            accumulate(grads, nodes, *logits, &dl);
        }
        Rule::KlDiv { a, b, a_data, b_data, rows, cols } => {
            let (r, c) = (*rows, *cols);
            let scale = g[0] / r as f64;
            let mut da = vec![0.0; r * c];
            let mut db = vec![0.0; r * c];
            for row in 0..r {
                let ar = &a_data[row * c..(row + 1) * c];
                let br = &b_data[row * c..(row + 1) * c];
                let lp = log_softmax_row(ar);
                let lq = log_softmax_row(br);
                let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
                let q: Vec<f64> = lq.iter().map(|v| v.exp()).collect();
                let kl_pq: f64 = (0..c).map(|j| p[j] * (lp[j] - lq[j])).sum();
                let kl_qp: f64 = (0..c).map(|j| q[j] * (lq[j] - lp[j])).sum();
                for i in 0..c {
                    // d/da of 0.5*(KL(p||q) + KL(q||p)); symmetric in b.
                    da[row * c + i] =
                        scale * 0.5 * (p[i] * ((lp[i] - lq[i]) - kl_pq) + (p[i] - q[i]));
                    db[row * c + i] =
                        scale * 0.5 * (q[i] * ((lq[i] - lp[i]) - kl_qp) + (q[i] - p[i]));
                }
            }
            if let Some(a) = a {
                accumulate(grads, nodes, *a, &da);
            }
            if let Some(b) = b {
                accumulate(grads, nodes, *b, &db);
            }
        }
        Rule::Sum { x, numel } => {
            let dx = vec![g[0]; *numel];
            accumulate(grads, nodes, *x, &dx);
        }
        Rule::Mean { x, numel } => {
            let dx = vec![g[0] / *numel as f64; *numel];
            accumulate(grads, nodes, *x, &dx);
        }
    }
}

pub(crate) fn transpose_raw(src: &[f64], dst: &mut [f64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

pub(crate) fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    row.iter().map(|v| v - lse).collect()
}
