use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tape::{current_generation, log_softmax_row, record, transpose_raw, Rule};
use crate::tensor::Tensor;
use crate::{Result, TensorError};

fn check_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite { op })
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(TensorError::ShapeMismatch {
            op,
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        })
    }
}

/// Tracking state of an op's inputs under the currently open tape.
fn track2(a: &Tensor, b: &Tensor) -> (bool, Option<u32>, Option<u32>) {
    match current_generation() {
        Some(generation) => {
            let na = a.node_in(generation);
            let nb = b.node_in(generation);
            (na.is_some() || nb.is_some(), na, nb)
        }
        None => (false, None, None),
    }
}

fn track1(x: &Tensor) -> (bool, Option<u32>) {
    match current_generation() {
        Some(generation) => {
            let nx = x.node_in(generation);
            (nx.is_some(), nx)
        }
        None => (false, None),
    }
}

fn finish(mut out: Tensor, node: Option<(u64, u32)>) -> Tensor {
    out.node = node;
    out
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    // i-k-j ordering keeps the inner loop contiguous in b and out.
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("add", self, other)?;
        let data: Vec<f64> = self.data().iter().zip(other.data()).map(|(a, b)| a + b).collect();
        check_finite("add", &data)?;
        let (tracked, na, nb) = track2(self, other);
        let out = Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None };
        let node = record(tracked, out.numel(), |_| Rule::Add { a: na, b: nb });
        Ok(finish(out, node))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("sub", self, other)?;
        let data: Vec<f64> = self.data().iter().zip(other.data()).map(|(a, b)| a - b).collect();
        check_finite("sub", &data)?;
        let (tracked, na, nb) = track2(self, other);
        let out = Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None };
        let node = record(tracked, out.numel(), |_| Rule::Sub { a: na, b: nb });
        Ok(finish(out, node))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("mul", self, other)?;
        let data: Vec<f64> = self.data().iter().zip(other.data()).map(|(a, b)| a * b).collect();
        check_finite("mul", &data)?;
        let (tracked, na, nb) = track2(self, other);
        let node = record(tracked, data.len(), |_| Rule::Mul {
            a: na,
            b: nb,
            a_data: Arc::clone(&self.data),
            b_data: Arc::clone(&other.data),
        });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    /// Elementwise quotient.
    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("div", self, other)?;
        let data: Vec<f64> = self.data().iter().zip(other.data()).map(|(a, b)| a / b).collect();
        check_finite("div", &data)?;
        let (tracked, na, nb) = track2(self, other);
        let node = record(tracked, data.len(), |_| Rule::Div {
            a: na,
            b: nb,
            a_data: Arc::clone(&self.data),
            b_data: Arc::clone(&other.data),
        });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    /// Multiply every element by a plain constant.
    pub fn scale(&self, factor: f64) -> Result<Tensor> {
        let data: Vec<f64> = self.data().iter().map(|v| v * factor).collect();
        check_finite("scale", &data)?;
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::Scale { x: nx.unwrap(), factor });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    /// Multiply by a one-element tensor; gradients flow to both operands.
    pub fn scale_by(&self, s: &Tensor) -> Result<Tensor> {
        let s_val = s.item()?;
        let data: Vec<f64> = self.data().iter().map(|v| v * s_val).collect();
        check_finite("scale_by", &data)?;
        let (tracked, nx, ns) = track2(self, s);
        let node = record(tracked, data.len(), |_| Rule::ScaleT {
            x: nx,
            s: ns,
            x_data: Arc::clone(&self.data),
            s_val,
        });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    pub fn add_scalar(&self, c: f64) -> Result<Tensor> {
        let data: Vec<f64> = self.data().iter().map(|v| v + c).collect();
        check_finite("add_scalar", &data)?;
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::AddScalar { x: nx.unwrap() });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    pub fn neg(&self) -> Result<Tensor> {
        self.scale(-1.0)
    }

    /// Broadcast-add a length-C vector to every row of a [..., C] tensor.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        let cols = self.last_dim();
        if bias.shape() != [cols] {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                detail: format!("bias {:?} for last dim {}", bias.shape(), cols),
            });
        }
        let rows = self.rows_for_lastdim();
        let mut data = Vec::with_capacity(self.numel());
        for r in 0..rows {
            for c in 0..cols {
                data.push(self.data[r * cols + c] + bias.data[c]);
            }
        }
        check_finite("add_bias", &data)?;
        let (tracked, nx, nb) = track2(self, bias);
        let node = record(tracked, data.len(), |_| Rule::AddBias { x: nx, bias: nb, rows, cols });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    /// 2D matrix product.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = match self.shape() {
            [m, k] => (*m, *k),
            s => {
                return Err(TensorError::ShapeMismatch {
                    op: "matmul",
                    detail: format!("lhs must be 2D, got {:?}", s),
                })
            }
        };
        let (k2, n) = match other.shape() {
            [k2, n] => (*k2, *n),
            s => {
                return Err(TensorError::ShapeMismatch {
                    op: "matmul",
                    detail: format!("rhs must be 2D, got {:?}", s),
                })
            }
        };
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                detail: format!("inner dims {} vs {}", k, k2),
            });
        }
        let mut data = vec![0.0; m * n];
        matmul_raw(self.data(), other.data(), &mut data, m, k, n);
        check_finite("matmul", &data)?;
        let (tracked, na, nb) = track2(self, other);
        let node = record(tracked, data.len(), |_| Rule::Matmul {
            a: na,
            b: nb,
            a_data: Arc::clone(&self.data),
            b_data: Arc::clone(&other.data),
            m,
            k,
            n,
        });
        Ok(finish(Tensor { shape: vec![m, n], data: Arc::new(data), node: None }, node))
    }

    /// Transpose of a 2D tensor.
    pub fn transpose2d(&self) -> Result<Tensor> {
        let (rows, cols) = match self.shape() {
            [r, c] => (*r, *c),
            s => {
                return Err(TensorError::ShapeMismatch {
                    op: "transpose2d",
                    detail: format!("expected 2D, got {:?}", s),
                })
            }
        };
        let mut data = vec![0.0; rows * cols];
        transpose_raw(self.data(), &mut data, rows, cols);
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::Transpose2d { x: nx.unwrap(), rows, cols });
        Ok(finish(Tensor { shape: vec![cols, rows], data: Arc::new(data), node: None }, node))
    }

    /// Reinterpret the data under a new shape with the same element count.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                detail: format!("{:?} -> {:?}", self.shape(), shape),
            });
        }
        let (tracked, nx) = track1(self);
        let node = record(tracked, numel, |_| Rule::Reshape { x: nx.unwrap() });
        Ok(finish(Tensor { shape, data: Arc::clone(&self.data), node: None }, node))
    }

    /// Columns [start, start+width) of a 2D tensor.
    pub fn slice_cols(&self, start: usize, width: usize) -> Result<Tensor> {
        let (rows, cols) = match self.shape() {
            [r, c] => (*r, *c),
            s => {
                return Err(TensorError::ShapeMismatch {
                    op: "slice_cols",
                    detail: format!("expected 2D, got {:?}", s),
                })
            }
        };
        if start + width > cols {
            return Err(TensorError::InvalidArg {
                op: "slice_cols",
                detail: format!("range {}..{} exceeds {} cols", start, start + width, cols),
            });
        }
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend_from_slice(&self.data[r * cols + start..r * cols + start + width]);
        }
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::SliceCols {
            x: nx.unwrap(),
            start,
            width,
            in_cols: cols,
            rows,
        });
        Ok(finish(Tensor { shape: vec![rows, width], data: Arc::new(data), node: None }, node))
    }

    pub fn exp(&self) -> Result<Tensor> {
        let data: Vec<f64> = self.data().iter().map(|v| v.exp()).collect();
        check_finite("exp", &data)?;
        let out = Arc::new(data);
        let (tracked, nx) = track1(self);
        let node = record(tracked, out.len(), |_| Rule::Exp { x: nx.unwrap(), y_data: Arc::clone(&out) });
        Ok(finish(Tensor { shape: self.shape.clone(), data: out, node: None }, node))
    }

    /// Natural log; every element must be strictly positive.
    pub fn ln(&self) -> Result<Tensor> {
        if self.data().iter().any(|&v| v <= 0.0) {
            return Err(TensorError::InvalidArg {
                op: "ln",
                detail: "non-positive input".into(),
            });
        }
        let data: Vec<f64> = self.data().iter().map(|v| v.ln()).collect();
        check_finite("ln", &data)?;
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::Ln {
            x: nx.unwrap(),
            x_data: Arc::clone(&self.data),
        });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    /// max(|x|, floor), elementwise. Keeps scale parameters away from zero.
    pub fn abs_floor(&self, floor: f64) -> Result<Tensor> {
        let data: Vec<f64> = self.data().iter().map(|v| v.abs().max(floor)).collect();
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::AbsFloor {
            x: nx.unwrap(),
            x_data: Arc::clone(&self.data),
            floor,
        });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    pub fn relu(&self) -> Result<Tensor> {
        let data: Vec<f64> = self.data().iter().map(|v| v.max(0.0)).collect();
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::Relu {
            x: nx.unwrap(),
            x_data: Arc::clone(&self.data),
        });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    /// Gaussian Error Linear Unit in its exact erf form: x * Phi(x).
    pub fn gelu(&self) -> Result<Tensor> {
        let data: Vec<f64> = self
            .data()
            .iter()
            .map(|&x| x * 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2)))
            .collect();
        check_finite("gelu", &data)?;
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::Gelu {
            x: nx.unwrap(),
            x_data: Arc::clone(&self.data),
        });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    /// Softmax over the last dimension, stabilized by max subtraction.
    pub fn softmax_lastdim(&self) -> Result<Tensor> {
        let cols = self.last_dim();
        if cols == 0 {
            return Err(TensorError::InvalidArg {
                op: "softmax_lastdim",
                detail: "empty last dimension".into(),
            });
        }
        let rows = self.rows_for_lastdim();
        let mut data = vec![0.0; self.numel()];
        for r in 0..rows {
            let row = &self.data[r * cols..(r + 1) * cols];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for c in 0..cols {
                let e = (row[c] - max).exp();
                data[r * cols + c] = e;
                sum += e;
            }
            for c in 0..cols {
                data[r * cols + c] /= sum;
            }
        }
        check_finite("softmax_lastdim", &data)?;
        let out = Arc::new(data);
        let (tracked, nx) = track1(self);
        let node = record(tracked, out.len(), |_| Rule::SoftmaxLast {
            x: nx.unwrap(),
            y_data: Arc::clone(&out),
            cols,
        });
        Ok(finish(Tensor { shape: self.shape.clone(), data: out, node: None }, node))
    }

    /// Layer normalization over the last dimension with learned gain/offset.
    pub fn layernorm(&self, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
        let cols = self.last_dim();
        if gamma.shape() != [cols] || beta.shape() != [cols] {
            return Err(TensorError::ShapeMismatch {
                op: "layernorm",
                detail: format!(
                    "gamma {:?} beta {:?} for last dim {}",
                    gamma.shape(),
                    beta.shape(),
                    cols
                ),
            });
        }
        let rows = self.rows_for_lastdim();
        let mut data = vec![0.0; self.numel()];
        for r in 0..rows {
            let row = &self.data[r * cols..(r + 1) * cols];
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            for c in 0..cols {
                data[r * cols + c] = (row[c] - mean) * inv_std * gamma.data[c] + beta.data[c];
            }
        }
        check_finite("layernorm", &data)?;
        let generation = current_generation();
        let (nx, ng, nb) = match generation {
            Some(g) => (self.node_in(g), gamma.node_in(g), beta.node_in(g)),
            None => (None, None, None),
        };
        let tracked = nx.is_some() || ng.is_some() || nb.is_some();
        let node = record(tracked, data.len(), |_| Rule::LayerNorm {
            x: nx,
            gamma: ng,
            beta: nb,
            x_data: Arc::clone(&self.data),
            gamma_data: Arc::clone(&gamma.data),
            cols,
            eps,
        });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    /// Inverted dropout with an explicit seed. Rate 0 is the exact identity;
    /// the same (input shape, seed) always produces the same mask.
    pub fn dropout(&self, rate: f64, seed: u64) -> Result<Tensor> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidArg {
                op: "dropout",
                detail: format!("rate {} outside [0, 1)", rate),
            });
        }
        if rate == 0.0 {
            return Ok(self.clone());
        }
        let keep = 1.0 - rate;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask: Vec<f64> = (0..self.numel())
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let data: Vec<f64> = self.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        check_finite("dropout", &data)?;
        let mask = Arc::new(mask);
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::Dropout { x: nx.unwrap(), mask });
        Ok(finish(Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }, node))
    }

    /// Gather rows of `self` (a [R, D] table) at the given indices.
    pub fn embedding_lookup(&self, ids: &[usize]) -> Result<Tensor> {
        let (table_rows, dim) = match self.shape() {
            [r, d] => (*r, *d),
            s => {
                return Err(TensorError::ShapeMismatch {
                    op: "embedding_lookup",
                    detail: format!("table must be 2D, got {:?}", s),
                })
            }
        };
        if let Some(&bad) = ids.iter().find(|&&id| id >= table_rows) {
            return Err(TensorError::InvalidArg {
                op: "embedding_lookup",
                detail: format!("index {} out of range for {} rows", bad, table_rows),
            });
        }
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            data.extend_from_slice(&self.data[id * dim..(id + 1) * dim]);
        }
        let n_rows = ids.len();
        let ids = Arc::new(ids.to_vec());
        let (tracked, nx) = track1(self);
        let node = record(tracked, data.len(), |_| Rule::EmbedLookup {
            table: nx.unwrap(),
            ids,
            table_rows,
            dim,
        });
        Ok(finish(Tensor { shape: vec![n_rows, dim], data: Arc::new(data), node: None }, node))
    }

    /// Mean negative log-likelihood of `targets` under row logits, skipping
    /// positions whose target equals `pad`.
    pub fn cross_entropy(&self, targets: &[usize], pad: usize) -> Result<Tensor> {
        let (rows, vocab) = match self.shape() {
            [r, v] => (*r, *v),
            s => {
                return Err(TensorError::ShapeMismatch {
                    op: "cross_entropy",
                    detail: format!("logits must be 2D, got {:?}", s),
                })
            }
        };
        if targets.len() != rows {
            return Err(TensorError::ShapeMismatch {
                op: "cross_entropy",
                detail: format!("{} targets for {} rows", targets.len(), rows),
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t != pad && t >= vocab) {
            return Err(TensorError::InvalidArg {
                op: "cross_entropy",
                detail: format!("target {} out of vocab {}", bad, vocab),
            });
        }
        let n_valid = targets.iter().filter(|&&t| t != pad).count();
        if n_valid == 0 {
            return Err(TensorError::InvalidArg {
                op: "cross_entropy",
                detail: "no non-pad targets".into(),
            });
        }
        let mut total = 0.0;
        for (pos, &t) in targets.iter().enumerate() {
            if t == pad {
                continue;
            }
            let row = &self.data[pos * vocab..(pos + 1) * vocab];
            let lsm = log_softmax_row(row);
            total -= lsm[t];
        }
        let loss = total / n_valid as f64;
        if !loss.is_finite() {
            return Err(TensorError::NonFinite { op: "cross_entropy" });
        }
        let targets = Arc::new(targets.to_vec());
        let (tracked, nx) = track1(self);
        let node = record(tracked, 1, |_| Rule::CrossEntropy {
            logits: nx.unwrap(),
            logits_data: Arc::clone(&self.data),
            targets,
            pad,
            vocab,
        });
        Ok(finish(Tensor { shape: vec![1], data: Arc::new(vec![loss]), node: None }, node))
    }

    /// Symmetric KL divergence (KL(p||q) + KL(q||p)) / 2 between the row
    /// distributions implied by two logit tensors, averaged over rows.
    pub fn kl_divergence(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("kl_divergence", self, other)?;
        let cols = self.last_dim();
        let rows = self.rows_for_lastdim();
        let mut total = 0.0;
        for r in 0..rows {
            let lp = log_softmax_row(&self.data[r * cols..(r + 1) * cols]);
            let lq = log_softmax_row(&other.data[r * cols..(r + 1) * cols]);
            for j in 0..cols {
                let p = lp[j].exp();
                let q = lq[j].exp();
                total += 0.5 * (p * (lp[j] - lq[j]) + q * (lq[j] - lp[j]));
            }
        }
        let value = total / rows as f64;
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: "kl_divergence" });
        }
        let (tracked, na, nb) = track2(self, other);
        let node = record(tracked, 1, |_| Rule::KlDiv {
            a: na,
            b: nb,
            a_data: Arc::clone(&self.data),
            b_data: Arc::clone(&other.data),
            rows,
            cols,
        });
        Ok(finish(Tensor { shape: vec![1], data: Arc::new(vec![value]), node: None }, node))
    }

    /// Sum of all elements.
    pub fn sum(&self) -> Result<Tensor> {
        let value: f64 = self.data().iter().sum();
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: "sum" });
        }
        let (tracked, nx) = track1(self);
        let numel = self.numel();
        let node = record(tracked, 1, |_| Rule::Sum { x: nx.unwrap(), numel });
        Ok(finish(Tensor { shape: vec![1], data: Arc::new(vec![value]), node: None }, node))
    }

    /// Mean of all elements.
    pub fn mean(&self) -> Result<Tensor> {
        if self.numel() == 0 {
            return Err(TensorError::InvalidArg { op: "mean", detail: "empty tensor".into() });
        }
        let value: f64 = self.data().iter().sum::<f64>() / self.numel() as f64;
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: "mean" });
        }
        let (tracked, nx) = track1(self);
        let numel = self.numel();
        let node = record(tracked, 1, |_| Rule::Mean { x: nx.unwrap(), numel });
        Ok(finish(Tensor { shape: vec![1], data: Arc::new(vec![value]), node: None }, node))
    }
}

/// Concatenate 2D tensors with equal row counts along the column axis.
pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(TensorError::InvalidArg { op: "concat_cols", detail: "no inputs".into() });
    }
    let rows = match parts[0].shape() {
        [r, _] => *r,
        s => {
            return Err(TensorError::ShapeMismatch {
                op: "concat_cols",
                detail: format!("expected 2D, got {:?}", s),
            })
        }
    };
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        match p.shape() {
            [r, c] if *r == rows => widths.push(*c),
            s => {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    detail: format!("row mismatch: {:?} vs {} rows", s, rows),
                })
            }
        }
    }
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(rows * total);
    for r in 0..rows {
        for (p, w) in parts.iter().zip(&widths) {
            data.extend_from_slice(&p.data()[r * w..(r + 1) * w]);
        }
    }
    let generation = current_generation();
    let ids: Vec<Option<u32>> = match generation {
        Some(g) => parts.iter().map(|p| p.node_in(g)).collect(),
        None => vec![None; parts.len()],
    };
    let tracked = ids.iter().any(Option::is_some);
    let node = record(tracked, data.len(), |_| Rule::ConcatCols { xs: ids, widths, rows });
    Ok(finish(Tensor { shape: vec![rows, total], data: Arc::new(data), node: None }, node))
}

/// Stack 2D tensors with equal column counts along the row axis.
pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(TensorError::InvalidArg { op: "concat_rows", detail: "no inputs".into() });
    }
    let cols = match parts[0].shape() {
        [_, c] => *c,
        s => {
            return Err(TensorError::ShapeMismatch {
                op: "concat_rows",
                detail: format!("expected 2D, got {:?}", s),
            })
        }
    };
    let mut rows_total = 0;
    let mut sizes = Vec::with_capacity(parts.len());
    for p in parts {
        match p.shape() {
            [r, c] if *c == cols => {
                rows_total += r;
                sizes.push(r * c);
            }
            s => {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    detail: format!("col mismatch: {:?} vs {} cols", s, cols),
                })
            }
        }
    }
    let mut data = Vec::with_capacity(rows_total * cols);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    let generation = current_generation();
    let ids: Vec<Option<u32>> = match generation {
        Some(g) => parts.iter().map(|p| p.node_in(g)).collect(),
        None => vec![None; parts.len()],
    };
    let tracked = ids.iter().any(Option::is_some);
    let node = record(tracked, data.len(), |_| Rule::ConcatRows { xs: ids, sizes });
    Ok(finish(Tensor { shape: vec![rows_total, cols], data: Arc::new(data), node: None }, node))
}
