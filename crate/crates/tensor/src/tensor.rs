use std::sync::Arc;

use crate::{Result, TensorError};

/// Dense n-dimensional array of f64, row-major, immutable after creation.
///
/// A tensor may carry a tape handle (`node`) identifying it on the currently
/// open gradient tape; tensors created outside a tape scope, or from plain
/// data, are constants.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub(crate) shape: Vec<usize>,
    pub(crate) data: Arc<Vec<f64>>,
    /// (tape generation, node id). Only meaningful while the tape that
    /// assigned it is still open; ops ignore handles from other generations.
    pub(crate) node: Option<(u64, u32)>,
}

impl Tensor {
    /// Build a tensor from raw data. Fails if the element count does not
    /// match the shape or any value is non-finite.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "from_vec",
                detail: format!("shape {:?} holds {} elements, data has {}", shape, numel, data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite { op: "from_vec" });
        }
        Ok(Tensor { shape, data: Arc::new(data), node: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let numel = shape.iter().product();
        Tensor { shape, data: Arc::new(vec![0.0; numel]), node: None }
    }

    pub fn ones(shape: Vec<usize>) -> Tensor {
        Tensor::filled(shape, 1.0)
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Tensor {
        let numel = shape.iter().product();
        Tensor { shape, data: Arc::new(vec![value; numel]), node: None }
    }

    /// 0-dimensional-like scalar, stored as shape `[1]`.
    pub fn scalar(value: f64) -> Result<Tensor> {
        Tensor::from_vec(vec![1], vec![value])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(TensorError::NotScalar(self.shape.clone()));
        }
        Ok(self.data[0])
    }

    /// Number of rows when the tensor is viewed as a matrix whose last
    /// dimension is the column axis.
    pub(crate) fn rows_for_lastdim(&self) -> usize {
        let cols = *self.shape.last().unwrap_or(&1);
        if cols == 0 { 0 } else { self.numel() / cols }
    }

    pub(crate) fn last_dim(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    /// True if this tensor is tracked on the tape of the given generation.
    pub(crate) fn node_in(&self, generation: u64) -> Option<u32> {
        match self.node {
            Some((g, id)) if g == generation => Some(id),
            _ => None,
        }
    }

    /// Same data and shape, detached from any tape.
    pub fn detached(&self) -> Tensor {
        Tensor { shape: self.shape.clone(), data: Arc::clone(&self.data), node: None }
    }

    pub(crate) fn with_node(&self, node: Option<(u64, u32)>) -> Tensor {
        Tensor { shape: self.shape.clone(), data: Arc::clone(&self.data), node }
    }
}

// Tensors must be freely shareable by evaluation workers.
const _: () = {
    fn assert_send_sync<T: Send + Sync>() {}
    fn check() {
        assert_send_sync::<Tensor>();
    }
    let _ = check;
};
