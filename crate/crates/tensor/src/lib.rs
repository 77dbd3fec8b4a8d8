//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! Tensors are immutable, row-major, and cheap to clone (`Arc`-backed), so
//! they can be shared across threads freely. Gradient recording happens on a
//! thread-local Wengert tape opened with [`tape::scope`]; inside a scope,
//! leaves registered via [`tape::watch`] participate in differentiation and
//! [`tape::backward`] replays the tape in reverse to produce a [`GradMap`].
//!
//! Every operation validates its output: non-finite values (NaN/Inf) are a
//! checked error, never silently propagated.

pub mod gradcheck;
mod ops;
mod tape;
mod tensor;

pub use ops::{concat_cols, concat_rows};
pub use tape::{backward, is_recording, scope, watch, GradMap};
pub use tensor::Tensor;

use thiserror::Error;

/// Errors raised by tensor construction and operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("invalid argument to {op}: {detail}")]
    InvalidArg { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("backward called outside a tape scope or on an untracked tensor")]
    NoTape,
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Additive mask value for attention logits. Large enough to zero a softmax
/// entry in f64 without producing an Inf that would trip the finite check.
pub const NEG_MASK: f64 = -1.0e9;
