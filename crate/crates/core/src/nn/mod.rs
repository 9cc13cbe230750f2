//! Fully connected neural fields with exact value, gradient and Laplacian propagation.

mod activation;
mod batch;
pub mod certificate;
pub mod checkpoint;
mod mlp;

pub use activation::Activation;
pub use batch::{BatchEval, Cotangents, EvalMode, Tape};
pub use certificate::{bound_certificate, BoundCertificate};
pub use mlp::{param_count, validate_widths, Cotangent, FieldEval, Layer, Mlp};
