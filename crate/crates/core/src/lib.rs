//! Quantum graph neural network for classifying track segments in
//! cylindrical-detector hit graphs.
//!
//! The pipeline runs from raw hits to trained segment classifiers:
//!
//! * [`hitdata`] reads and writes hit/particle CSV files and generates
//!   synthetic helical-track events.
//! * [`graph`] applies truth-level selection, splits events into 16 φ×z
//!   sectors and builds labelled candidate-segment graphs.
//! * [`statevector`] and [`ttn`] simulate Tree Tensor Network classifier
//!   circuits; [`autodiff`] differentiates them with the parameter-shift rule.
//! * [`model`] wires the circuits into edge and node networks and computes
//!   exact end-to-end gradients.
//! * [`train`] holds the loss, ADAM, ROC AUC and the training loop.
//!
//! Circuit evaluations across edges and nodes are data-parallel via rayon
//! when the `parallel` feature is enabled (default).

// `!(a < b)` is used deliberately so NaN fails range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod config;
pub mod error;
pub mod graph;
pub mod hitdata;
pub mod model;
pub mod par;
pub mod plot;
pub mod statevector;
pub mod train;
pub mod ttn;

pub use error::{QgnnError, Result};
