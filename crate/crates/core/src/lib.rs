//! Neural prediction intervals with a jointly learned value prediction.
//!
//! A feed-forward network emits an upper bound `U`, a lower bound `L` and a
//! mixing weight `v`; the point estimate is `v*U + (1-v)*L`. The crate holds
//! the network and its reverse-mode gradients, the interval loss family and
//! baselines, ensemble aggregation, evaluation metrics, data pipelines and a
//! benchmark harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::inconsistent_digit_grouping)]

pub mod bench;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod nn;

pub use error::{Error, Result};
