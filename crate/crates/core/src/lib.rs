//! Knowledge distillation through conditional-generator samples.
//!
//! A teacher network's knowledge is moved into a student by way of generated
//! samples that pass through three stages:
//!
//! 1. [`subsample`]: density-ratio rejection sampling drops fake samples that
//!    do not look like real data for their assigned label.
//! 2. [`labeladjust`]: the teacher scores every remaining sample, a quantile
//!    filter drops the worst ones and (for regression) the teacher's
//!    prediction replaces the assigned label.
//! 3. [`distill`]: the processed samples augment the real training set and
//!    the student is trained on the union.
//!
//! [`theory`] computes every term of the student's excess-risk bound exactly
//! on finite discrete problems so the bound can be checked numerically.
//!
//! All randomness flows from explicit seeds through [`rng`]; identical inputs
//! give bit-identical outputs.

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cgen;
pub mod config;
pub mod data;
pub mod distill;
pub mod error;
pub mod labeladjust;
pub mod nn;
pub mod rng;
pub mod subsample;
pub mod textfmt;
pub mod theory;

pub use cgen::{GeneratorHandle, LabelNoise};
pub use data::{Dataset, Label, Provenance, Sample, SynthConfig, Task};
pub use distill::{PipelineConfig, PipelineReport};
pub use error::{Error, Result};
pub use labeladjust::FilterReport;
pub use nn::{Metrics, NetParams, NetSpec, OutputKind, TrainConfig};
pub use theory::BoundReport;
