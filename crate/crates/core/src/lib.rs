//! Gaussian clouded logit (GCL) adjustment for long-tailed classification.
//!
//! The crate covers the whole two-stage pipeline at desk scale:
//!
//! - [`numerics`]: dense tensors, seeded random streams, SGD with momentum
//!   and a central finite-difference gradient oracle.
//! - [`model`]: an MLP feature extractor with hand-written backward passes,
//!   a cosine-normalized classifier and a plain linear head for baselines.
//! - [`gcl`]: per-class cloud sizes, clouded cosine logits, the GCL loss and
//!   the plain cross-entropy baseline, plus mixup.
//! - [`sampler`]: instance-balanced, class-balanced, effective-number and
//!   class-based effective-number (CBEN) batch sampling.
//! - [`data`]: long-tailed count profiles, synthetic Gaussian blobs and CSV
//!   ingestion.
//! - [`trainer`]: representation training, classifier re-training (cRT) with
//!   a frozen backbone, evaluation and paired experiments.
//! - [`cli`]: the `gcl` command-line front end.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod cli;
pub mod data;
pub mod error;
pub mod gcl;
pub mod model;
pub mod numerics;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
