//! Dynamic-network embedding toolkit.
//!
//! The pipeline turns per-subject multivariate time-series into whole-graph
//! embeddings and evaluates them with a downstream classifier:
//!
//! 1. [`connectome`] — sliding-window correlation and percentile thresholding
//!    convert each time-series matrix into a dynamic graph (one snapshot per
//!    window position). A synthetic-corpus generator produces identically
//!    shaped data for testing.
//! 2. [`tempwalk`] — temporal random walks sampled under an exponential
//!    time-decay transition distribution; walk timestamps never decrease.
//! 3. [`encoder`] — a from-scratch Transformer encoder (forward and backward
//!    passes implemented in-repo) over tokenized walk sequences.
//! 4. [`trainer`] — masked-node prediction plus a graph-identity objective;
//!    the graph-classifier weight columns are the graph embeddings.
//! 5. [`evalkit`] — logistic classification of the embeddings under
//!    stratified k-fold and leave-one-site-out protocols.
//! 6. [`pipeline`] — configuration, stage orchestration, artifact manifest,
//!    and report rendering for the `dynembed` command-line tool.

pub mod connectome;
pub mod encoder;
pub mod evalkit;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod tempwalk;
pub mod trainer;
