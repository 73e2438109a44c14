//! Hybrid fake-account detection: per-account feature classification
//! seeds random-walk score propagation over the social graph.
//!
//! The pipeline has two stages. A linear SVM trained on account activity
//! features produces a Sybil probability per account. Those probabilities
//! become the starting scores of an iterative random-walk computation on
//! a label-augmented social graph, which converges to each node's
//! probability of reaching the sybil label node before the benign one.
//! Structure and features cover for each other: a well-camouflaged
//! profile is exposed by its graph position and vice versa.

pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod io;
pub mod propagation;
pub mod svm;
pub mod synthgen;

pub use error::{Error, Result};
