//! Multi-target lookup-table regression with an MLP and a softmax head.
//!
//! Targets that span several orders of magnitude (species mass fractions of a
//! combustion table, for instance) are badly served by a plain multivariate
//! MSE: the large targets dominate both the loss and its gradient. This crate
//! trains the same network with either the standard MSE or an MSE whose
//! per-target terms are weighted by `1 / Var(Y_j)`, and records per-target
//! validation losses and gradient spreads so the two can be compared.
//!
//! Modules, bottom up:
//!
//! * [`linalg`]: dense row-major `f64` matrices
//! * [`network`]: tanh MLP with softmax head, full and per-target backprop
//! * [`loss`]: per-target MSE, variance weights, weight files
//! * [`optimizer`]: minibatch training (Adam or plain SGD) and validation
//!   diagnostics
//! * [`data`]: table CSV I/O, MinMax scaling, splits, surrogate generator
//! * [`metrics`]: per-target R² and multi-run summaries
//! * [`rng`]: seeded xoshiro256++ streams and sub-seed derivation
//! * [`experiment`]: end-to-end `generate` / `train` / `eval` / `compare` /
//!   `weights` commands with manifests

pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod optimizer;
pub mod rng;

pub use data::{Dataset, PreparedData, Scaler, SplitDataset, SurrogateProfile};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use loss::{LossMode, LossSpec};
pub use network::{GradientSet, Network};
pub use optimizer::{TrainConfig, TrainingHistory};
