//! Transaction-graph mining for audit work.
//!
//! The crate is organised around five pipelines:
//!
//! - [`graph`]: ledger ingest, sliding windows, adjacency and per-node features.
//! - [`smurf`]: detection of sender → intermediaries → receiver structures by
//!   greedy reordering of the adjacency matrix under a description-length cost.
//! - [`focus`]: per-window anomaly scoring on 2-d feature plots, sketching and
//!   change-point detection with a short explanation of the change.
//! - [`discover`]: month × account-pair projections and log-logistic
//!   distribution fits.
//! - [`synth`] and [`eval`]: synthetic ledgers, injection and experiments.
//!
//! Every random draw descends from a single `u64` seed through [`rng::derive`].

pub mod anomaly;
pub mod discover;
pub mod eval;
pub mod focus;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod smurf;
pub mod synth;

pub use graph::{AdjMatrix, GraphSnapshot, NodeFeatureTable, Transaction, TransactionLog};
pub use smurf::{Detection, SmurfPattern};
