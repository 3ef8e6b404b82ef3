//! Passive mobile-sensing pipeline: canonical sensor streams, daily
//! group-tagged features, small neural models and a feature-group ablation
//! harness for daily stress classification and PHQ-9 regression.
//!
//! The crate is organised as the pipeline runs:
//!
//! - [`ingest`] parses per-stream CSV files into a validated [`ingest::Dataset`].
//! - [`featurize`] turns one user-day of events into a 123-wide feature vector.
//! - [`neuralnet`] holds the dense/LSTM networks, their gradients and training.
//! - [`tasks`] builds labelled examples, splits, baselines and metrics.
//! - [`runner`] drives the ablation grid and renders reports.
//! - [`synthgen`] writes synthetic datasets with a planted signal.
//!
//! ```
//! use phenolab::featurize::{period_of, DayPeriod};
//!
//! assert_eq!(period_of(10 * 3600 + 1800), DayPeriod::Day);
//! assert_eq!(period_of(0), DayPeriod::Night);
//! assert_eq!(period_of(18 * 3600), DayPeriod::Evening);
//! ```

pub mod config;
pub mod featurize;
pub mod ingest;
pub mod neuralnet;
pub mod runner;
pub mod synthgen;
pub mod tasks;
pub mod time;

mod error;

pub use error::Error;

/// Convenience alias for results carrying the crate-level [`Error`].
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/tasks.md")]
    mod tasks {}
    #[doc = include_str!("../../../book/src/ablation.md")]
    mod ablation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
