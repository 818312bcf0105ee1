//! Equivalency testing of paired repeated measures through the root mean
//! square `ρ = √(μ² + σ_b² + σ_w²)` of the one-way random-effects model
//! `Y_ij = μ + u_i + ε_ij`.
//!
//! The crate provides
//!
//! * the generalized pivotal test of `H0: ρ ≥ ρ0` and the generalized CI for
//!   `ρ` ([`gt`]), computed from the sufficient statistics `(m_i, ȳ_i, sse)`;
//! * the large-sample score and Wald Z-tests ([`ztest`]);
//! * likelihood estimation of `(μ, σ_w², σ_b²)` ([`estimation`]);
//! * a deterministic, parallel simulation harness for type I error, power
//!   and CI coverage ([`sim`]);
//! * CSV readers and JSON run records ([`io`]) behind the `rmsgt` binary ([`cli`]).
//!
//! ```
//! use rmsgt::{datasets, gt, Hypothesis};
//!
//! let data = datasets::oximetry();
//! let hyp = Hypothesis::new(3.0, 0.1).unwrap();
//! let res = gt::gt_pvalue(&data, &hyp, &gt::GtConfig::new(2_000, 123)).unwrap();
//! assert!(res.p_value.value() < 0.05);
//! ```

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod datasets;
pub mod error;
pub mod estimation;
pub mod gt;
pub mod io;

mod optim;
pub mod rng;
pub mod sim;

pub mod special;
pub mod ztest;

pub use data::{rms, summarize, GroupedSample, Hypothesis, LmmParams, Method, SummaryStats, TestResult};
pub use error::{Error, Result};
pub use rng::RandomStream;
pub use special::Probability;
