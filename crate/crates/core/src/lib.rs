//! Composite-likelihood borrowing of reference-population information.
//!
//! A target cohort's analysis borrows from one or more reference cohorts by
//! raising each reference likelihood to a borrowing weight in `[0, 1]`. The
//! crate provides:
//!
//! - bounded weight functions mapping outcome dissimilarity to a borrowing
//!   weight ([`weights`]),
//! - closed-form weighted estimation and sandwich (Godambe) inference for
//!   one-dimensional exponential families, with the Bernoulli case
//!   first-class ([`expfam`]),
//! - weighted logistic regression with robust covariance and standardized
//!   marginal response rates ([`glm`]),
//! - a normalized power prior posterior for a binomial target/reference
//!   pair, evaluated by deterministic quadrature ([`npp`]),
//! - deterministic dataset construction, sweep experiments, effective sample
//!   size, and tipping-point scans ([`study`]).
//!
//! Everything in this crate is pure computation: no I/O, no randomness, no
//! shared mutable state. All floating-point math goes through `libm`, so the
//! crate builds without `std` (allocation is required).
//!
//! ```
//! use clborrow_core::expfam::{composite_mle, wald_ci, Bernoulli, WeightedCohorts};
//! use clborrow_core::weights::{OutcomeSample, SymmetricWeight};
//!
//! // 60/300 target and 208/800 reference with a bounded weight in [0, 0.8].
//! let target = OutcomeSample::from_counts(60, 300)?;
//! let reference = OutcomeSample::from_counts(208, 800)?;
//! let spec = SymmetricWeight::new(0.0, 0.8, 0.05, 0.1)?;
//! let tau = clborrow_core::weights::mean_difference(&target, &reference);
//! let weight = spec.eval(tau)?;
//! assert!((weight - 0.73728).abs() < 1e-9);
//!
//! let cohorts = WeightedCohorts::target_with_references(target, vec![(reference, weight)])?;
//! let fit = composite_mle(&cohorts, &Bernoulli)?;
//! let (lo, hi) = wald_ci(&fit, 0.95)?;
//! assert!(lo < fit.mu_hat && fit.mu_hat < hi);
//! # Ok::<(), clborrow_core::Error>(())
//! ```

#![no_std]
#![forbid(unsafe_code)]
// Index loops mirror the matrix notation throughout the numerical code.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod expfam;
pub mod glm;
pub mod linalg;
pub mod npp;
pub mod special;
pub mod study;
pub mod weights;

pub use error::{Error, Result};
