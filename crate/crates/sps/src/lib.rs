//! # sps
//!
//! Adaptive **sequential posterior simulation** for Bayesian multinomial
//! logistic regression: `J` independent groups of `N` particles absorb the
//! observations in data-driven batches (cycles), alternating importance
//! reweighting (correction), within-group resampling (selection), and
//! Metropolis random-walk rejuvenation (mutation). Because the groups never
//! exchange particles, the dispersion of the per-group means yields an
//! honest **numerical standard error** for every posterior moment — and the
//! cycle weights yield the **log marginal likelihood** with its own NSE as
//! a by-product.
//!
//! The sampler needs nothing beyond likelihood evaluations: no gradients,
//! no data augmentation, no proposal tailoring. Step sizes chase a 25%
//! acceptance rate and mutation stops when the relative numerical
//! efficiency (RNE) of every monitored functional is restored, so runs are
//! hands-off from prior to posterior.
//!
//! ## Quick start
//!
//! ```rust
//! use nalgebra::DMatrix;
//! use sps::engine::{run_adaptive, RunConfig};
//! use sps::model::{GaussianPrior, LogitData};
//!
//! // Ten binary observations with a single covariate.
//! let x = DMatrix::from_column_slice(10, 1, &[
//!     -1.2, -0.8, -0.5, -0.2, 0.1, 0.3, 0.6, 0.9, 1.1, 1.4,
//! ]);
//! let y = vec![2, 2, 2, 2, 1, 1, 1, 1, 1, 1];
//! let data = LogitData::new(y, x, 2).unwrap();
//!
//! // Zellner g-prior: the log odds at a sample covariate has prior
//! // standard deviation sqrt(2g).
//! let prior = GaussianPrior::g_prior(data.covariates(), 2, 0.25).unwrap();
//!
//! let cfg = RunConfig::new(4, 50, 7); // J = 4 groups of N = 50 particles
//! let (particles, schedule, report) = run_adaptive(&data, &prior, &cfg).unwrap();
//!
//! assert_eq!(particles.obs_absorbed(), 10);
//! assert!(report.log_ml.value.is_finite());
//! println!(
//!     "E[θ'x̄] = {:.3} ± {:.3} over {} cycles",
//!     report.functions[0].mean,
//!     report.functions[0].nse,
//!     schedule.cycles.len(),
//! );
//! ```
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! examples/
//! ├── posterior_moments.rs    # adaptive run, moment table with NSE/RNE
//! ├── two_pass_validation.rs  # freeze the schedule, replay, compare passes
//! ├── marginal_likelihood.rs  # log-ML accumulation vs quadrature truth
//! ├── gprior_calibration.rs   # the sqrt(2g) log-odds interpretation
//! ├── schedule_replay.rs      # schedule JSON round-trip across processes
//! └── csv_datasets.rs         # CSV ingestion, registry, design supplement
//! ```
//!
//! ```bash
//! cargo run --release --example posterior_moments
//! ```
//!
//! A thin `sps` binary wraps the same machinery for shell use
//! (`sps run`, `sps verify`, `sps render`); see the README.
//!
//! ## Modules
//!
//! * [`model`] — multinomial logit likelihood in the log domain, log-odds
//!   functionals, and the Gaussian / Zellner-g prior.
//! * [`engine`] — the particle system, the correction / selection /
//!   mutation phases, adaptive runs, schedule replay, and the two-pass
//!   algorithm.
//! * [`diagnostics`] — grouped-particle means, NSE, RNE, and
//!   marginal-likelihood accumulation.
//! * [`data`] — CSV ingestion, the benchmark dataset registry, and the
//!   empty-cell design supplement.
//! * [`oracle`] — deterministic quadrature posteriors (d ≤ 2) and a
//!   plain-loop replay of the sampler used to pin the engine bitwise.
//! * [`report`] — the versioned, deterministic JSON report schema.
//! * [`cli`] — the command-line front end.
//!
//! ## Determinism
//!
//! Every random draw comes from a counter-keyed stream addressed by
//! (seed, cycle, phase, step, group, particle), and every floating-point
//! reduction runs in a fixed sequential order. Reports are bitwise
//! identical for a given (seed, config, data) regardless of how many
//! worker threads execute the particle loops.

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod model;
pub mod oracle;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
