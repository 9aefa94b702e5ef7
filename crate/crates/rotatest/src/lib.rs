//! Distribution-free goodness-of-fit testing of grouped Bernoulli trials
//! with covariates.
//!
//! Bernoulli outcomes whose failure probability depends on a covariate
//! through a parametric family are grouped into subgroups of size `m`, the
//! family is fitted by maximum likelihood, and the centred empirical
//! process of the fit is rotated to a reference measure that depends on
//! neither the covariates nor the estimated parameter. Kolmogorov-Smirnov
//! statistics of the rotated process can then be compared across models,
//! covariate designs and parameter values on a common scale.
//!
//! The crate provides:
//!
//! - four built-in failure-probability families and an open registry
//!   ([`model`]),
//! - grouped sampling and the lexicographic outcome encoding ([`sample`]),
//! - scalar maximum-likelihood fitting ([`mle`]),
//! - the per-subgroup rotation construction and its diagnostics
//!   ([`rotation`]),
//! - the rotated process and its KS statistic ([`process`]),
//! - a replicated Monte Carlo harness producing EDF samples
//!   ([`montecarlo`]),
//! - two-sample randomization p-values ([`permtest`]),
//! - an exact-identity verification suite ([`verify`]).
//!
//! ```
//! use rotatest::model::ModelSpec;
//! use rotatest::mle::fit_mle;
//! use rotatest::process::ks_statistic;
//! use rotatest::rng::RngFactory;
//! use rotatest::sample::generate_sample;
//!
//! let model = ModelSpec::logistic();
//! let mut rng = RngFactory::new(7).replication(0, 1, 0, 0);
//! let sample = generate_sample(&model, model.theta0(), 96, 1, &mut rng)?;
//! let fit = fit_mle(&model, &sample)?;
//! let ks = ks_statistic(&sample, &model, fit.theta_hat, 100)?;
//! assert!(ks.ks > 0.0);
//! # Ok::<(), rotatest::Error>(())
//! ```

pub mod error;
pub mod mle;
pub mod model;
pub mod montecarlo;
pub mod permtest;
pub mod process;
pub mod rng;
pub mod rotation;
pub mod sample;
pub mod verify;

pub use error::{Error, Result};
pub use model::ModelSpec;
pub use rng::RngFactory;

// The guide's code blocks run as doctests so the book cannot drift from
// the API: `cargo test --doc` compiles and executes every snippet.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }
    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Models, "../../../book/src/models.md");
    chapter!(Grouping, "../../../book/src/grouping.md");
    chapter!(Rotation, "../../../book/src/rotation.md");
    chapter!(Testing, "../../../book/src/testing.md");
    chapter!(Experiments, "../../../book/src/experiments.md");
    chapter!(Cli, "../../../book/src/cli.md");
}
