//! Personal-baseline evaluation of daily self-report prediction from
//! passive sensing.
//!
//! A model's value for one person is measured as *user lift*: the error of
//! always guessing that person's usual label (their mode for binary targets,
//! their mean for levels) minus the model's cross-validated error on the
//! same days. Lifts are averaged over users and tested against zero with a
//! sign-flip permutation test.
//!
//! The [`pipeline`] module chains the stages used by the `userlift` binary.
//! The guide in `book/` walks through each stage with examples that are
//! compiled as doc-tests of this crate.
//!
//! ```
//! use userlift::stats::permutation_test_mean_gt_zero;
//!
//! let lifts = [1.5, 0.5, 2.0, -0.5, 1.0, 0.5];
//! let r = permutation_test_mean_gt_zero(&lifts, 1000, 0).unwrap();
//! assert!(r.observed_mean > 0.0);
//! assert!(r.p_value < 0.1);
//! ```

pub mod audit;
pub mod diagnostics;
pub mod eval;
pub mod geofeat;
pub mod ingest;
pub mod learn;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod table;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/permutation.md")]
    mod permutation {}
    #[doc = include_str!("../../../book/src/cross_validation.md")]
    mod cross_validation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/location_features.md")]
    mod location_features {}
    #[doc = include_str!("../../../book/src/audit.md")]
    mod audit {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
