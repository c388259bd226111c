//! Value function and policy gradient iteration with spectral step sizes for
//! dynamic models and games with continuous actions.
//!
//! The guide in `book/` walks through the crate; its listings run as
//! doc-tests below.

pub mod algorithms;
pub mod approx;
pub mod bench;
pub mod error;
pub mod fixed_point;
pub mod model_api;
pub mod models;
pub mod scalar;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fixed_point.md")]
    mod fixed_point {}
    #[doc = include_str!("../../../book/src/approximation.md")]
    mod approximation {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    mod algorithms {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
