//! Fairness and utility evaluation for embedding-based speaker verification.
//!
//! The crate covers the full evaluation loop for a verification system whose
//! decisions come from thresholding a similarity score between two
//! embeddings:
//!
//! * [`data`]: embedding, trial and score files, plus same-group trial
//!   generation.
//! * [`scoring`]: cosine scoring and the split of scores into
//!   (group, label) cells.
//! * [`metrics`]: threshold sweeps, EER, the fairness discrepancy rate
//!   (FaDR) and the area under the FaDR curve over a range of
//!   demographic-agnostic FAR operating points.
//! * [`stats`]: paired permutation tests and kernel density estimates of
//!   score distributions.
//! * [`nn`] and [`uai`]: a small dense-network stack and the split-encoder
//!   embedding transform trained with alternating primary/secondary updates
//!   (NLDR, UAI, AT, MTL, UAI-AT, UAI-MTL).
//! * [`synth`]: seeded synthetic embeddings with a controllable group skew.
//!
//! A narrative guide lives in the `book/` directory of the repository; its
//! code listings are compiled as doc-tests of this crate.
//!
//! ```
//! use fairsv::metrics::{fadr, FadrParams, GroupErrorRates};
//!
//! let rates = GroupErrorRates { far_g1: 0.10, far_g2: 0.04, frr_g1: 0.02, frr_g2: 0.05 };
//! let value = fadr(&rates, FadrParams::new(0.5).unwrap());
//! assert!((value - 0.955).abs() < 1e-12);
//! ```

pub mod data;
mod error;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod scoring;
pub mod stats;
pub mod synth;
pub mod uai;

#[cfg(doctest)]
mod book;

pub use error::{Error, Result};
