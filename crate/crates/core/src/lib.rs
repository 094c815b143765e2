//! Evidence-based Bayesian multiple testing with relative belief ratios.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: normal, Student t, gamma and Laplace primitives.
//! * [`rb`]: discretization grids, relative belief ratios, strengths,
//!   estimates and credible regions for a single discretized parameter.
//! * [`mtest`]: classification with cutoffs, ξ-guided selection and the
//!   Monte Carlo error-rate estimators shared by every model.
//! * [`normal_means`], [`laplace`], [`regression`], [`nonfullrank`]: model
//!   backends.
//! * [`mc`]: seeded, worker-count independent Monte Carlo plumbing.
//! * [`data`]: CSV ingestion and the bundled diabetes data.

pub mod data;
pub mod error;
pub mod laplace;
pub mod mc;
pub mod mtest;
pub mod nonfullrank;
pub mod normal_means;
pub mod rb;
pub mod regression;
pub mod specfun;

pub use error::{Error, Result};
pub use mc::McEstimate;
pub use mtest::{Classification, ConfusionMatrix, CutoffPair};
pub use rb::{DiscreteBelief, EvidenceRecord, Grid};
pub use specfun::GammaParams;
