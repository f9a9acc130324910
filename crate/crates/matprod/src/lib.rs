//! Infinite products of nonnegative matrices: normalized-image
//! trajectories, sofic measure representations, weak-Gibbs diagnostics,
//! factorization bounds, and the counterexample constructions that go with
//! them. Everything runs in f64 or exact big-rational arithmetic through
//! the [`scalar::Scalar`] abstraction.

pub mod error;
pub mod scalar;
pub mod mat;
pub mod svd;
pub mod eigen;
pub mod rng;
pub mod family;
pub mod trajectory;
pub mod bernoulli;
pub mod counterexamples;
pub mod factorize;
pub mod gibbs;
pub mod triangular;
pub mod curves;

pub use error::{Error, Result};
pub use family::{MatrixFamily, SymbolSequence};
pub use mat::{Mat, ScaledMat, SupportPattern};
pub use scalar::{Rat, Scalar};
