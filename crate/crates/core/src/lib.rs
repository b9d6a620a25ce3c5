//! Compression and multiplication of sparse constant matrices through
//! two-term common subexpressions.
//!
//! The pipeline is: [`matrix::generate_dense`] (or any [`DenseMatrix`]) →
//! [`cse::extract`] → [`codec::encode`] → [`kernels::mm_compressed`].
//! The compressed form is six flat arrays extending CSR; see
//! [`codec::CompressedMatrix`].

pub mod bench;
pub mod codec;
pub mod cse;
pub mod error;
pub mod kernels;
pub mod matrix;

pub use codec::{CompressedMatrix, StorageReport};
pub use cse::{CseSet, CseTerm, ExtractConfig, Pairing};
pub use error::{Error, Result};
pub use kernels::OpStats;
pub use matrix::{CsrMatrix, DenseMatrix, GenSpec, LevelMode};
