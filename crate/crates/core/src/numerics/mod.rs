//! Dense and sparse linear algebra, stable reductions and a gradient check.
//!
//! Everything is `f64` and single-threaded, so results are bit-reproducible.

mod dense;
mod gradcheck;
mod reduce;
mod sparse;

pub use dense::DenseMatrix;
pub use gradcheck::finite_diff_check;
pub use reduce::{argmax, logsumexp, logsumexp_rows, softmax_into, softmax_rows};
pub use sparse::SparseMatrix;

/// Sparse-dense product; see [`SparseMatrix::spmm`].
pub fn spmm(s: &SparseMatrix, d: &DenseMatrix) -> crate::Result<DenseMatrix> {
    s.spmm(d)
}
