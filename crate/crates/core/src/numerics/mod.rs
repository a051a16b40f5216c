//! Dense linear algebra kernels: matrix type, least squares, pseudo-inverse,
//! symmetric eigenvalues and the small factorizations used by the solvers.

mod linalg;
mod mat;

pub use linalg::{
    invert, least_squares, pseudo_inverse, rank, smallest_eigenvalue, symmetric_eigenvalues, Cholesky, Ldlt,
    LeastSquares,
};
pub use mat::{axpy, dist_sq, dot, norm, norm_inf, sub, Mat};
