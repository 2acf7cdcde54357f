//! Dense numerical kernel: small matrices, linear solves, pseudo-inverses,
//! eigen-decompositions, multistart minimization and Newton's method.

pub mod eigen;
pub mod linalg;
pub mod matrix;
pub mod optimize;

pub use eigen::{eigen_real, normalize_sign, symmetric_eigen, EigenPair};
pub use linalg::{
    pseudo_inverse_apply, pseudo_inverse_transpose_apply, pseudo_inverse_transpose_truncated,
    solve_linear, Lu,
};
pub use matrix::{dot, norm2, norm_inf, Matrix};
pub use optimize::{minimize_multistart, newton_solve, LocalMinimum};
