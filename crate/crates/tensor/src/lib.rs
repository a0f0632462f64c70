//! Tensor-train (TT) tensors and operators.
//!
//! A `d`-dimensional array is stored as a chain of order-3 cores
//! `G_k ∈ R^{r_{k-1} × n_k × r_k}` with `r_0 = r_d = 1`; operators use
//! order-4 cores `(r_{k-1}, n_k, m_k, r_k)`. The crate provides exact
//! arithmetic, TT-rounding, maxvol-pivoted cross interpolation of sampled
//! functions, an AMEn solver for SPD systems and a binary container format.

pub mod amen;
pub mod core3;
pub mod cross;
pub mod error;
pub mod io;
mod linalg;
pub mod matrix;
pub mod maxvol;
pub mod tensor;

pub use amen::{amen_solve, relative_residual, AmenOptions, AmenResult};
pub use core3::Core3;
pub use cross::{tt_cross, CrossOptions, CrossOracle, CrossResult, FnOracle};
pub use error::{Result, TtError};
pub use matrix::TtMatrix;
pub use maxvol::maxvol;
pub use tensor::TtTensor;

/// Dense entry count divided by stored TT parameters.
pub fn compression_ratio_tensor(t: &TtTensor) -> f64 {
    t.full_size() / t.num_params() as f64
}

/// Dense entry count (`N x M`) divided by stored TT parameters.
pub fn compression_ratio_matrix(a: &TtMatrix) -> f64 {
    a.full_size() / a.num_params() as f64
}
