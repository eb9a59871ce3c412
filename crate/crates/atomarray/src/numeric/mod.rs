//! Small numerical toolbox shared by the fitting pipelines: simplex and
//! damped-Gauss-Newton minimizers, dense linear solves, adaptive quadrature,
//! and summary statistics.

pub mod linalg;
pub mod lm;
pub mod neldermead;
pub mod quad;
pub mod stats;

pub use lm::{levenberg_marquardt, LmFit};
pub use neldermead::nelder_mead;
pub use quad::adaptive_simpson;
