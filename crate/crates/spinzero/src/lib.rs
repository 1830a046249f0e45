//! Spin-geometric objects on model charts: Clifford algebra, Dirac and
//! twistor operators, zero modes of `D phi = i lambda A . phi`, the weighted
//! conformal eigenvalue family, Killing spinors and Sasakian structures.
//!
//! Conventions used throughout:
//! - Clifford rule `X.Y + Y.X = -2 g(X, Y)`, gamma matrices anti-Hermitian.
//! - `<a, b> = sum a_k conj(b_k)`, linear in the first slot.
//! - Metrics are conformally flat, `g = e^{2f} dx^2`. Vector and spinor data
//!   are expressed in the orthonormal frame `e_a = e^{-f} d/dx_a`; differential
//!   forms handed to the exterior calculus use coordinate components.

pub mod chart;
pub mod clifford;
pub mod error;
pub mod field;
pub mod forms;
pub mod io;
pub mod refine;
pub mod report;
pub mod sasaki;
pub mod spectral;
pub mod spincalc;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
