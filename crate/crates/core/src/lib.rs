//! Linear mixed-effects models fit by optimizing the profiled log-likelihood.
//!
//! The objective is evaluated from a blocked lower Cholesky factor of the
//! augmented Gram matrix of `[Z X y]`, scaled by the relative covariance
//! factor `Λθ`. The Gram matrix is assembled once; each evaluation only
//! installs a new `θ`, refactors in place and reads the diagonal of the
//! factor. Conditional estimates are solved for once, at convergence.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command
//! line and timing live in the `blmm` crate.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod block;
pub mod data;
pub mod error;
pub mod factor;
pub mod fit;
pub mod formula;
pub mod gram;
pub mod lambda;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod reference;

pub use data::{build_matrices, Column, DataTable, ModelDims, ReMat, XyMat};
pub use error::{Error, Result};
pub use fit::{fit, FitOptions, FitResult, Optimizer, VarCorr};
pub use formula::{amalgamate, parse_formula, Formula, Regressor, TermSpec};
pub use model::{Criterion, LinearMixedModel};
