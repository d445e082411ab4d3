//! Sparse canonical correlation analysis between a primal feature view and
//! a kernelized dual view, with deflation, a LASSO reduction, a regularized
//! KCCA baseline and mate-retrieval evaluation.

pub mod config;
pub mod corpus;
pub mod deflation;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod kcca;
pub mod lasso;
pub mod linalg;
pub mod matrix_io;
pub mod model;
pub mod scca;
pub mod synthetic;

pub use error::{Error, Result};
