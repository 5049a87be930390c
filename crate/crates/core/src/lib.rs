//! Autoencoder-constrained graph convolutional networks for node
//! classification on homogeneous and heterogeneous graphs.

pub mod data;
pub mod dense;
pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod optim;
pub mod sparse;
pub mod synthetic;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use sparse::SparseMatrix;
