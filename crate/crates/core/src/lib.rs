pub mod entropy;
pub mod error;
pub mod ising;
pub mod linalg;
pub mod mixing;
pub mod qms;
pub mod tolerances;
pub mod tree;

pub use error::{Error, Result};
