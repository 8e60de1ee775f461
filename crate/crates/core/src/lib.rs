//! Resource estimation and dense verification for qubitized phase
//! estimation of plane-wave PAW Hamiltonians.

pub mod error;
pub mod instance;
pub mod linalg;
pub mod pwbasis;
pub mod toyscf;

pub use error::{Error, Result};
pub mod factorize;
pub mod lcucost;
pub mod besim;
pub mod qec;
pub mod downsample;
pub mod upaw;
pub mod pipeline;
