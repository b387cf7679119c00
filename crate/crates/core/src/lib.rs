//! Optical-flow-guided refinement of articulated body-mesh regressors.

pub mod body;
pub mod error;

pub use error::{Error, Result};
pub mod gradcheck;
pub mod render;
pub mod supervision;
pub mod nn;
pub mod data;
pub mod parallel;
pub mod train;
pub mod eval;
