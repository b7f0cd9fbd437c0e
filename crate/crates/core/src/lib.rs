pub mod analysis;
pub mod cli;
pub mod error;
pub mod green;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod sampler;

pub use error::{Error, Result};
