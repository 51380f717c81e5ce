pub mod analysis;
pub mod error;
pub mod optics;
pub mod pipeline;
pub mod sim;
pub mod quantum;
pub mod tomography;

pub use error::{Error, Result};
