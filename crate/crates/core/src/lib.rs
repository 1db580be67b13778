pub mod density;
pub mod error;
pub mod gamma;
pub mod numeric;
pub mod rng;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
