pub mod adapt;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod math;
pub mod model;
pub mod optim1d;
pub mod schedule_adapt;
pub mod smc;

pub use error::{Error, Result};
