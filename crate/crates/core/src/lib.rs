pub mod analysis;
pub mod cli;
pub mod data;
pub mod diagnosis;
pub mod error;
pub mod math;
pub mod mc;
pub mod network;
pub mod train;

pub use error::{Error, Result};
