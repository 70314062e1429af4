pub mod ddpg;
pub mod error;
pub mod eval;
pub mod federation;
pub mod neural;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
