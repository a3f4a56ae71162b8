pub mod airtime;
pub mod capacity;
pub mod channel;
pub mod config;
pub mod error;
pub mod linalg;
pub mod precoding;
pub mod scenarios;
pub mod seed;

pub use error::{Error, Result};
