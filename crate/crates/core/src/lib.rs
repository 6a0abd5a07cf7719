pub mod error;
pub mod alloc;
pub mod cli;
pub mod embedding;
pub mod gauge;
pub mod ledger;
pub mod measure;
pub mod rational;
pub mod rng;
pub mod transport;
pub mod verify;
pub mod walk;

pub use error::{Error, Result};
