pub mod error;
pub mod formulations;
pub mod framework;
pub mod generate;
pub mod rng;
pub mod solver;
pub mod supply;
pub mod uncertainty;

pub use error::{Error, Result};
