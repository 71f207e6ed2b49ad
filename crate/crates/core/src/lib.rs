pub mod choice;
pub mod error;
pub mod experiment;
pub mod game;
pub mod instance_gen;
pub mod mechanisms;
pub mod poa_closed;
pub mod poa_lp;

pub use error::{Error, Result};
