pub mod algext;
pub mod arith;
pub mod characters;
pub mod classgroup;
pub mod dimensions;
pub mod eigensystem;
pub mod error;
pub mod fixtures;
pub mod quadfield;
pub mod recovery;

pub use error::{Error, Result};
