//! Linear and Hermitian quantum maps, positivity domains, and linear
//! quantum error correction.

pub mod dynamics;
pub mod cli;
pub mod error;
pub mod io;
pub mod lqec;
pub mod maps;
pub mod numerics;
pub mod positivity;
pub mod random;

pub use error::{Error, Result};
