//! Command line, file formats, randomized law trials and the acceptance
//! suite built on `confinv-core`.

pub mod error;
pub mod exec;
pub mod family;
pub mod laws;
pub mod point;
pub mod random;
pub mod spec_file;
pub mod suite;
pub mod table;

pub use error::{CliResult, Failure};
