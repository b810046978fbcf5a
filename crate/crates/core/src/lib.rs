pub mod error;
pub mod grid;
pub mod potentials;
pub mod fock;
pub mod system;
pub mod scf;
pub mod tdprop;
pub mod spectra;
pub mod oracle;
pub mod qedft;
pub mod config;
pub mod checkpoint;
pub mod run;

pub use error::{Error, Result};
