pub mod bench;
pub mod datasets;
pub mod error;
pub mod gfevd;
pub mod gnar;
pub mod graph;
pub mod hierarchy;
pub mod io;
pub mod linalg;
pub mod periodogram;
pub mod spectra;
pub mod var;

pub use error::{Error, Result};
