pub mod cli;
pub mod dd;
pub mod eigen2d;
pub mod eigen3d;
pub mod error;
pub mod memory_modes;
pub mod observability;
pub mod packet;
pub mod precision;
pub mod quadrature;
pub mod report;
pub mod simulate;
pub mod specfun;
pub mod spectrum;

pub use error::{Error, Result};
