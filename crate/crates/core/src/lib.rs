pub mod analysis;
pub mod error;
pub mod io;
pub mod mcmc;
pub mod model;
pub mod quadrature;
pub mod random;
pub mod scoring;
pub mod special;

pub use error::{Error, Result};
