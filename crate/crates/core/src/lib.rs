pub mod dichotomy;
pub mod eigen;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod nonlinear;
pub mod oracles;
pub mod ses;
pub mod sphere;

pub use error::{Error, ErrorClass, Result};
