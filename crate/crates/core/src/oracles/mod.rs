//! Closed-form solutions used as test fixtures.

mod bessel;
mod exact;

pub use bessel::{bessel_zero, spherical_bessel, spherical_bessel_derivative};
pub use exact::{
    harmonic_trace, manufactured_problem, sphere_area_sqrt, Descriptor, ExactSolution, HarmonicSign,
    ManufacturedProblem,
};
