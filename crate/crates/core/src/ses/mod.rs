//! The spatial evolutionary system for boundary traces, its rescaled form and
//! the limiting-operator / perturbation split.

mod operator;
mod potential;
mod residual;
mod state;

pub use operator::{block_exponential, Coupling, RsesSystem, SesOperator};
pub(crate) use operator::sobolev_weights;
pub use potential::{CustomPotential, PotentialKind, PotentialSpec};
pub use residual::*;
pub use state::{adjoint_transform, rescale_forward, rescale_inverse, wronskian, RescaledState, TraceState};
