//! Laplace–Beltrami eigenbasis on `S^{n-1}` for `n ∈ {2, 3}`: mode
//! bookkeeping, spectral Sobolev norms, quadrature and Galerkin products.

mod field;
mod modes;
mod quadrature;

pub use field::{
    complex_to_real, project_pointwise_product, quadrature_inner_product, real_to_complex, sobolev_norm,
    ProductProjector, SphereField,
};
pub(crate) use modes::{check_dimension, eigenvalue};
pub use modes::{degree_multiplicity, enumerate_modes, lb_eigenvalue, mode_count, ModeIndex};
pub use quadrature::{evaluate_basis, gauss_legendre, SphereQuadrature};
