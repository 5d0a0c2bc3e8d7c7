//! Half-line exponential dichotomies of the rescaled system: the spectral
//! split of the limiting operator, explicit formulas for `V = 0`, and
//! numerically transported range/kernel frames for general potentials.

mod alpha;
mod spectral;
mod table;

pub use alpha::{alpha_window, check_alpha, in_sigma, rates_admit, validate_alpha, AlphaWindow, DEFAULT_GAP_TOL};
pub use spectral::{
    closed_form_evolution, closed_form_projection, spectral_projections_a, Flavor, SpectralSplit, SubspaceFrame,
};
pub use table::{
    asymptotic_value, auto_tau_max, auto_tau_min, build_dichotomy, DichotomyConfig, DichotomyTable, HalfLine,
    RateCertificate, TABLE_FORMAT_VERSION,
};
