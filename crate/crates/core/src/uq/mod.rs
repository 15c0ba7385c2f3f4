//! Uncertainty propagation: density evolution over number-theoretic
//! representative points, and Monte Carlo through the oracle integrator or
//! a trained surrogate.

pub mod lattice;
pub mod mc;
pub mod pdem;

pub use lattice::{select_representative_points, RepresentativePointSet};
pub use mc::{
    compare_pdf, damage_probability, mc_propagate, oracle_case, pdf_estimate, selector_weights,
    surrogate_case, DamageField, Ensemble, PdfComparison, Propagator, QuantitySelector,
    QuantityTraj,
};
pub use pdem::{
    convection_step, delta_hat, evolve_pdf, load_pdf_grid, pdf_to_csv, run_pdem, save_pdf_grid,
    PdfGrid, XGrid, MASS_TOL,
};
