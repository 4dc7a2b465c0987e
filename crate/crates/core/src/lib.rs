//! Discrete p-modulus of curve families on planar metric grids.
//!
//! The crate discretizes a quadrilateral `[0, width] x [0, height]` into an
//! `n x n` lattice of cell centers carrying one of the norms `l1`, `l2`,
//! `linf` and an optional conformal weight. On top of that it provides:
//!
//! - [`geometry`]: the grid, step lengths, and Hausdorff-measure normalization
//!   (`H^2 = c * Lebesgue` with `c` depending on the norm).
//! - [`families`]: connecting families `Gamma(E, F)` and separating families
//!   `Sigma(E, F)` as separation oracles over 8-connected grid paths.
//! - [`modulus`]: a constraint-generation solver for
//!   `Mod_p = inf sum rho^p dH^2` over admissible densities, with a Lagrangian
//!   dual certificate, and the reciprocity check
//!   `Mod_p(Gamma)^(1/p) * Mod_q(Sigma)^(1/q) >= pi/4`.
//! - [`potential`]: chain potentials integrated from an upper gradient,
//!   capacity potentials, level-set slices, and the coarea and Eilenberg
//!   inequality checks.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod families;
pub mod geometry;
mod math;
pub mod modulus;
pub mod potential;
mod search;

pub use error::Error;
pub use families::{
    loop_erase, ConnectingFamily, CurveSearch, CutSearch, DiscreteCurve, IntegrationRule,
    MeasureConstraint, SeparatingFamily,
};
pub use geometry::{
    hausdorff_density_2d, step_length, v_coeff, Displacement, HausdorffConstants, MetricGrid,
    Norm, Side, WeightField,
};
pub use modulus::{
    lagrangian_lower_bound, solve_modulus, verify_reciprocity, ActiveConstraint,
    ConstraintOracle, Density, ExplicitFamily, InitialDensity, ModulusResult, ReciprocityReport,
    Separation, SolveStatus, SolverConfig, StepRule,
};
pub use potential::{
    capacity_potential, chain_potential, coarea_check, eilenberg_check, level_set_boundary,
    ChainPotential, CoareaCheck, EilenbergCheck, LevelSetSlice,
};

pub type Result<T> = core::result::Result<T, Error>;
