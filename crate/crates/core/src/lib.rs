//! Numerical laboratory for the focusing fourth-order (biharmonic)
//! nonlinear Schrödinger equation with radial data,
//!
//! ```text
//!     i ∂ₜu − Δ²u + μ Δu = −|u|^α u,    u(0) = u₀ ∈ H²(ℝᴺ),  μ ≥ 0,
//! ```
//!
//! covering ground states, sharp scattering/blow-up thresholds, radial time
//! integration, and the diagnostic certificates that verify the theory's
//! computable identities at desk scale.
//!
//! Everything is generic over the floating-point scalar through
//! [`scalar::Real`] (implemented for `f32` and `f64`); the concrete `f64`
//! type aliases at the crate root are the working configuration.

pub mod diagnostics;
pub mod dynamics;
pub mod functionals;
pub mod ground_state;
pub mod model;
pub mod radial_grid;
pub mod scalar;

pub use scalar::{Cplx, Real};

/// Working-precision problem parameters.
pub type Params = model::Params<f64>;
/// Working-precision exponent family.
pub type ExponentSet = model::ExponentSet<f64>;
/// Working-precision grid.
pub type Grid = radial_grid::Grid<f64>;
/// Working-precision radial field.
pub type RadialField = radial_grid::RadialField<f64>;
/// Working-precision virial weight.
pub type Weight = functionals::Weight<f64>;
/// Working-precision cutoff.
pub type Cutoff = functionals::Cutoff<f64>;
/// Working-precision observable record.
pub type Observables = functionals::Observables<f64>;
/// Working-precision ground state.
pub type GroundState = ground_state::GroundState<f64>;
/// Working-precision thresholds.
pub type Thresholds = ground_state::Thresholds<f64>;
/// Double-precision integrator configuration.
pub type SolverConfig = dynamics::SolverConfig<f64>;
/// Double-precision trajectory record.
pub type Trajectory = dynamics::Trajectory<f64>;
/// Double-precision verdict record.
pub type Classification = diagnostics::Classification<f64>;
