//! Deterministic solver for the small-angle linear Boltzmann model of proton
//! pencil beams.
//!
//! The phase-space density is split into scatter orders; each order is
//! marched in depth with a Strang splitting of three sub-problems: energy loss
//! (discontinuous Galerkin in energy), lateral advection (MUSCL) and angular
//! diffusion (sine-transform Crank-Nicolson).

pub mod angular_diffusion;
pub mod beam;
pub mod catastrophic;
pub mod driver;
pub mod energy_dg;
pub mod grid;
pub mod lateral_transport;
pub mod physics;
pub mod splitting;
pub mod tally;

pub use beam::BeamSpec;
pub use driver::{solve, solve_with_workers, Problem, Solution, SolveError, SolverConfig};
pub use grid::{Axis, AngularAxis, DepthAxis, EnergyGrid, Geometry, Grids, PhaseField, Region};
pub use physics::Material;
pub use splitting::SplitOrder;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
