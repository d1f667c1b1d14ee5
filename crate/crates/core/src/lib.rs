//! Dynamics of weakly damped multilevel systems coupled to a structured bath.
//!
//! The crate provides, in rough dependency order:
//!
//! * [`operators`]: density matrices, superoperators, and the column-stacking
//!   vectorization used throughout.
//! * [`bath`]: spectral densities, decay rates, principal-value Lamb shifts,
//!   and per-transition rate tables.
//! * [`system`]: multilevel system descriptions (level energies, dipole
//!   transitions, extra Hamiltonian terms, optional time dependence).
//! * [`generators`]: master-equation generators. The collective-operator
//!   Lindblad form stays accurate from exactly degenerate to far-detuned
//!   transitions; Bloch-Redfield, fully secular, and partial-secular
//!   constructions are available for comparison.
//! * [`propagation`]: fixed-generator and adiabatic propagation, steady
//!   states, and error metrics.
//! * [`trajectories`]: quantum-jump unraveling with deterministic seeding.
//! * [`oracle`]: numerically exact single-excitation evolution against a
//!   discretized bath, used as the reference solution in tests and scenarios.
//! * [`sysid`]: Hankel-based subspace identification of the effective number
//!   of dynamical variables in simulated data.
//! * [`scenarios`]: preconfigured studies tying everything together, shared
//!   by the CLI and the acceptance tests.

pub mod bath;
pub mod compare;
pub mod error;
pub mod exec;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod propagation;
pub mod quad;
pub mod scenarios;
pub mod slope;
pub mod system;
pub mod sysid;
pub mod trajectories;

pub use error::{Error, Result};
