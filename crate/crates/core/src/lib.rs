//! Floating-base multibody dynamics and momentum-based balance control.
//!
//! The crate is organized bottom-up:
//!
//! - [`multibody`]: kinematic tree, Jacobians, mass matrix, bias forces, energy.
//! - [`centroidal`]: the change of velocity coordinates that block-diagonalizes
//!   the mass matrix, plus centroidal momentum quantities.
//! - [`control`]: the momentum-based stack-of-tasks controller in its
//!   classical and modified forms, and the two-feet wrench allocation.
//! - [`qp`]: a small dense active-set QP solver.
//! - [`sim`]: constrained closed-loop simulation.
//! - [`analysis`]: linearization of the closed loop and Lyapunov checks.
//! - [`scenario`]: TOML scenario files tying the above together.

pub mod analysis;
pub mod centroidal;
pub mod control;
pub mod error;
pub mod math;
pub mod multibody;
pub mod qp;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};

/// Bundled model files.
pub mod models {
    pub const PENDULUM_FOOT: &str = include_str!("../models/pendulum_foot.json");
    pub const DESK_HUMANOID: &str = include_str!("../models/desk_humanoid.json");
}
