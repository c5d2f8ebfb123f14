//! Momentum-based balance controllers.
//!
//! All matrices here are in centroidal coordinates (see
//! [`crate::centroidal`]): `Jbar_b`, `Mbar_j`, `hbar` and friends are the
//! transformed blocks.

pub mod cone;
pub mod controller;
pub mod gains;
pub mod reference;

pub use cone::{friction_cone, world_cone, FrictionCone, CONE_ROWS};
pub use controller::{
    allocation_problem, integrate_momentum_error, momentum_reference, one_foot_torques, one_foot_wrench,
    postural_torque, reference_angular_map, torque_map, two_feet_controller, BalanceController, ContactTerms,
    ControlOutput, ControllerState, QpReport,
};
pub use gains::{GainMode, GainSet};
pub use reference::{Reference, ReferenceKind, ReferenceSample};
