//! Floating-base rigid-body dynamics: kinematics, Jacobians, mass matrix,
//! bias forces and energy.

pub mod coriolis;
pub mod kinematics;
pub mod model;
pub(crate) mod spatial;
pub mod state;

pub use coriolis::coriolis_matrix;
pub use kinematics::{
    bias_forces, forward_kinematics, frame_jacobian, gravity_forces, inverse_dynamics, jacobian_dot_nu, mass_matrix,
    total_energy, Kinematics,
};
pub use model::{load_model, Frame, Joint, Link, ModelFile, Pose, RobotModel, GRAVITY};
pub use state::{RobotState, SpatialRole, SpatialVector};
