use nalgebra::{DVector, Matrix3, Quaternion, UnitQuaternion, Vector3, Vector6};

use super::model::RobotModel;
use crate::error::{Error, Result};

/// Tolerance on `|Q| - 1` for the base orientation quaternion.
pub const QUATERNION_NORM_TOL: f64 = 1e-9;

/// Floating-base configuration and velocity.
///
/// The base twist uses the mixed representation: `base_linear_velocity` is
/// the inertial-frame velocity of the base origin and `base_angular_velocity`
/// the inertial-frame angular velocity. Generalized velocities are ordered
/// `(v_lin, omega, qdot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub base_position: Vector3<f64>,
    pub base_orientation: UnitQuaternion<f64>,
    pub joint_positions: DVector<f64>,
    pub base_linear_velocity: Vector3<f64>,
    pub base_angular_velocity: Vector3<f64>,
    pub joint_velocities: DVector<f64>,
}

impl RobotState {
    /// Identity base pose, zero joints, at rest.
    pub fn zero(n: usize) -> Self {
        Self {
            base_position: Vector3::zeros(),
            base_orientation: UnitQuaternion::identity(),
            joint_positions: DVector::zeros(n),
            base_linear_velocity: Vector3::zeros(),
            base_angular_velocity: Vector3::zeros(),
            joint_velocities: DVector::zeros(n),
        }
    }

    pub fn dof(&self) -> usize {
        self.joint_positions.len()
    }

    pub fn base_rotation(&self) -> Matrix3<f64> {
        // Normalizes so RK4 stage states with slightly off-norm quaternions stay valid.
        let q = self.base_orientation.quaternion();
        UnitQuaternion::from_quaternion(*q).to_rotation_matrix().into_inner()
    }

    /// Generalized velocity `nu = (v_B, omega_B, qdot)`.
    pub fn nu(&self) -> DVector<f64> {
        let n = self.dof();
        let mut nu = DVector::zeros(n + 6);
        nu.fixed_rows_mut::<3>(0).copy_from(&self.base_linear_velocity);
        nu.fixed_rows_mut::<3>(3).copy_from(&self.base_angular_velocity);
        nu.rows_mut(6, n).copy_from(&self.joint_velocities);
        nu
    }

    pub fn set_nu(&mut self, nu: &DVector<f64>) {
        assert_eq!(nu.len(), self.dof() + 6, "velocity dimension mismatch");
        self.base_linear_velocity = nu.fixed_rows::<3>(0).into_owned();
        self.base_angular_velocity = nu.fixed_rows::<3>(3).into_owned();
        self.joint_velocities = nu.rows(6, self.dof()).into_owned();
    }

    pub fn with_nu(mut self, nu: &DVector<f64>) -> Self {
        self.set_nu(nu);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.base_position.iter().all(|x| x.is_finite())
            && self.base_orientation.coords.iter().all(|x| x.is_finite())
            && self.joint_positions.iter().all(|x| x.is_finite())
            && self.base_linear_velocity.iter().all(|x| x.is_finite())
            && self.base_angular_velocity.iter().all(|x| x.is_finite())
            && self.joint_velocities.iter().all(|x| x.is_finite())
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        let n = model.dof();
        if self.joint_positions.len() != n || self.joint_velocities.len() != n {
            return Err(Error::InvalidState(format!(
                "model has {n} joints, state has {} positions and {} rates",
                self.joint_positions.len(),
                self.joint_velocities.len()
            )));
        }
        let norm = self.base_orientation.quaternion().norm();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(Error::InvalidState(format!("quaternion norm {norm}")));
        }
        if !self.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        Ok(())
    }

    /// Quaternion from `(w, x, y, z)` without renormalizing.
    pub fn raw_quaternion(w: f64, x: f64, y: f64, z: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialRole {
    Twist,
    Wrench,
    Momentum,
}

/// Linear/angular pair, stored in `(linear, angular)` order when flattened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialVector {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
    pub role: SpatialRole,
}

impl SpatialVector {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>, role: SpatialRole) -> Self {
        Self { linear, angular, role }
    }

    pub fn from_vector(v: &Vector6<f64>, role: SpatialRole) -> Self {
        Self::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned(), role)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.linear);
        v.fixed_rows_mut::<3>(3).copy_from(&self.angular);
        v
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.to_vector().as_slice())
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|x| x.is_finite())
    }
}

impl RobotState {
    /// Configuration reached by holding `nu` constant for `dt`:
    /// `p += dt v`, `R = exp(S(omega dt)) R`, `q += dt qdot`.
    pub fn flowed(&self, dt: f64) -> RobotState {
        let mut out = self.clone();
        out.base_position += self.base_linear_velocity * dt;
        let dr = UnitQuaternion::from_scaled_axis(self.base_angular_velocity * dt);
        out.base_orientation = dr * self.base_orientation;
        out.joint_positions += &self.joint_velocities * dt;
        out
    }

    /// Configuration displaced along the tangent coordinates
    /// `delta = (dp, dtheta, dq)` with the rotation applied on the left.
    pub fn displaced(&self, delta: &DVector<f64>) -> RobotState {
        let n = self.dof();
        assert_eq!(delta.len(), n + 6);
        let mut out = self.clone();
        out.base_position += delta.fixed_rows::<3>(0);
        let dr = UnitQuaternion::from_scaled_axis(delta.fixed_rows::<3>(3).into_owned());
        out.base_orientation = dr * self.base_orientation;
        out.joint_positions += delta.rows(6, n);
        out
    }
}
