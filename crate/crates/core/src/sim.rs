//! Constrained forward simulation of the closed loop.
//!
//! The state is integrated with fixed-step RK4 over
//! `(p_B, Q, q, nu)`. Support frames are held by a kinematic constraint
//! whose drift is corrected with Baumgarte terms. Control torques are held
//! constant over each step.

use std::fmt::Write as _;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, Quaternion, UnitQuaternion, Vector3, Vector6};

use crate::centroidal::Centroidal;
use crate::control::{BalanceController, ControlOutput, ControllerState, Reference};
use crate::error::{Error, Result};
use crate::math::{rank, rotation_log};
use crate::multibody::{Kinematics, Pose, RobotModel, RobotState};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_K_POS: f64 = 100.0;
pub const DEFAULT_K_VEL: f64 = 20.0;
/// Tikhonov damping of the contact system when two frames are held.
pub const TWO_FEET_DAMPING: f64 = 1e-10;
/// A state entry beyond this magnitude counts as a blow-up.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub robot: RobotState,
    pub time: f64,
}

impl SimState {
    pub fn new(robot: RobotState) -> Self {
        Self { robot, time: 0.0 }
    }
}

/// Frames held fixed in the world, with the poses they are held at.
#[derive(Debug, Clone)]
pub struct ContactSetup {
    pub frames: Vec<String>,
    pub k_pos: f64,
    pub k_vel: f64,
    pub anchors: Vec<Pose>,
}

impl ContactSetup {
    /// No constraint at all; the robot floats.
    pub fn free() -> Self {
        Self { frames: Vec::new(), k_pos: 0.0, k_vel: 0.0, anchors: Vec::new() }
    }

    /// Holds `frames` at the poses they have in `state`.
    pub fn capture(model: &RobotModel, state: &RobotState, frames: &[String], k_pos: f64, k_vel: f64) -> Result<Self> {
        let kin = Kinematics::new(model, state)?;
        let anchors = frames.iter().map(|f| kin.frame_pose(f)).collect::<Result<Vec<_>>>()?;
        let setup = Self { frames: frames.to_vec(), k_pos, k_vel, anchors };
        setup.validate(model)?;
        Ok(setup)
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        if !(self.k_pos >= 0.0 && self.k_vel >= 0.0) {
            return Err(Error::Config(format!(
                "Baumgarte gains must be nonnegative, got k_pos={} k_vel={}",
                self.k_pos, self.k_vel
            )));
        }
        if self.frames.len() != self.anchors.len() {
            return Err(Error::Config("one anchor pose per constrained frame".into()));
        }
        for f in &self.frames {
            model.frame(f)?;
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        6 * self.frames.len()
    }
}

/// Result of a contact-consistent forward-dynamics solve.
#[derive(Debug, Clone)]
pub struct ContactDynamics {
    pub nu_dot: DVector<f64>,
    /// Stacked constraint wrenches `(force, moment)`, inertial frame.
    pub wrench: DVector<f64>,
    /// `|J nu|`.
    pub velocity_residual: f64,
    /// Largest anchor pose error over the constrained frames.
    pub position_residual: f64,
}

/// Pose error `(p - p_a, log(R R_a^T))` of each constrained frame, stacked.
pub fn anchor_error(kin: &Kinematics, contact: &ContactSetup) -> Result<DVector<f64>> {
    let mut e = DVector::zeros(contact.rows());
    for (k, (f, a)) in contact.frames.iter().zip(&contact.anchors).enumerate() {
        let pose = kin.frame_pose(f)?;
        e.fixed_rows_mut::<3>(6 * k).copy_from(&(pose.translation - a.translation));
        let rot = rotation_log(&(pose.rotation * a.rotation.transpose()));
        e.fixed_rows_mut::<3>(6 * k + 3).copy_from(&rot);
    }
    Ok(e)
}

/// Solves `M nu_dot = B tau - h + J^T f` together with the stabilized
/// constraint `J nu_dot + Jdot nu = -2 k_vel J nu - k_pos e`.
pub fn constrained_forward_dynamics(
    model: &RobotModel,
    state: &RobotState,
    tau: &DVector<f64>,
    contact: &ContactSetup,
) -> Result<ContactDynamics> {
    let n = model.dof();
    if tau.len() != n {
        return Err(Error::InvalidState(format!("{} torques for {n} joints", tau.len())));
    }
    let kin = Kinematics::new_unchecked(model, state);
    let m = kin.mass_matrix();
    let mut rhs = -kin.bias_forces();
    {
        let mut joints = rhs.rows_mut(6, n);
        joints += tau;
    }
    if !m.iter().chain(rhs.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite { step: 0, time: 0.0 });
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Singular { context: "mass matrix".into(), detail: "not positive definite".into() })?;
    let free_acc = chol.solve(&rhs);
    let k = contact.rows();
    if k == 0 {
        return Ok(ContactDynamics {
            nu_dot: free_acc,
            wrench: DVector::zeros(0),
            velocity_residual: 0.0,
            position_residual: 0.0,
        });
    }

    let mut jac = DMatrix::zeros(k, n + 6);
    let mut drift = DVector::zeros(k);
    for (i, f) in contact.frames.iter().enumerate() {
        jac.rows_mut(6 * i, 6).copy_from(&kin.frame_jacobian(f)?);
        drift.rows_mut(6 * i, 6).copy_from(&kin.frame_drift(f)?);
    }
    let nu = state.nu();
    let velocity = &jac * &nu;
    let error = anchor_error(&kin, contact)?;
    let target = -&drift - &velocity * (2.0 * contact.k_vel) - &error * contact.k_pos;

    let minv_jt = chol.solve(&jac.transpose());
    let mut delassus = &jac * &minv_jt;
    delassus = (&delassus + delassus.transpose()) * 0.5;
    if contact.frames.len() > 1 {
        for i in 0..k {
            delassus[(i, i)] += TWO_FEET_DAMPING;
        }
    }
    let b = target - &jac * &free_acc;
    let wrench = match delassus.clone().cholesky() {
        Some(c) => c.solve(&b),
        None => {
            return Err(Error::Singular {
                context: "contact KKT system".into(),
                detail: format!("constraint Jacobian rank {} of {k}", rank(&jac)),
            })
        }
    };
    let nu_dot = free_acc + minv_jt * &wrench;
    let position_residual = (0..contact.frames.len()).map(|i| error.rows(6 * i, 6).norm()).fold(0.0, f64::max);
    Ok(ContactDynamics { nu_dot, wrench, velocity_residual: velocity.norm(), position_residual })
}

/// What a control law hands the simulator for one step.
#[derive(Debug, Clone)]
pub struct ControlSample {
    pub tau: DVector<f64>,
    pub output: Option<ControlOutput>,
    /// Integral state at the start of the step.
    pub integral: Option<Vector6<f64>>,
}

impl ControlSample {
    pub fn torque(tau: DVector<f64>) -> Self {
        Self { tau, output: None, integral: None }
    }
}

pub trait ControlLaw {
    /// Torques held over the step `[t, t + dt)`. Internal controller state
    /// advances by `dt`.
    fn control(&mut self, state: &SimState, dt: f64) -> Result<ControlSample>;

    /// Desired joint positions, for logging the postural error.
    fn joint_reference(&self) -> Option<&DVector<f64>> {
        None
    }

    /// Desired momentum at time `t`.
    fn momentum_reference(&self, _t: f64) -> Option<Vector6<f64>> {
        None
    }
}

/// Passive robot.
pub struct ZeroTorque(pub usize);

impl ControlLaw for ZeroTorque {
    fn control(&mut self, _state: &SimState, _dt: f64) -> Result<ControlSample> {
        Ok(ControlSample::torque(DVector::zeros(self.0)))
    }
}

pub struct ConstantTorque(pub DVector<f64>);

impl ControlLaw for ConstantTorque {
    fn control(&mut self, _state: &SimState, _dt: f64) -> Result<ControlSample> {
        Ok(ControlSample::torque(self.0.clone()))
    }
}

/// Momentum-based balance controller with its integral state.
pub struct ClosedLoop<'a> {
    pub controller: BalanceController<'a>,
    pub state: ControllerState,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(controller: BalanceController<'a>, initial: &RobotState) -> Result<Self> {
        let state = controller.initial_state(initial)?;
        Ok(Self { controller, state })
    }

    pub fn reference(&self) -> &Reference {
        &self.controller.reference
    }
}

impl ControlLaw for ClosedLoop<'_> {
    fn control(&mut self, state: &SimState, dt: f64) -> Result<ControlSample> {
        let cen = Centroidal::new(self.controller.model, &state.robot)?;
        let output = self.controller.evaluate_with(&cen, &state.robot, &self.state)?;
        let integral = self.state.integral;
        self.state = self.controller.integrate(&cen, &state.robot, &self.state, dt)?;
        Ok(ControlSample { tau: output.tau.clone(), output: Some(output), integral: Some(integral) })
    }

    fn joint_reference(&self) -> Option<&DVector<f64>> {
        Some(&self.controller.reference.q_des)
    }

    fn momentum_reference(&self, t: f64) -> Option<Vector6<f64>> {
        Some(self.controller.reference.sample(t).momentum)
    }
}

fn pack(state: &RobotState) -> DVector<f64> {
    let n = state.dof();
    let mut x = DVector::zeros(7 + n + n + 6);
    x.fixed_rows_mut::<3>(0).copy_from(&state.base_position);
    let q = state.base_orientation.quaternion();
    x[3] = q.w;
    x[4] = q.i;
    x[5] = q.j;
    x[6] = q.k;
    x.rows_mut(7, n).copy_from(&state.joint_positions);
    x.rows_mut(7 + n, n + 6).copy_from(&state.nu());
    x
}

fn raw_quaternion(x: &DVector<f64>) -> Quaternion<f64> {
    Quaternion::new(x[3], x[4], x[5], x[6])
}

/// State carried by `x`; the quaternion is normalized only if `normalize`.
fn unpack(x: &DVector<f64>, n: usize, normalize: bool) -> RobotState {
    let q = raw_quaternion(x);
    let base_orientation =
        if normalize { UnitQuaternion::from_quaternion(q) } else { UnitQuaternion::new_unchecked(q) };
    let mut s = RobotState {
        base_position: x.fixed_rows::<3>(0).into_owned(),
        base_orientation,
        joint_positions: x.rows(7, n).into_owned(),
        base_linear_velocity: Vector3::zeros(),
        base_angular_velocity: Vector3::zeros(),
        joint_velocities: DVector::zeros(n),
    };
    s.set_nu(&x.rows(7 + n, n + 6).into_owned());
    s
}

fn derivative(
    model: &RobotModel,
    x: &DVector<f64>,
    tau: &DVector<f64>,
    contact: &ContactSetup,
) -> Result<DVector<f64>> {
    let n = model.dof();
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { step: 0, time: 0.0 });
    }
    let state = unpack(x, n, true);
    let dynamics = constrained_forward_dynamics(model, &state, tau, contact)?;
    let mut dx = DVector::zeros(x.len());
    dx.fixed_rows_mut::<3>(0).copy_from(&state.base_linear_velocity);
    let omega = Quaternion::from_imag(state.base_angular_velocity);
    let qdot = omega * raw_quaternion(x) * 0.5;
    dx[3] = qdot.w;
    dx[4] = qdot.i;
    dx[5] = qdot.j;
    dx[6] = qdot.k;
    dx.rows_mut(7, n).copy_from(&state.joint_velocities);
    dx.rows_mut(7 + n, n + 6).copy_from(&dynamics.nu_dot);
    Ok(dx)
}

/// One RK4 step with `tau` held constant; the quaternion is renormalized
/// at the end of the step.
pub fn step_with_torque(
    model: &RobotModel,
    state: &SimState,
    tau: &DVector<f64>,
    contact: &ContactSetup,
    dt: f64,
) -> Result<SimState> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let time = state.time + dt;
    let blown_up = || Error::NonFinite { step: (time / dt).round() as usize, time };
    let stage = |x: &DVector<f64>| match derivative(model, x, tau, contact) {
        Err(Error::NonFinite { .. }) => Err(blown_up()),
        other => other,
    };
    let x = pack(&state.robot);
    let k1 = stage(&x)?;
    let k2 = stage(&(&x + &k1 * (dt / 2.0)))?;
    let k3 = stage(&(&x + &k2 * (dt / 2.0)))?;
    let k4 = stage(&(&x + &k3 * dt))?;
    let next = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if !next.iter().all(|v| v.is_finite() && v.abs() < DIVERGENCE_LIMIT) {
        return Err(blown_up());
    }
    Ok(SimState { robot: unpack(&next, model.dof(), true), time })
}

/// One closed-loop step: the law is evaluated once at the step start.
pub fn step(
    model: &RobotModel,
    state: &SimState,
    law: &mut dyn ControlLaw,
    contact: &ContactSetup,
    dt: f64,
) -> Result<SimState> {
    let sample = law.control(state, dt)?;
    step_with_torque(model, state, &sample.tau, contact, dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub duration: f64,
    /// Seconds between logged rows; zero logs every step.
    pub log_interval: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dt: DEFAULT_DT, duration: 1.0, log_interval: 0.01 }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be nonnegative, got {}", self.duration)));
        }
        if !(self.log_interval >= 0.0 && self.log_interval.is_finite()) {
            return Err(Error::Config(format!("log interval must be nonnegative, got {}", self.log_interval)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn log_every(&self) -> usize {
        ((self.log_interval / self.dt).round() as usize).max(1)
    }
}

/// Sampled trajectory with a fixed column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryLog {
    pub fn new(n: usize, supports: usize) -> Self {
        let mut columns = vec!["t".to_string(), "jerr_norm".to_string()];
        for prefix in ["H", "Ht", "I"] {
            columns.extend((1..=6).map(|i| format!("{prefix}_{i}")));
        }
        columns.extend((1..=6 * supports).map(|i| format!("f_{i}")));
        columns.extend((1..=n).map(|i| format!("tau_{i}")));
        columns.extend(["cres", "energy", "com_x", "com_y", "com_z"].map(String::from));
        Self { columns, rows: Vec::new() }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    /// Value of `name` at the last logged time not after `t`.
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        let i = self.column_index(name)?;
        self.rows.iter().take_while(|r| r[0] <= t + 1e-9).last().map(|r| r[i])
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        let i = self.column_index(name)?;
        self.rows.last().map(|r| r[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format_sci(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// `printf("%.12e")` formatting: two-digit signed exponent.
pub fn format_sci(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let mut out = String::with_capacity(s.len() + 2);
    let sign = if exp < 0 { '-' } else { '+' };
    let _ = write!(out, "{mantissa}e{sign}{:02}", exp.abs());
    out
}

fn log_row(
    model: &RobotModel,
    state: &SimState,
    sample: &ControlSample,
    dynamics: &ContactDynamics,
    law: &dyn ControlLaw,
    supports: usize,
) -> Result<Vec<f64>> {
    let robot = &state.robot;
    let kin = Kinematics::new_unchecked(model, robot);
    let jerr = law.joint_reference().map_or(0.0, |q_des| (&robot.joint_positions - q_des).norm());
    let momentum = match &sample.output {
        Some(o) => o.momentum,
        None => Centroidal::from_kinematics(kin.clone())?.momentum(),
    };
    let error = match &sample.output {
        Some(o) => o.momentum_error,
        None => momentum - law.momentum_reference(state.time).unwrap_or_else(Vector6::zeros),
    };
    let integral = sample.integral.unwrap_or_else(Vector6::zeros);
    let mut row = Vec::with_capacity(26 + 6 * supports + model.dof());
    row.push(state.time);
    row.push(jerr);
    row.extend(momentum.iter());
    row.extend(error.iter());
    row.extend(integral.iter());
    if dynamics.wrench.len() == 6 * supports {
        row.extend(dynamics.wrench.iter());
    } else {
        row.extend(std::iter::repeat_n(0.0, 6 * supports));
    }
    row.extend(sample.tau.iter());
    row.push(dynamics.velocity_residual);
    row.push(kin.total_energy());
    row.extend(kin.com().iter());
    Ok(row)
}

/// Runs the closed loop from `initial` and logs it.
pub fn simulate(
    model: &RobotModel,
    initial: &SimState,
    law: &mut dyn ControlLaw,
    contact: &ContactSetup,
    options: &SimOptions,
) -> Result<TrajectoryLog> {
    options.validate()?;
    contact.validate(model)?;
    initial.robot.validate(model)?;
    let supports = contact.frames.len();
    let mut log = TrajectoryLog::new(model.dof(), supports);
    let steps = options.steps();
    let every = options.log_every();
    let mut state = initial.clone();
    for k in 0..=steps {
        let dt = options.dt;
        let sample = law.control(&state, dt)?;
        if !sample.tau.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { step: k, time: state.time });
        }
        if k % every == 0 || k == steps {
            let dynamics = constrained_forward_dynamics(model, &state.robot, &sample.tau, contact)?;
            log.rows.push(log_row(model, &state, &sample, &dynamics, law, supports)?);
        }
        if k == steps {
            break;
        }
        state = match step_with_torque(model, &state, &sample.tau, contact, dt) {
            Ok(s) => s,
            Err(Error::NonFinite { time, .. }) => return Err(Error::NonFinite { step: k + 1, time }),
            Err(e) => return Err(e),
        };
        if k % 10_000 == 0 && k > 0 {
            debug!("t = {:.3} s", state.time);
        }
    }
    let q_norm = state.robot.base_orientation.quaternion().norm();
    if (q_norm - 1.0).abs() > 1e-9 {
        warn!("final quaternion norm {q_norm}");
    }
    Ok(log)
}

/// Runs the closed loop described by `config` from its perturbed start.
pub fn run_scenario(model: &RobotModel, config: &crate::scenario::ScenarioConfig) -> Result<TrajectoryLog> {
    let setup = crate::scenario::ScenarioSetup::new(model, config)?;
    let controller = setup.controller(model)?;
    let mut law = ClosedLoop::new(controller, &setup.initial)?;
    let contact = setup.contact(model, config)?;
    simulate(model, &SimState::new(setup.initial.clone()), &mut law, &contact, &config.options())
}
