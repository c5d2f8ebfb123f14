#![allow(dead_code)]

use balance_core::models;
use balance_core::multibody::{load_model, RobotModel, RobotState};
use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn pendulum() -> RobotModel {
    load_model(models::PENDULUM_FOOT).unwrap()
}

pub fn humanoid() -> RobotModel {
    load_model(models::DESK_HUMANOID).unwrap()
}

pub fn bundled() -> Vec<RobotModel> {
    vec![pendulum(), humanoid()]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    if scale == 0.0 {
        return DVector::zeros(n);
    }
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Humanoid joint angles with both knees bent by `2 * bend` and flat feet.
pub fn crouch(bend: f64) -> DVector<f64> {
    let mut q = DVector::zeros(14);
    for leg in [0, 6] {
        q[leg + 2] = -bend;
        q[leg + 3] = 2.0 * bend;
        q[leg + 4] = -bend;
    }
    q
}

pub fn uniform3(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

/// Random configuration and velocity.
pub fn random_state(model: &RobotModel, rng: &mut ChaCha8Rng) -> RobotState {
    let n = model.dof();
    let mut s = RobotState::zero(n);
    s.base_position = uniform3(rng, 1.0);
    s.base_orientation = UnitQuaternion::from_scaled_axis(uniform3(rng, 1.5));
    s.joint_positions = uniform_vec(rng, n, 0.8);
    s.base_linear_velocity = uniform3(rng, 1.0);
    s.base_angular_velocity = uniform3(rng, 1.0);
    s.joint_velocities = uniform_vec(rng, n, 1.0);
    s
}

/// Random configuration with zero velocity.
pub fn random_pose(model: &RobotModel, rng: &mut ChaCha8Rng) -> RobotState {
    let mut s = random_state(model, rng);
    s.set_nu(&DVector::zeros(model.nv()));
    s
}

/// Relative error with an absolute floor of `1e-8` on the scale, so that
/// quantities that vanish identically compare by absolute error.
pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(a.norm()).max(1e-8)
}

pub fn rel_err_m(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(a.norm()).max(1e-12)
}

/// Rotation vector of `r_plus r_minus^T`, the left difference used to
/// differentiate orientations.
pub fn rot_diff(r_plus: &Matrix3<f64>, r_minus: &Matrix3<f64>) -> Vector3<f64> {
    let q = UnitQuaternion::from_matrix(&(r_plus * r_minus.transpose()));
    let im = q.imag();
    let s = im.norm();
    if s == 0.0 {
        return Vector3::zeros();
    }
    let w = q.w;
    let sign = if w < 0.0 { -1.0 } else { 1.0 };
    im * (2.0 * (sign * s).atan2(sign * w) / s)
}

/// Gains of the shipped stable scenario, in modified form.
pub fn stable_gains(n: usize) -> balance_core::control::GainSet {
    use balance_core::control::{GainMode, GainSet};
    use nalgebra::Matrix6;
    GainSet::new(
        Matrix6::identity() * 2.0,
        Matrix6::identity() * 4.0,
        DMatrix::identity(n, n) * 10.0,
        DMatrix::identity(n, n) * 5.0,
        GainMode::Modified,
    )
    .unwrap()
}

/// Runs the nonlinear closed loop on `left_sole` from `x0 = (q - q^d, qdot)`
/// and compares it with `exp(A t) x0`. Returns the largest deviation over
/// the largest norm of the linear prediction.
pub fn linear_vs_nonlinear(
    model: &RobotModel,
    q_des: &DVector<f64>,
    gains: &balance_core::control::GainSet,
    x0: &DVector<f64>,
    duration: f64,
    dt: f64,
) -> f64 {
    use balance_core::analysis::{analytic_linearization, ClosedLoopField};
    use balance_core::centroidal::anchored_state;
    use balance_core::control::{BalanceController, FrictionCone, Reference, ReferenceKind};
    use balance_core::multibody::{Kinematics, Pose};
    use balance_core::sim::{step, ClosedLoop, ContactSetup, SimState, DEFAULT_K_POS, DEFAULT_K_VEL};

    let n = model.dof();
    let sole = "left_sole";
    let sys = analytic_linearization(model, q_des, gains, sole).unwrap();
    let field = ClosedLoopField::new(model, q_des, gains, sole).unwrap();
    let nominal = anchored_state(model, sole, &Pose::identity(), q_des, None).unwrap();
    let com = Kinematics::new(model, &nominal).unwrap().com();
    let reference = Reference::new(ReferenceKind::Hold, com, model.total_mass(), q_des.clone());
    let supports = vec![sole.to_string()];
    let controller =
        BalanceController::new(model, gains.clone(), reference, supports.clone(), FrictionCone::unbounded(), &nominal)
            .unwrap();
    let initial = field.embed(x0).unwrap();
    let mut law = ClosedLoop::new(controller, &initial).unwrap();
    let contact = ContactSetup::capture(model, &nominal, &supports, DEFAULT_K_POS, DEFAULT_K_VEL).unwrap();
    let transition = (&sys.a * dt).exp();

    let mut state = SimState::new(initial);
    let mut linear = x0.clone();
    let steps = (duration / dt).round() as usize;
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for k in 0..=steps {
        let mut x = DVector::zeros(2 * n);
        x.rows_mut(0, n).copy_from(&(&state.robot.joint_positions - q_des));
        x.rows_mut(n, n).copy_from(&state.robot.joint_velocities);
        worst = worst.max((&x - &linear).norm());
        scale = scale.max(linear.norm());
        if k < steps {
            state = step(model, &state, &mut law, &contact, dt).unwrap();
            linear = &transition * linear;
        }
    }
    worst / scale
}
