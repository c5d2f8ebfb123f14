use log::debug;
use nalgebra::{DMatrix, DVector, Vector3, Vector6};

use super::cone::{violated_rows, world_cone, FrictionCone};
use super::gains::{GainMode, GainSet};
use super::reference::Reference;
use crate::centroidal::{anchored_state, Centroidal};
use crate::error::{Error, Result};
use crate::math::pinv;
use crate::multibody::{RobotModel, RobotState, GRAVITY};
use crate::qp::{self, KktResiduals, QpOptions, QpProblem, QpStatus};

/// Integral of the momentum error and the controller clock.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub integral: Vector6<f64>,
    pub time: f64,
}

impl ControllerState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn is_finite(&self) -> bool {
        self.integral.iter().all(|v| v.is_finite()) && self.time.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpReport {
    pub status: QpStatus,
    pub iterations: usize,
    pub active: Vec<usize>,
    pub kkt: KktResiduals,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub tau: DVector<f64>,
    /// One 6-vector `(force, moment about the sole origin)` per support,
    /// stacked, inertial frame.
    pub wrench: DVector<f64>,
    pub h_star: Vector6<f64>,
    pub momentum: Vector6<f64>,
    pub momentum_error: Vector6<f64>,
    pub tau0: DVector<f64>,
    pub u0: DVector<f64>,
    /// `|Lambda N|_max`, zero up to round-off for a valid projector.
    pub nullspace_residual: f64,
    pub qp: Option<QpReport>,
}

impl ControlOutput {
    pub fn is_finite(&self) -> bool {
        self.tau.iter().chain(self.wrench.iter()).all(|v| v.is_finite())
    }
}

/// Support-frame quantities in centroidal coordinates.
#[derive(Debug, Clone)]
pub struct ContactTerms {
    pub mass: f64,
    /// Stacked transformed Jacobian `Jbar` and drift `Jbar_dot nubar`.
    pub jac: DMatrix<f64>,
    pub drift: DVector<f64>,
    pub jb: DMatrix<f64>,
    pub jj: DMatrix<f64>,
    pub mb: DMatrix<f64>,
    pub mj: DMatrix<f64>,
    pub mb_inv: DMatrix<f64>,
    pub mj_inv: DMatrix<f64>,
    pub hb: DVector<f64>,
    pub hj: DVector<f64>,
    /// `Lambda = Jbar_j Mbar_j^-1`, its pseudoinverse and null-space projector.
    pub lambda: DMatrix<f64>,
    pub lambda_pinv: DMatrix<f64>,
    pub nullspace: DMatrix<f64>,
}

fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular { context: what.into(), detail: "not positive definite".into() })
}

impl ContactTerms {
    pub fn new(cen: &Centroidal, supports: &[String]) -> Result<Self> {
        let n = cen.n();
        let (jac, drift) = cen.stacked_jacobian(supports)?;
        let k = jac.nrows();
        let jb = jac.columns(0, 6).into_owned();
        let jj = jac.columns(6, n).into_owned();
        let mb = cen.base_mass();
        let mj = cen.joint_mass();
        let mb_inv = spd_inverse(&mb, "centroidal base mass")?;
        let mj_inv = spd_inverse(&mj, "joint mass block")?;
        let lambda = &jj * &mj_inv;
        let (lambda_pinv, rank) = pinv(&lambda);
        if rank < k {
            return Err(Error::RankDeficient { what: "task map Lambda".into(), rank, required: k });
        }
        let nullspace = DMatrix::identity(n, n) - &lambda_pinv * &lambda;
        let nullspace = (&nullspace + nullspace.transpose()) * 0.5;
        Ok(Self {
            mass: cen.mass,
            jac,
            drift,
            jb,
            jj,
            mb,
            mj,
            mb_inv,
            mj_inv,
            hb: cen.h_bar.rows(0, 6).into_owned(),
            hj: cen.h_bar.rows(6, n).into_owned(),
            lambda,
            lambda_pinv,
            nullspace,
        })
    }

    /// `Jbar Mbar^-1 v` for a generalized force `v = (v_b, v_j)`.
    fn jac_minv(&self, vb: &DVector<f64>, vj: &DVector<f64>) -> DVector<f64> {
        &self.jb * (&self.mb_inv * vb) + &self.jj * (&self.mj_inv * vj)
    }

    /// `Jbar Mbar^-1 Jbar^T`.
    fn jac_minv_jac_t(&self) -> DMatrix<f64> {
        &self.jb * &self.mb_inv * self.jb.transpose() + &self.jj * &self.mj_inv * self.jj.transpose()
    }

    /// Torques realizing the wrench `f` while keeping the supports at rest,
    /// with `tau0` projected onto the null space of `Lambda`.
    pub fn torques(&self, f: &DVector<f64>, tau0: &DVector<f64>) -> DVector<f64> {
        let vb = &self.hb - self.jb.transpose() * f;
        let vj = &self.hj - self.jj.transpose() * f;
        let rhs = self.jac_minv(&vb, &vj) - &self.drift;
        &self.lambda_pinv * rhs + &self.nullspace * tau0
    }

    /// Postural feedback `u0 = Kp^j (q - q^d) + Kd^j qdot`.
    pub fn postural_feedback(
        &self,
        gains: &GainSet,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        q_des: &DVector<f64>,
    ) -> DVector<f64> {
        let e = q - q_des;
        match gains.mode {
            GainMode::Classical => &gains.posture_kp * e + &gains.posture_kd * qdot,
            GainMode::Modified => {
                let nm = &self.nullspace * &self.mj;
                &gains.posture_kp * (&nm * e) + &gains.posture_kd * (&nm * qdot)
            }
        }
    }

    /// Effective postural stiffness and damping matrices.
    pub fn postural_gains(&self, gains: &GainSet) -> (DMatrix<f64>, DMatrix<f64>) {
        match gains.mode {
            GainMode::Classical => (gains.posture_kp.clone(), gains.posture_kd.clone()),
            GainMode::Modified => {
                let nm = &self.nullspace * &self.mj;
                (&gains.posture_kp * &nm, &gains.posture_kd * &nm)
            }
        }
    }

    fn nullspace_residual(&self) -> f64 {
        (&self.lambda * &self.nullspace).amax()
    }
}

fn gravity_wrench(mass: f64) -> Vector6<f64> {
    let mut g = Vector6::zeros();
    g[2] = mass * GRAVITY;
    g
}

fn dvec6(v: &Vector6<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

/// `Hdot* = Hdot^d - Kp (H - H^d) - Ki I`.
pub fn momentum_reference(
    gains: &GainSet,
    ctrl: &ControllerState,
    momentum: &Vector6<f64>,
    reference: &Reference,
    t: f64,
) -> Vector6<f64> {
    let r = reference.sample(t);
    r.momentum_rate - gains.kp * (momentum - r.momentum) - gains.ki * ctrl.integral
}

/// Angular rows of the constrained momentum matrix at the postural
/// reference, with the support frame kept where it currently is.
pub fn reference_angular_map(
    model: &RobotModel,
    state: &RobotState,
    support: &str,
    q_des: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let anchor = crate::multibody::Kinematics::new(model, state)?.frame_pose(support)?;
    let at_ref = anchored_state(model, support, &anchor, q_des, None)?;
    let jg = Centroidal::new(model, &at_ref)?.constrained_momentum_matrix(support)?;
    Ok(jg.rows(3, 3).into_owned())
}

fn integrand(
    gains: &GainSet,
    cen: &Centroidal,
    support: &str,
    qdot: &DVector<f64>,
    angular_map: Option<&DMatrix<f64>>,
    reference: &Reference,
    t: f64,
) -> Result<Vector6<f64>> {
    let r = reference.sample(t);
    match gains.mode {
        GainMode::Classical => Ok(cen.momentum() - r.momentum),
        GainMode::Modified => {
            let jg = cen.constrained_momentum_matrix(support)?;
            let lin = jg.rows(0, 3) * qdot;
            let ang = angular_map.expect("modified mode needs the reference angular map") * qdot;
            let mut out = Vector6::zeros();
            out.fixed_rows_mut::<3>(0).copy_from(&Vector3::new(lin[0], lin[1], lin[2]));
            out.fixed_rows_mut::<3>(3).copy_from(&Vector3::new(ang[0], ang[1], ang[2]));
            Ok(out - r.momentum)
        }
    }
}

/// One forward-Euler step of the integral state.
///
/// Classical mode integrates the momentum error `H - H^d`. Modified mode
/// integrates `[J_G^L(q); J_G^w(q^d)] qdot - H^d`, where the constrained
/// momentum matrix is taken with respect to `support`.
pub fn integrate_momentum_error(
    gains: &GainSet,
    ctrl: &ControllerState,
    model: &RobotModel,
    state: &RobotState,
    reference: &Reference,
    support: &str,
    dt: f64,
) -> Result<ControllerState> {
    let cen = Centroidal::new(model, state)?;
    let map = match gains.mode {
        GainMode::Modified => Some(reference_angular_map(model, state, support, &reference.q_des)?),
        GainMode::Classical => None,
    };
    let rate = integrand(gains, &cen, support, &state.joint_velocities, map.as_ref(), reference, ctrl.time)?;
    Ok(ControllerState { integral: ctrl.integral + rate * dt, time: ctrl.time + dt })
}

fn wrench_from_terms(terms: &ContactTerms, h_star: &Vector6<f64>) -> Result<DVector<f64>> {
    let rhs = dvec6(&(h_star + gravity_wrench(terms.mass)));
    terms.jb.transpose().lu().solve(&rhs).ok_or_else(|| Error::Singular {
        context: "support Jacobian base block".into(),
        detail: "not invertible".into(),
    })
}

/// Contact wrench producing the momentum rate `h_star`:
/// `f = Jbar_b^-T (Hdot* + m g e_3)`.
pub fn one_foot_wrench(
    model: &RobotModel,
    state: &RobotState,
    support: &str,
    h_star: &Vector6<f64>,
) -> Result<DVector<f64>> {
    let cen = Centroidal::new(model, state)?;
    let (j, _) = cen.frame_jacobian(support)?;
    let jb = j.columns(0, 6).into_owned();
    let rhs = dvec6(&(h_star + gravity_wrench(cen.mass)));
    jb.transpose().lu().solve(&rhs).ok_or_else(|| Error::Singular {
        context: format!("support Jacobian of `{support}`"),
        detail: "not invertible".into(),
    })
}

/// Postural torque `tau0 = h_j - Jbar_j^T f - u0` and the feedback `u0`.
pub fn postural_torque(
    model: &RobotModel,
    state: &RobotState,
    supports: &[String],
    wrench: &DVector<f64>,
    gains: &GainSet,
    reference: &Reference,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let cen = Centroidal::new(model, state)?;
    let terms = ContactTerms::new(&cen, supports)?;
    let u0 = terms.postural_feedback(gains, &state.joint_positions, &state.joint_velocities, &reference.q_des);
    let tau0 = &terms.hj - terms.jj.transpose() * wrench - &u0;
    Ok((tau0, u0))
}

/// `tau = Lambda^+ (Jbar Mbar^-1 (hbar - Jbar^T f) - Jbar_dot nubar) + N tau0`.
pub fn one_foot_torques(
    model: &RobotModel,
    state: &RobotState,
    support: &str,
    wrench: &DVector<f64>,
    tau0: &DVector<f64>,
) -> Result<DVector<f64>> {
    let cen = Centroidal::new(model, state)?;
    let terms = ContactTerms::new(&cen, &[support.to_string()])?;
    Ok(terms.torques(wrench, tau0))
}

/// Torque as an affine function `tau*(f) = tau_c + D f` of the stacked
/// wrench, obtained by solving the inner least-distance problem in closed form.
pub fn torque_map(terms: &ContactTerms, u0: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let free = terms.jac_minv(&terms.hb, &terms.hj) - &terms.drift;
    let tau_c = &terms.nullspace * (&terms.hj - u0) + &terms.lambda_pinv * free;
    let d = -(&terms.nullspace * terms.jj.transpose()) - &terms.lambda_pinv * terms.jac_minv_jac_t();
    (tau_c, d)
}

/// Regularization added to the wrench-allocation Hessian, relative to its
/// largest diagonal entry.
pub const ALLOCATION_REGULARIZATION: f64 = 1e-9;

/// Outer wrench-allocation QP for stacked supports.
pub fn allocation_problem(
    terms: &ContactTerms,
    h_star: &Vector6<f64>,
    u0: &DVector<f64>,
    cone: &FrictionCone,
    sole_rotations: &[nalgebra::Matrix3<f64>],
) -> Result<(QpProblem, DVector<f64>, DMatrix<f64>)> {
    let (tau_c, d) = torque_map(terms, u0);
    let k = terms.jac.nrows();
    let mut p = d.transpose() * &d;
    p = (&p + p.transpose()) * 0.5;
    let reg = ALLOCATION_REGULARIZATION * p.diagonal().max().max(1e-12);
    for i in 0..k {
        p[(i, i)] += reg;
    }
    let g = d.transpose() * &tau_c;
    let a_eq = terms.jb.transpose();
    let b_eq = dvec6(&(h_star + gravity_wrench(terms.mass)));
    let (a_in, b_in) = if cone.is_unbounded() {
        (DMatrix::zeros(0, k), DVector::zeros(0))
    } else {
        let rows = super::cone::CONE_ROWS;
        let mut a = DMatrix::zeros(rows * sole_rotations.len(), k);
        let mut b = DVector::zeros(rows * sole_rotations.len());
        for (s, rot) in sole_rotations.iter().enumerate() {
            let (c, bb) = world_cone(cone, rot)?;
            a.view_mut((rows * s, 6 * s), (rows, 6)).copy_from(&c);
            b.rows_mut(rows * s, rows).copy_from(&bb);
        }
        (a, b)
    };
    Ok((QpProblem { p, g, a_eq, b_eq, a_in, b_in }, tau_c, d))
}

/// Two-support controller: wrench allocation by QP, then the torques that
/// realize it with the smallest deviation from the postural torque.
#[allow(clippy::too_many_arguments)]
pub fn two_feet_controller(
    model: &RobotModel,
    state: &RobotState,
    supports: &[String],
    h_star: &Vector6<f64>,
    gains: &GainSet,
    reference: &Reference,
    t: f64,
    cone: &FrictionCone,
    options: &QpOptions,
) -> Result<ControlOutput> {
    let cen = Centroidal::new(model, state)?;
    let terms = ContactTerms::new(&cen, supports)?;
    let rotations = supports.iter().map(|s| cen.kin.frame_pose(s).map(|p| p.rotation)).collect::<Result<Vec<_>>>()?;
    let u0 = terms.postural_feedback(gains, &state.joint_positions, &state.joint_velocities, &reference.q_des);
    let momentum = cen.momentum();
    let err = momentum - reference.sample(t).momentum;
    allocate(&terms, h_star, &u0, cone, &rotations, options, momentum, err)
}

#[allow(clippy::too_many_arguments)]
fn allocate(
    terms: &ContactTerms,
    h_star: &Vector6<f64>,
    u0: &DVector<f64>,
    cone: &FrictionCone,
    rotations: &[nalgebra::Matrix3<f64>],
    options: &QpOptions,
    momentum: Vector6<f64>,
    momentum_error: Vector6<f64>,
) -> Result<ControlOutput> {
    let (problem, tau_c, d) = allocation_problem(terms, h_star, u0, cone, rotations)?;
    let sol = qp::solve(&problem, options)?;
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::Infeasible => {
            debug!("infeasible wrench allocation:\n{}", problem.to_json());
            let least = qp::solve_equality_ls(&problem.a_eq, &problem.b_eq, &DVector::zeros(problem.dim()))?;
            let rows = violated_rows(&problem.a_in, &problem.b_in, &least, options.tol);
            return Err(Error::Infeasible(format!(
                "contact wrench cones cannot realize the momentum rate; rows violated at the least-norm wrench: {rows:?}"
            )));
        }
        QpStatus::MaxIter => return Err(Error::MaxIterations(sol.iterations)),
    }
    let f = sol.x.clone();
    let tau = &tau_c + &d * &f;
    let tau0 = &terms.hj - terms.jj.transpose() * &f - u0;
    Ok(ControlOutput {
        tau,
        wrench: f,
        h_star: *h_star,
        momentum,
        momentum_error,
        tau0,
        u0: u0.clone(),
        nullspace_residual: terms.nullspace_residual(),
        qp: Some(QpReport {
            status: sol.status,
            iterations: sol.iterations,
            active: sol.active,
            kkt: sol.kkt,
            scale: problem.scale(),
        }),
    })
}

/// Complete balance controller bound to a model, a support set and a
/// reference.
#[derive(Debug, Clone)]
pub struct BalanceController<'a> {
    pub model: &'a RobotModel,
    pub gains: GainSet,
    pub reference: Reference,
    pub supports: Vec<String>,
    pub cone: FrictionCone,
    pub qp_options: QpOptions,
    /// `J_G^w(q^d)` for the modified integral law.
    pub angular_map: Option<DMatrix<f64>>,
}

impl<'a> BalanceController<'a> {
    /// `state` fixes the support poses used to evaluate the reference
    /// angular map.
    pub fn new(
        model: &'a RobotModel,
        gains: GainSet,
        reference: Reference,
        supports: Vec<String>,
        cone: FrictionCone,
        state: &RobotState,
    ) -> Result<Self> {
        if supports.is_empty() || supports.len() > 2 {
            return Err(Error::Config(format!("expected one or two support frames, got {}", supports.len())));
        }
        if gains.n() != model.dof() || reference.q_des.len() != model.dof() {
            return Err(Error::InvalidGains(format!(
                "gain/reference size does not match the model's {} joints",
                model.dof()
            )));
        }
        let angular_map = match gains.mode {
            GainMode::Modified => Some(reference_angular_map(model, state, &supports[0], &reference.q_des)?),
            GainMode::Classical => None,
        };
        Ok(Self { model, gains, reference, supports, cone, qp_options: QpOptions::default(), angular_map })
    }

    /// Integral state consistent with the postural reference: the linear
    /// part is `m (x_c - x_c^d(0))`, the angular part (modified mode only)
    /// `J_G^w(q^d) (q - q^d)`. Both vanish when the robot starts at the
    /// reference.
    pub fn initial_state(&self, state: &RobotState) -> Result<ControllerState> {
        let kin = crate::multibody::Kinematics::new(self.model, state)?;
        let mut integral = Vector6::zeros();
        let lin = (kin.com() - self.reference.sample(0.0).com) * self.model.total_mass();
        integral.fixed_rows_mut::<3>(0).copy_from(&lin);
        if let Some(map) = &self.angular_map {
            let a = map * (&state.joint_positions - &self.reference.q_des);
            integral.fixed_rows_mut::<3>(3).copy_from(&Vector3::new(a[0], a[1], a[2]));
        }
        Ok(ControllerState { integral, time: 0.0 })
    }

    pub fn evaluate(&self, state: &RobotState, ctrl: &ControllerState) -> Result<ControlOutput> {
        let cen = Centroidal::new(self.model, state)?;
        self.evaluate_with(&cen, state, ctrl)
    }

    pub fn evaluate_with(&self, cen: &Centroidal, state: &RobotState, ctrl: &ControllerState) -> Result<ControlOutput> {
        let terms = ContactTerms::new(cen, &self.supports)?;
        let t = ctrl.time;
        let momentum = cen.momentum();
        let momentum_error = momentum - self.reference.sample(t).momentum;
        let h_star = momentum_reference(&self.gains, ctrl, &momentum, &self.reference, t);
        let u0 = terms.postural_feedback(
            &self.gains,
            &state.joint_positions,
            &state.joint_velocities,
            &self.reference.q_des,
        );
        if self.supports.len() == 2 {
            let rotations =
                self.supports.iter().map(|s| cen.kin.frame_pose(s).map(|p| p.rotation)).collect::<Result<Vec<_>>>()?;
            return allocate(&terms, &h_star, &u0, &self.cone, &rotations, &self.qp_options, momentum, momentum_error);
        }
        let f = wrench_from_terms(&terms, &h_star)?;
        let tau0 = &terms.hj - terms.jj.transpose() * &f - &u0;
        let tau = terms.torques(&f, &tau0);
        Ok(ControlOutput {
            tau,
            wrench: f,
            h_star,
            momentum,
            momentum_error,
            tau0,
            u0,
            nullspace_residual: terms.nullspace_residual(),
            qp: None,
        })
    }

    /// Forward-Euler update of the integral state over `dt`.
    pub fn integrate(
        &self,
        cen: &Centroidal,
        state: &RobotState,
        ctrl: &ControllerState,
        dt: f64,
    ) -> Result<ControllerState> {
        let rate = integrand(
            &self.gains,
            cen,
            &self.supports[0],
            &state.joint_velocities,
            self.angular_map.as_ref(),
            &self.reference,
            ctrl.time,
        )?;
        Ok(ControllerState { integral: ctrl.integral + rate * dt, time: ctrl.time + dt })
    }
}
