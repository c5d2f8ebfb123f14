//! Linearization and stability certificates for the one-foot closed loop.
//!
//! The closed loop is written in minimal coordinates `x = (q - q^d, qdot)`
//! with the support sole fixed on the ground. The integral state is replaced
//! by its closed form in `q`, which is exact in modified mode and exact on
//! the part seen by a classical integral gain.

use log::warn;
use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::centroidal::{anchored_state, Centroidal};
use crate::control::{
    BalanceController, ContactTerms, ControllerState, FrictionCone, GainMode, GainSet, Reference, ReferenceKind,
};
use crate::error::{Error, Result};
use crate::math::{is_spd, sym_eig_range, symmetrize};
use crate::multibody::{Kinematics, RobotModel, RobotState};
use crate::scenario::ground_anchor;
use crate::sim::{constrained_forward_dynamics, ContactSetup};

pub const FD_STEP: f64 = 1e-6;
/// `V_dot <= tol |P|` counts as negative semidefinite.
pub const VDOT_TOL: f64 = 1e-8;

/// Linear closed loop `xdot = A x` about `(q^d, 0)`, with the quantities it
/// is assembled from.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub a: DMatrix<f64>,
    pub q_des: DVector<f64>,
    pub mode: GainMode,
    pub support: String,
    pub terms: ContactTerms,
}

impl LinearizedSystem {
    pub fn n(&self) -> usize {
        self.q_des.len()
    }

    pub fn stiffness_block(&self) -> DMatrix<f64> {
        let n = self.n();
        self.a.view((n, 0), (n, n)).into_owned()
    }

    pub fn damping_block(&self) -> DMatrix<f64> {
        let n = self.n();
        self.a.view((n, n), (n, n)).into_owned()
    }
}

/// `M_b J_b^-1 Lambda`, the map from `M_j qdot` to momentum (up to sign).
fn task_map(t: &ContactTerms) -> Result<DMatrix<f64>> {
    let jb_inv = t.jb.clone().try_inverse().ok_or_else(|| Error::Singular {
        context: "support Jacobian base block".into(),
        detail: "not invertible".into(),
    })?;
    Ok(&t.mb * jb_inv * &t.lambda)
}

fn one_foot_terms(model: &RobotModel, q_des: &DVector<f64>, support: &str) -> Result<(RobotState, ContactTerms)> {
    if q_des.len() != model.dof() {
        return Err(Error::InvalidState(format!(
            "posture has {} entries, model has {} joints",
            q_des.len(),
            model.dof()
        )));
    }
    if model.dof() < 6 {
        return Err(Error::InvalidState("the closed loop needs at least six joints".into()));
    }
    let state = anchored_state(model, support, &ground_anchor(), q_des, None)?;
    let cen = Centroidal::new(model, &state)?;
    let terms = ContactTerms::new(&cen, &[support.to_string()])?;
    Ok((state, terms))
}

/// Closed-form `A = [0, 1; A1, A2]` at the equilibrium `(q^d, 0)`.
pub fn analytic_linearization(
    model: &RobotModel,
    q_des: &DVector<f64>,
    gains: &GainSet,
    support: &str,
) -> Result<LinearizedSystem> {
    let n = model.dof();
    if gains.n() != n {
        return Err(Error::InvalidGains(format!("gains sized for {} joints, model has {n}", gains.n())));
    }
    let (_, terms) = one_foot_terms(model, q_des, support)?;
    let coupling = &terms.lambda_pinv * &terms.jb * &terms.mb_inv;
    let task = &terms.mb
        * terms.jb.clone().try_inverse().ok_or_else(|| Error::Singular {
            context: "support Jacobian base block".into(),
            detail: "not invertible".into(),
        })?
        * &terms.jj;
    let (kp_post, kd_post) = terms.postural_gains(gains);
    let ki = DMatrix::from_column_slice(6, 6, gains.ki.as_slice());
    let kp = DMatrix::from_column_slice(6, 6, gains.kp.as_slice());
    let a1 = -(&terms.mj_inv * (&coupling * ki * &task + &terms.nullspace * kp_post));
    let a2 = -(&terms.mj_inv * (&coupling * kp * &task + &terms.nullspace * kd_post));
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
    a.view_mut((n, 0), (n, n)).copy_from(&a1);
    a.view_mut((n, n), (n, n)).copy_from(&a2);
    Ok(LinearizedSystem { a, q_des: q_des.clone(), mode: gains.mode, support: support.to_string(), terms })
}

/// Nonlinear closed-loop vector field over minimal coordinates.
pub struct ClosedLoopField<'a> {
    model: &'a RobotModel,
    controller: BalanceController<'a>,
    support: String,
    contact: ContactSetup,
    q_des: DVector<f64>,
}

impl<'a> ClosedLoopField<'a> {
    pub fn new(model: &'a RobotModel, q_des: &DVector<f64>, gains: &GainSet, support: &str) -> Result<Self> {
        let (nominal, _) = one_foot_terms(model, q_des, support)?;
        let com = Kinematics::new(model, &nominal)?.com();
        let reference = Reference::new(ReferenceKind::Hold, com, model.total_mass(), q_des.clone());
        let supports = vec![support.to_string()];
        let controller = BalanceController::new(
            model,
            gains.clone(),
            reference,
            supports.clone(),
            FrictionCone::unbounded(),
            &nominal,
        )?;
        let contact = ContactSetup::capture(model, &nominal, &supports, 0.0, 0.0)?;
        Ok(Self { model, controller, support: support.to_string(), contact, q_des: q_des.clone() })
    }

    pub fn n(&self) -> usize {
        self.q_des.len()
    }

    /// Constraint-consistent state for `x = (q - q^d, qdot)`.
    pub fn embed(&self, x: &DVector<f64>) -> Result<RobotState> {
        let n = self.n();
        let q = &self.q_des + x.rows(0, n);
        let qdot = x.rows(n, n).into_owned();
        anchored_state(self.model, &self.support, &ground_anchor(), &q, Some(&qdot))
    }

    /// Integral state as a function of the configuration.
    pub fn integral(&self, state: &RobotState) -> Result<ControllerState> {
        self.controller.initial_state(state)
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n();
        let state = self.embed(x)?;
        let ctrl = self.integral(&state)?;
        let out = self.controller.evaluate(&state, &ctrl)?;
        let dynamics = constrained_forward_dynamics(self.model, &state, &out.tau, &self.contact)?;
        let mut dx = DVector::zeros(2 * n);
        dx.rows_mut(0, n).copy_from(&x.rows(n, n));
        dx.rows_mut(n, n).copy_from(&dynamics.nu_dot.rows(6, n));
        Ok(dx)
    }

    pub fn jacobian(&self, h: f64) -> Result<DMatrix<f64>> {
        let d = 2 * self.n();
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            let mut xp = DVector::zeros(d);
            xp[i] = h;
            let fp = self.eval(&xp)?;
            let fm = self.eval(&(-xp))?;
            a.set_column(i, &((fp - fm) / (2.0 * h)));
        }
        Ok(a)
    }
}

#[derive(Debug, Clone)]
pub struct FdLinearization {
    pub a: DMatrix<f64>,
    /// Relative Frobenius difference between steps `h` and `h / 10`.
    pub step_agreement: f64,
}

/// Central-difference linearization of the nonlinear closed loop.
pub fn fd_linearization(
    model: &RobotModel,
    q_des: &DVector<f64>,
    gains: &GainSet,
    support: &str,
) -> Result<FdLinearization> {
    let field = ClosedLoopField::new(model, q_des, gains, support)?;
    let a = field.jacobian(FD_STEP)?;
    let fine = field.jacobian(FD_STEP / 10.0)?;
    let step_agreement = (&a - &fine).norm() / a.norm().max(f64::MIN_POSITIVE);
    Ok(FdLinearization { a, step_agreement })
}

pub fn relative_frobenius(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (a - reference).norm() / reference.norm().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedStable,
    Uncertified,
}

#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    /// `V(x) = x^T P x / 2`.
    pub p: DMatrix<f64>,
    /// `A^T P + P A`, symmetrized.
    pub s: DMatrix<f64>,
    pub q1_min_eig: f64,
    pub q2_min_eig: f64,
    pub vdot_max_eig: f64,
    pub p_norm: f64,
    pub max_re: f64,
    pub verdict: Verdict,
    pub reason: Option<String>,
}

pub fn lyapunov_certificate(sys: &LinearizedSystem, gains: &GainSet) -> LyapunovCertificate {
    let t = &sys.terms;
    let n = sys.n();
    let (q1, q2) = match task_map(t) {
        Ok(b) => {
            let ki = DMatrix::from_column_slice(6, 6, gains.ki.as_slice());
            let q1 = b.transpose() * ki * &b + &t.nullspace * &gains.posture_kp * &t.nullspace;
            let q2 = b.transpose() * &b + &t.nullspace;
            (q1, q2)
        }
        Err(_) => (DMatrix::from_element(n, n, f64::NAN), DMatrix::from_element(n, n, f64::NAN)),
    };
    let mut p = DMatrix::zeros(2 * n, 2 * n);
    p.view_mut((0, 0), (n, n)).copy_from(&symmetrize(&(t.mj.transpose() * &q1 * &t.mj)));
    p.view_mut((n, n), (n, n)).copy_from(&symmetrize(&(t.mj.transpose() * &q2 * &t.mj)));
    let s = symmetrize(&(sys.a.transpose() * &p + &p * &sys.a));
    let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
    let min_eig = |m: &DMatrix<f64>| if finite(m) { sym_eig_range(&symmetrize(m)).0 } else { f64::NAN };
    let q1_min_eig = min_eig(&q1);
    let q2_min_eig = min_eig(&q2);
    let (vdot_max_eig, p_norm) =
        if finite(&p) { (sym_eig_range(&s).1, sym_eig_range(&p).1.abs()) } else { (f64::NAN, f64::NAN) };
    let max_re = spectral_report(&sys.a).max_re;

    let mut reason = None;
    if sys.mode == GainMode::Classical {
        reason = Some("integral gain has a zero angular block, so Q1 need not be positive definite".to_string());
    } else if !(is_spd(&sym6(&gains.kp), 0.0) && is_spd(&sym6(&gains.ki), 0.0)) {
        reason = Some("momentum gains are not symmetric positive definite".to_string());
    } else if !(is_spd(&gains.posture_kp, 0.0) && is_spd(&gains.posture_kd, 0.0)) {
        reason = Some("postural gains are not symmetric positive definite".to_string());
    } else if q1_min_eig.is_nan() || q2_min_eig.is_nan() || q1_min_eig <= 0.0 || q2_min_eig <= 0.0 {
        reason = Some(format!("Q1/Q2 not positive definite (min eigenvalues {q1_min_eig:.3e}, {q2_min_eig:.3e})"));
    } else if vdot_max_eig.is_nan() || vdot_max_eig > VDOT_TOL * p_norm {
        reason = Some(format!("A^T P + P A has a positive eigenvalue {vdot_max_eig:.3e}"));
    } else if max_re.is_nan() || max_re >= 0.0 {
        reason = Some(format!("linearization has an eigenvalue with real part {max_re:.3e}"));
    }
    LyapunovCertificate {
        q1,
        q2,
        p,
        s,
        q1_min_eig,
        q2_min_eig,
        vdot_max_eig,
        p_norm,
        max_re,
        verdict: if reason.is_none() { Verdict::CertifiedStable } else { Verdict::Uncertified },
        reason,
    }
}

fn sym6(m: &nalgebra::Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(6, 6, m.as_slice())
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// Sorted by decreasing real part, then decreasing imaginary part.
    pub eigenvalues: Vec<Complex<f64>>,
    pub max_re: f64,
    /// `-max_re`: positive when every mode decays.
    pub margin: f64,
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of `a` from a balanced real Schur form. Every entry is NaN
/// when the iteration does not converge.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if !a.iter().all(|v| v.is_finite()) {
        return vec![Complex::new(f64::NAN, f64::NAN); a.nrows()];
    }
    let mut balanced = a.clone();
    balance_parlett_reinsch(&mut balanced);
    let scale = balanced.amax().max(f64::MIN_POSITIVE);
    for eps in [f64::EPSILON, 1e-13, 1e-11] {
        if let Some(schur) = Schur::try_new(balanced.clone(), eps * scale, SCHUR_MAX_ITER) {
            return schur.complex_eigenvalues().iter().copied().collect();
        }
    }
    warn!("Schur iteration did not converge on a {0}x{0} matrix", a.nrows());
    vec![Complex::new(f64::NAN, f64::NAN); a.nrows()]
}

pub fn spectral_report(a: &DMatrix<f64>) -> SpectralReport {
    let mut eigenvalues = eigenvalues(a);
    eigenvalues.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    let max_re = eigenvalues.first().map_or(f64::NEG_INFINITY, |e| e.re);
    SpectralReport { eigenvalues, max_re, margin: -max_re }
}

/// Summary written by the `linearize` command.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizationReport {
    pub model: String,
    pub q_jd: Vec<f64>,
    pub mode: GainMode,
    /// `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
    pub max_re: f64,
    pub q1_min_eig: f64,
    pub q2_min_eig: f64,
    pub vdot_max_eig: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Relative Frobenius difference between the closed-form and the
    /// finite-difference linearizations.
    pub fd_agreement: f64,
}

pub fn linearization_report(
    model: &RobotModel,
    q_des: &DVector<f64>,
    gains: &GainSet,
    support: &str,
) -> Result<LinearizationReport> {
    let sys = analytic_linearization(model, q_des, gains, support)?;
    let fd = fd_linearization(model, q_des, gains, support)?;
    let cert = lyapunov_certificate(&sys, gains);
    let spectrum = spectral_report(&sys.a);
    Ok(LinearizationReport {
        model: model.name.clone(),
        q_jd: q_des.iter().copied().collect(),
        mode: gains.mode,
        eigenvalues: spectrum.eigenvalues.iter().map(|e| [e.re, e.im]).collect(),
        max_re: spectrum.max_re,
        q1_min_eig: cert.q1_min_eig,
        q2_min_eig: cert.q2_min_eig,
        vdot_max_eig: cert.vdot_max_eig,
        verdict: cert.verdict,
        reason: cert.reason,
        fd_agreement: relative_frobenius(&fd.a, &sys.a),
    })
}
