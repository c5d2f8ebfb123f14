//! Centroidal change of velocity coordinates and momentum quantities.
//!
//! `nu_bar = T(q) nu` replaces the base twist with the CoM velocity and the
//! average angular velocity, which block-diagonalizes the mass matrix.
//! Downstream code (the controllers and the stability analysis) works with
//! these transformed quantities; a bare `M_b`, `J_b` or `J_j` there always
//! means the transformed block.

use std::collections::BTreeMap;

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Rotation3, UnitQuaternion, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::math::{condition_number, skew};
use crate::multibody::spatial::{ang, lin};
use crate::multibody::{
    coriolis_matrix, Kinematics, Pose, RobotModel, RobotState, SpatialRole, SpatialVector, GRAVITY,
};

/// Condition number above which the support Jacobian is reported as ill-conditioned.
pub const SUPPORT_CONDITION_WARN: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct CentroidalTransform {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    /// `cX_B = [1, -S(p_c - p_B); 0, 1]`.
    pub com_to_base: Matrix6<f64>,
    pub com: Vector3<f64>,
}

impl CentroidalTransform {
    fn from_mass_matrix(m: &DMatrix<f64>, com: Vector3<f64>, base: Vector3<f64>) -> Result<Self> {
        let n = m.nrows() - 6;
        let mb = m.view((0, 0), (6, 6)).into_owned();
        let mbj = m.view((0, 6), (6, n)).into_owned();
        let mb_inv_mbj = mb
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular {
                context: "base mass block".into(),
                detail: "not positive definite".into(),
            })?
            .solve(&mbj);

        let r = skew(&(com - base));
        let mut x = Matrix6::identity();
        x.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-r));
        let mut x_inv = Matrix6::identity();
        x_inv.fixed_view_mut::<3, 3>(0, 3).copy_from(&r);

        let x_dyn = DMatrix::from_column_slice(6, 6, x.as_slice());
        let mut t = DMatrix::identity(n + 6, n + 6);
        t.view_mut((0, 0), (6, 6)).copy_from(&x_dyn);
        t.view_mut((0, 6), (6, n)).copy_from(&(&x_dyn * &mb_inv_mbj));
        let mut t_inv = DMatrix::identity(n + 6, n + 6);
        t_inv.view_mut((0, 0), (6, 6)).copy_from(&DMatrix::from_column_slice(6, 6, x_inv.as_slice()));
        t_inv.view_mut((0, 6), (6, n)).copy_from(&(-mb_inv_mbj));
        Ok(Self { t, t_inv, com_to_base: x, com })
    }
}

/// Everything the controllers need in centroidal coordinates, computed once
/// per state.
#[derive(Debug, Clone)]
pub struct Centroidal<'a> {
    pub kin: Kinematics<'a>,
    pub mass: f64,
    pub transform: CentroidalTransform,
    /// Original mass matrix and bias forces.
    pub m: DMatrix<f64>,
    pub h: DVector<f64>,
    /// `M_bar = T^-T M T^-1`, symmetrized.
    pub m_bar: DMatrix<f64>,
    /// `h_bar = C_bar nu_bar + G_bar`.
    pub h_bar: DVector<f64>,
    pub nu_bar: DVector<f64>,
    /// `Tdot nu`.
    pub t_dot_nu: DVector<f64>,
    /// Whole-body inertia about the CoM and its time derivative.
    pub com_inertia: Matrix3<f64>,
    pub com_inertia_dot: Matrix3<f64>,
}

impl<'a> Centroidal<'a> {
    pub fn new(model: &'a RobotModel, state: &RobotState) -> Result<Self> {
        Self::from_kinematics(Kinematics::new(model, state)?)
    }

    pub fn from_kinematics(kin: Kinematics<'a>) -> Result<Self> {
        let model = kin.model;
        let n = model.dof();
        let mass = model.total_mass();
        let m = kin.mass_matrix();
        let h = kin.bias_forces();
        let com = kin.com();
        let transform = CentroidalTransform::from_mass_matrix(&m, com, kin.base_position)?;
        let t_inv = &transform.t_inv;
        let m_bar = t_inv.transpose() * &m * t_inv;
        let m_bar = (&m_bar + m_bar.transpose()) * 0.5;
        let nu_bar = &transform.t * &kin.nu;

        // Whole-body inertia about the CoM and its rate.
        let com_vel: Vector3<f64> = nu_bar.fixed_rows::<3>(0).into_owned();
        let mut ic = Matrix3::zeros();
        let mut ic_dot = Matrix3::zeros();
        for (l, link) in model.links.iter().enumerate() {
            let r = kin.link_com[l] - com;
            let rd = kin.point_velocity(l, &kin.link_com[l]) - com_vel;
            let w = skew(&ang(&kin.velocity[l]));
            let il = &kin.link_inertia[l];
            let sr = skew(&r);
            let srd = skew(&rd);
            ic += il + link.mass * sr * sr.transpose();
            ic_dot += w * il - il * w + link.mass * (srd * sr.transpose() + sr * srd.transpose());
        }

        // Tdot nu is the rate of nu_bar at zero generalized acceleration.
        let drift = kin.momentum_drift();
        let lin_rate = lin(&drift);
        let ang_rate_c = ang(&drift) - com.cross(&lin_rate);
        let omega_c: Vector3<f64> = nu_bar.fixed_rows::<3>(3).into_owned();
        let ic_chol = ic.cholesky().ok_or_else(|| Error::Singular {
            context: "centroidal inertia".into(),
            detail: "not positive definite".into(),
        })?;
        let omega_c_dot = ic_chol.solve(&(ang_rate_c - ic_dot * omega_c));
        let mut t_dot_nu = DVector::zeros(n + 6);
        t_dot_nu.fixed_rows_mut::<3>(0).copy_from(&(lin_rate / mass));
        t_dot_nu.fixed_rows_mut::<3>(3).copy_from(&omega_c_dot);

        let h_bar = t_inv.transpose() * (&h - &m * (t_inv * &t_dot_nu));

        Ok(Self {
            kin,
            mass,
            transform,
            m,
            h,
            m_bar,
            h_bar,
            nu_bar,
            t_dot_nu,
            com_inertia: ic,
            com_inertia_dot: ic_dot,
        })
    }

    pub fn n(&self) -> usize {
        self.kin.n()
    }

    /// Transformed base mass block `M_bar_b = diag(m 1, I)`.
    pub fn base_mass(&self) -> DMatrix<f64> {
        self.m_bar.view((0, 0), (6, 6)).into_owned()
    }

    /// Transformed joint mass block `M_bar_j`.
    pub fn joint_mass(&self) -> DMatrix<f64> {
        let n = self.n();
        self.m_bar.view((6, 6), (n, n)).into_owned()
    }

    /// Transformed frame Jacobian `J T^-1` and drift `Jbar_dot nu_bar`.
    pub fn frame_jacobian(&self, frame: &str) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let j = self.kin.frame_jacobian(frame)?;
        let jd = self.kin.frame_drift(frame)?;
        let j_bar = &j * &self.transform.t_inv;
        let jd_bar = jd - &j_bar * &self.t_dot_nu;
        Ok((j_bar, jd_bar))
    }

    /// Stacked transformed Jacobians and drifts for several frames.
    pub fn stacked_jacobian(&self, frames: &[String]) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let nv = self.n() + 6;
        let mut j = DMatrix::zeros(6 * frames.len(), nv);
        let mut jd = DVector::zeros(6 * frames.len());
        for (k, f) in frames.iter().enumerate() {
            let (jk, dk) = self.frame_jacobian(f)?;
            j.rows_mut(6 * k, 6).copy_from(&jk);
            jd.rows_mut(6 * k, 6).copy_from(&dk);
        }
        Ok((j, jd))
    }

    /// Centroidal momentum `H = M_bar_b nu_bar_b`, ordered (linear, angular).
    pub fn momentum(&self) -> Vector6<f64> {
        let mut out = Vector6::zeros();
        let v: Vector3<f64> = self.nu_bar.fixed_rows::<3>(0).into_owned();
        let w: Vector3<f64> = self.nu_bar.fixed_rows::<3>(3).into_owned();
        out.fixed_rows_mut::<3>(0).copy_from(&(self.mass * v));
        out.fixed_rows_mut::<3>(3).copy_from(&(self.com_inertia * w));
        out
    }

    /// Centroidal momentum matrix in original coordinates, `[M_bar_b 0] T`.
    pub fn momentum_matrix(&self) -> DMatrix<f64> {
        let mb = self.base_mass();
        &mb * self.transform.t.rows(0, 6)
    }

    /// `J_bar_G = -M_bar_b J_bar_b^-1 J_bar_j` for a single support frame.
    pub fn constrained_momentum_matrix(&self, support: &str) -> Result<DMatrix<f64>> {
        let n = self.n();
        let (j_bar, _) = self.frame_jacobian(support)?;
        let jb = j_bar.view((0, 0), (6, 6)).into_owned();
        let jj = j_bar.view((0, 6), (6, n)).into_owned();
        let cond = condition_number(&jb);
        if cond > SUPPORT_CONDITION_WARN {
            warn!("support Jacobian for `{support}` is ill-conditioned (cond = {cond:.3e})");
        }
        let lu = jb.lu();
        let x = lu.solve(&jj).ok_or_else(|| Error::Singular {
            context: format!("support Jacobian of `{support}`"),
            detail: format!("{cond:.3e}"),
        })?;
        Ok(-(self.base_mass() * x))
    }
}

pub fn centroidal_transform(model: &RobotModel, state: &RobotState) -> Result<CentroidalTransform> {
    let kin = Kinematics::new(model, state)?;
    let m = kin.mass_matrix();
    CentroidalTransform::from_mass_matrix(&m, kin.com(), kin.base_position)
}

/// Lemma-1 form of the equations of motion.
#[derive(Debug, Clone)]
pub struct TransformedDynamics {
    pub mass_matrix: DMatrix<f64>,
    pub base_mass: DMatrix<f64>,
    pub joint_mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub gravity: DVector<f64>,
    /// `C_bar nu_bar + G_bar`.
    pub bias: DVector<f64>,
    pub velocity: DVector<f64>,
    /// Transformed Jacobian of every named frame.
    pub jacobians: BTreeMap<String, DMatrix<f64>>,
}

/// Time step used to differentiate `T^-1` along the configuration flow.
const TINV_FD_STEP: f64 = 1e-6;

pub fn transformed_dynamics(model: &RobotModel, state: &RobotState) -> Result<TransformedDynamics> {
    let cen = Centroidal::new(model, state)?;
    let t_inv = &cen.transform.t_inv;
    let t_inv_t = t_inv.transpose();
    let c = coriolis_matrix(model, state)?;
    let h = TINV_FD_STEP;
    let tp = centroidal_transform(model, &state.flowed(h))?.t_inv;
    let tm = centroidal_transform(model, &state.flowed(-h))?.t_inv;
    let t_inv_dot = (tp - tm) / (2.0 * h);
    let coriolis = &t_inv_t * (&cen.m * t_inv_dot + &c * t_inv);
    let gravity = &t_inv_t * cen.kin.gravity_forces();
    let mut jacobians = BTreeMap::new();
    for f in &model.frames {
        jacobians.insert(f.name.clone(), cen.frame_jacobian(&f.name)?.0);
    }
    Ok(TransformedDynamics {
        base_mass: cen.base_mass(),
        joint_mass: cen.joint_mass(),
        mass_matrix: cen.m_bar.clone(),
        coriolis,
        gravity,
        bias: cen.h_bar.clone(),
        velocity: cen.nu_bar.clone(),
        jacobians,
    })
}

/// Centroidal momentum from `M_bar_b nu_bar_b`.
pub fn momentum(model: &RobotModel, state: &RobotState) -> Result<SpatialVector> {
    let cen = Centroidal::new(model, state)?;
    Ok(SpatialVector::from_vector(&cen.momentum(), SpatialRole::Momentum))
}

/// Centroidal momentum summed link by link about the whole-body CoM.
pub fn momentum_from_links(model: &RobotModel, state: &RobotState) -> Result<SpatialVector> {
    let kin = Kinematics::new(model, state)?;
    let com = kin.com();
    let mut l_tot = Vector3::zeros();
    let mut k_tot = Vector3::zeros();
    for (l, link) in model.links.iter().enumerate() {
        let c = kin.link_com[l];
        let vc = kin.point_velocity(l, &c);
        let w = ang(&kin.velocity[l]);
        let p = link.mass * vc;
        l_tot += p;
        k_tot += kin.link_inertia[l] * w + (c - com).cross(&p);
    }
    Ok(SpatialVector::new(l_tot, k_tot, SpatialRole::Momentum))
}

pub fn centroidal_momentum_matrix(model: &RobotModel, state: &RobotState) -> Result<DMatrix<f64>> {
    Ok(Centroidal::new(model, state)?.momentum_matrix())
}

pub fn constrained_cmm(model: &RobotModel, state: &RobotState, support: &str) -> Result<DMatrix<f64>> {
    Centroidal::new(model, state)?.constrained_momentum_matrix(support)
}

/// Gravity wrench expected in `G_bar`: `m g e_3`.
pub fn gravity_wrench(mass: f64) -> DVector<f64> {
    let mut g = DVector::zeros(6);
    g[2] = mass * GRAVITY;
    g
}

/// Floating-base state with joint angles `q` whose `support` frame sits
/// exactly at `anchor`. With joint rates given, the base twist is solved from
/// `J nu = 0` so that the support frame is at rest.
pub fn anchored_state(
    model: &RobotModel,
    support: &str,
    anchor: &Pose,
    q: &DVector<f64>,
    qdot: Option<&DVector<f64>>,
) -> Result<RobotState> {
    let n = model.dof();
    if q.len() != n {
        return Err(Error::InvalidState(format!("expected {n} joint angles, got {}", q.len())));
    }
    let mut s = RobotState::zero(n);
    s.joint_positions = q.clone();
    let rel = Kinematics::new_unchecked(model, &s).frame_pose(support)?;
    let base = anchor.compose(&rel.inverse());
    s.base_position = base.translation;
    s.base_orientation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(base.rotation));
    if let Some(qd) = qdot {
        if qd.len() != n {
            return Err(Error::InvalidState(format!("expected {n} joint rates, got {}", qd.len())));
        }
        s.joint_velocities = qd.clone();
        let j = Kinematics::new(model, &s)?.frame_jacobian(support)?;
        let jb = j.view((0, 0), (6, 6)).into_owned();
        let jj = j.view((0, 6), (6, n)).into_owned();
        let vb = jb.lu().solve(&(-(jj * qd))).ok_or_else(|| Error::Singular {
            context: format!("support Jacobian of `{support}`"),
            detail: "base block not invertible".into(),
        })?;
        s.base_linear_velocity = Vector3::new(vb[0], vb[1], vb[2]);
        s.base_angular_velocity = Vector3::new(vb[3], vb[4], vb[5]);
    }
    Ok(s)
}
