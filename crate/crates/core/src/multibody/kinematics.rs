use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3, Vector6};

use super::model::{Pose, RobotModel, GRAVITY};
use super::spatial::{self, ang, cross_force, cross_motion, join, lin};
use super::state::RobotState;
use crate::error::Result;
use crate::math::skew;

/// Per-state kinematic quantities shared by the dynamics algorithms.
///
/// Built once per `(model, state)` and then queried for Jacobians, mass
/// matrix, bias forces and momenta.
#[derive(Debug, Clone)]
pub struct Kinematics<'a> {
    pub model: &'a RobotModel,
    pub base_position: Vector3<f64>,
    pub nu: DVector<f64>,
    /// World pose of each link frame.
    pub link_pose: Vec<Pose>,
    /// World-frame joint axes and joint origins, indexed by joint.
    pub joint_axis: Vec<Vector3<f64>>,
    pub joint_origin: Vec<Vector3<f64>>,
    /// Ground-coordinate motion subspace of each joint.
    pub motion: Vec<Vector6<f64>>,
    /// World CoM and inertia about CoM of each link.
    pub link_com: Vec<Vector3<f64>>,
    pub link_inertia: Vec<Matrix3<f64>>,
    pub spatial_inertia: Vec<Matrix6<f64>>,
    /// Spatial velocity of each link.
    pub velocity: Vec<Vector6<f64>>,
    /// Spatial acceleration of each link at zero generalized acceleration.
    pub drift: Vec<Vector6<f64>>,
}

impl<'a> Kinematics<'a> {
    pub fn new(model: &'a RobotModel, state: &RobotState) -> Result<Self> {
        state.validate(model)?;
        Ok(Self::new_unchecked(model, state))
    }

    /// Skips state validation; used on RK4 stage states whose quaternion is
    /// not exactly unit.
    pub fn new_unchecked(model: &'a RobotModel, state: &RobotState) -> Self {
        let nl = model.links.len();
        let nj = model.dof();
        let base_rot = state.base_rotation();
        let p_b = state.base_position;
        let w_b = state.base_angular_velocity;
        let pd_b = state.base_linear_velocity;

        let mut link_pose = vec![Pose::identity(); nl];
        link_pose[model.base] = Pose { rotation: base_rot, translation: p_b };
        let mut velocity = vec![Vector6::zeros(); nl];
        let mut drift = vec![Vector6::zeros(); nl];
        velocity[model.base] = join(&w_b, &(pd_b + p_b.cross(&w_b)));
        drift[model.base] = join(&Vector3::zeros(), &(-w_b.cross(&pd_b)));

        let mut joint_axis = vec![Vector3::zeros(); nj];
        let mut joint_origin = vec![Vector3::zeros(); nj];
        let mut motion = vec![Vector6::zeros(); nj];
        for &j in model.joint_order() {
            let joint = &model.joints[j];
            let q = state.joint_positions[j];
            let qd = state.joint_velocities[j];
            let jf = link_pose[joint.parent].compose(&joint.origin);
            let axis = jf.rotation * joint.axis;
            let origin = jf.translation;
            link_pose[joint.child] =
                Pose { rotation: jf.rotation * crate::math::axis_rotation(&joint.axis, q), translation: origin };
            let s = join(&axis, &origin.cross(&axis));
            let v = velocity[joint.parent] + s * qd;
            drift[joint.child] = drift[joint.parent] + cross_motion(&v, &s) * qd;
            velocity[joint.child] = v;
            joint_axis[j] = axis;
            joint_origin[j] = origin;
            motion[j] = s;
        }

        let mut link_com = Vec::with_capacity(nl);
        let mut link_inertia = Vec::with_capacity(nl);
        let mut spatial_inertia = Vec::with_capacity(nl);
        for (l, link) in model.links.iter().enumerate() {
            let pose = &link_pose[l];
            let c = pose.transform_point(&link.com);
            let ic = pose.rotation * link.inertia * pose.rotation.transpose();
            spatial_inertia.push(spatial::inertia(link.mass, &c, &ic));
            link_com.push(c);
            link_inertia.push(ic);
        }

        Self {
            model,
            base_position: p_b,
            nu: state.nu(),
            link_pose,
            joint_axis,
            joint_origin,
            motion,
            link_com,
            link_inertia,
            spatial_inertia,
            velocity,
            drift,
        }
    }

    pub fn n(&self) -> usize {
        self.model.dof()
    }

    pub fn frame_pose(&self, frame: &str) -> Result<Pose> {
        let (link, offset) = self.model.frame(frame)?;
        Ok(self.link_pose[link].compose(&offset))
    }

    /// Whole-body center of mass.
    pub fn com(&self) -> Vector3<f64> {
        let m = self.model.total_mass();
        self.model.links.iter().zip(&self.link_com).map(|(l, c)| c * l.mass).sum::<Vector3<f64>>() / m
    }

    /// Classical velocity of a world point rigidly attached to `link`.
    pub fn point_velocity(&self, link: usize, p: &Vector3<f64>) -> Vector3<f64> {
        let v = &self.velocity[link];
        lin(v) + ang(v).cross(p)
    }

    /// 6x(n+6) Jacobian of a point `p` on `link`: rows are (linear velocity of
    /// `p`, angular velocity of the link).
    pub fn point_jacobian(&self, link: usize, p: &Vector3<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut jac = DMatrix::zeros(6, n + 6);
        jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        jac.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&(p - self.base_position))));
        jac.fixed_view_mut::<3, 3>(3, 3).copy_from(&Matrix3::identity());
        for &j in self.model.support(link) {
            let a = self.joint_axis[j];
            let col = a.cross(&(p - self.joint_origin[j]));
            jac.fixed_view_mut::<3, 1>(0, 6 + j).copy_from(&col);
            jac.fixed_view_mut::<3, 1>(3, 6 + j).copy_from(&a);
        }
        jac
    }

    /// Mixed-velocity Jacobian of a named frame.
    pub fn frame_jacobian(&self, frame: &str) -> Result<DMatrix<f64>> {
        let (link, _) = self.model.frame(frame)?;
        let pose = self.frame_pose(frame)?;
        Ok(self.point_jacobian(link, &pose.translation))
    }

    /// Drift acceleration `Jdot * nu` of a point on `link`.
    pub fn point_drift(&self, link: usize, p: &Vector3<f64>) -> DVector<f64> {
        let v = &self.velocity[link];
        let a = &self.drift[link];
        let w = ang(v);
        let pd = lin(v) + w.cross(p);
        let pdd = lin(a) + ang(a).cross(p) + w.cross(&pd);
        let wd = ang(a);
        DVector::from_column_slice(&[pdd.x, pdd.y, pdd.z, wd.x, wd.y, wd.z])
    }

    pub fn frame_drift(&self, frame: &str) -> Result<DVector<f64>> {
        let (link, _) = self.model.frame(frame)?;
        let pose = self.frame_pose(frame)?;
        Ok(self.point_drift(link, &pose.translation))
    }

    /// Composite-rigid-body mass matrix, ordered `(base linear, base angular, joints)`.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let model = self.model;
        let n = self.n();
        let mut composite = self.spatial_inertia.clone();
        for &j in model.joint_order().iter().rev() {
            let joint = &model.joints[j];
            let child = composite[joint.child];
            composite[joint.parent] += child;
        }
        let x = spatial::base_map(&self.base_position);
        let mut m = DMatrix::zeros(n + 6, n + 6);
        let mb = x.transpose() * composite[model.base] * x;
        m.fixed_view_mut::<6, 6>(0, 0).copy_from(&mb);
        for j in 0..n {
            let child = model.joints[j].child;
            let f = composite[child] * self.motion[j];
            m[(6 + j, 6 + j)] = self.motion[j].dot(&f);
            let support = model.support(child);
            for &k in &support[..support.len() - 1] {
                let v = self.motion[k].dot(&f);
                m[(6 + j, 6 + k)] = v;
                m[(6 + k, 6 + j)] = v;
            }
            let fb = x.transpose() * f;
            m.fixed_view_mut::<6, 1>(0, 6 + j).copy_from(&fb);
            m.fixed_view_mut::<1, 6>(6 + j, 0).copy_from(&fb.transpose());
        }
        m
    }

    /// Recursive Newton-Euler inverse dynamics
    /// `M(q) nudot + C(q, nu) nu + G(q)` with optional velocity and gravity terms.
    pub fn inverse_dynamics(&self, nu_dot: &DVector<f64>, with_velocity: bool, with_gravity: bool) -> DVector<f64> {
        let model = self.model;
        let n = self.n();
        assert_eq!(nu_dot.len(), n + 6);
        let nl = model.links.len();
        let x = spatial::base_map(&self.base_position);
        let base_acc: Vector6<f64> = x * nu_dot.fixed_rows::<6>(0);

        let mut acc = vec![Vector6::zeros(); nl];
        acc[model.base] = base_acc;
        if with_velocity {
            acc[model.base] += self.drift[model.base];
        }
        if with_gravity {
            acc[model.base][5] += GRAVITY;
        }
        for &j in model.joint_order() {
            let joint = &model.joints[j];
            let mut a = acc[joint.parent] + self.motion[j] * nu_dot[6 + j];
            if with_velocity {
                a += self.drift[joint.child] - self.drift[joint.parent];
            }
            acc[joint.child] = a;
        }

        let mut force: Vec<Vector6<f64>> = (0..nl)
            .map(|l| {
                let i = &self.spatial_inertia[l];
                let mut f = i * acc[l];
                if with_velocity {
                    let v = &self.velocity[l];
                    f += cross_force(v, &(i * v));
                }
                f
            })
            .collect();

        let mut out = DVector::zeros(n + 6);
        for &j in model.joint_order().iter().rev() {
            let joint = &model.joints[j];
            out[6 + j] = self.motion[j].dot(&force[joint.child]);
            let fc = force[joint.child];
            force[joint.parent] += fc;
        }
        let fb = x.transpose() * force[model.base];
        out.fixed_rows_mut::<6>(0).copy_from(&fb);
        out
    }

    /// `h = C(q, nu) nu + G(q)`.
    pub fn bias_forces(&self) -> DVector<f64> {
        self.inverse_dynamics(&DVector::zeros(self.n() + 6), true, true)
    }

    /// `G(q)`.
    pub fn gravity_forces(&self) -> DVector<f64> {
        self.inverse_dynamics(&DVector::zeros(self.n() + 6), false, true)
    }

    /// Rate of change of total ground-coordinate spatial momentum at zero
    /// generalized acceleration, without gravity.
    pub fn momentum_drift(&self) -> Vector6<f64> {
        (0..self.model.links.len())
            .map(|l| {
                let i = &self.spatial_inertia[l];
                let v = &self.velocity[l];
                i * self.drift[l] + cross_force(v, &(i * v))
            })
            .sum()
    }

    /// Kinetic plus gravitational potential energy.
    pub fn total_energy(&self) -> f64 {
        let m = self.mass_matrix();
        0.5 * self.nu.dot(&(m * &self.nu)) + self.model.total_mass() * GRAVITY * self.com().z
    }
}

/// World poses of every link and named frame.
pub fn forward_kinematics(model: &RobotModel, state: &RobotState) -> Result<BTreeMap<String, Pose>> {
    let kin = Kinematics::new(model, state)?;
    let mut out = BTreeMap::new();
    for (l, link) in model.links.iter().enumerate() {
        out.insert(link.name.clone(), kin.link_pose[l]);
    }
    for f in &model.frames {
        out.insert(f.name.clone(), kin.link_pose[f.link].compose(&f.offset));
    }
    Ok(out)
}

pub fn frame_jacobian(model: &RobotModel, state: &RobotState, frame: &str) -> Result<DMatrix<f64>> {
    Kinematics::new(model, state)?.frame_jacobian(frame)
}

pub fn jacobian_dot_nu(model: &RobotModel, state: &RobotState, frame: &str) -> Result<DVector<f64>> {
    Kinematics::new(model, state)?.frame_drift(frame)
}

pub fn mass_matrix(model: &RobotModel, state: &RobotState) -> Result<DMatrix<f64>> {
    Ok(Kinematics::new(model, state)?.mass_matrix())
}

pub fn bias_forces(model: &RobotModel, state: &RobotState) -> Result<DVector<f64>> {
    Ok(Kinematics::new(model, state)?.bias_forces())
}

pub fn gravity_forces(model: &RobotModel, state: &RobotState) -> Result<DVector<f64>> {
    Ok(Kinematics::new(model, state)?.gravity_forces())
}

pub fn inverse_dynamics(model: &RobotModel, state: &RobotState, nu_dot: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(Kinematics::new(model, state)?.inverse_dynamics(nu_dot, true, true))
}

pub fn total_energy(model: &RobotModel, state: &RobotState) -> Result<f64> {
    Ok(Kinematics::new(model, state)?.total_energy())
}
