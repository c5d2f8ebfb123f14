//! Plücker vectors in ground coordinates: everything is expressed in the
//! inertial frame about the inertial origin, ordered `(angular; linear)`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::math::skew;

pub(crate) fn ang(v: &Vector6<f64>) -> Vector3<f64> {
    v.fixed_rows::<3>(0).into_owned()
}

pub(crate) fn lin(v: &Vector6<f64>) -> Vector3<f64> {
    v.fixed_rows::<3>(3).into_owned()
}

pub(crate) fn join(a: &Vector3<f64>, l: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(a.x, a.y, a.z, l.x, l.y, l.z)
}

/// Motion cross product `v x w`.
pub(crate) fn cross_motion(v: &Vector6<f64>, w: &Vector6<f64>) -> Vector6<f64> {
    let (wv, vv) = (ang(v), lin(v));
    let (ww, vw) = (ang(w), lin(w));
    join(&wv.cross(&ww), &(wv.cross(&vw) + vv.cross(&ww)))
}

/// Force cross product `v x* f`.
pub(crate) fn cross_force(v: &Vector6<f64>, f: &Vector6<f64>) -> Vector6<f64> {
    let (wv, vv) = (ang(v), lin(v));
    let (n, fl) = (ang(f), lin(f));
    join(&(wv.cross(&n) + vv.cross(&fl)), &wv.cross(&fl))
}

/// Spatial inertia about the ground origin of a body with mass `m`, CoM `c`
/// and rotational inertia `ic` about the CoM (all inertial-frame).
pub(crate) fn inertia(m: f64, c: &Vector3<f64>, ic: &Matrix3<f64>) -> Matrix6<f64> {
    let s = skew(c);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(ic + m * s * s.transpose()));
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(m * s));
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(m * s.transpose()));
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&(m * Matrix3::identity()));
    out
}

/// Map from the mixed base velocity `(pdot_B, omega_B)` to the base spatial
/// velocity `(omega, v_O)` where `v_O = pdot_B + p_B x omega`.
pub(crate) fn base_map(p_base: &Vector3<f64>) -> Matrix6<f64> {
    let mut x = Matrix6::zeros();
    x.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    x.fixed_view_mut::<3, 3>(3, 0).copy_from(&Matrix3::identity());
    x.fixed_view_mut::<3, 3>(3, 3).copy_from(&skew(p_base));
    x
}
