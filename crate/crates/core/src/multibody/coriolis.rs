//! Explicit Coriolis matrix from Christoffel symbols.
//!
//! The configuration is parametrized locally by `delta = (dp, dtheta, dq)`
//! with `R = exp(S(dtheta)) R_B`. In these coordinates the generalized
//! velocity is `nu = E(delta) delta_dot` with `E = blockdiag(1, J_l(dtheta), 1)`
//! and `J_l` the left Jacobian of SO(3), so the Lagrangian mass matrix is
//! `E^T M E`. Its Christoffel symbols give a valid `C~`; subtracting
//! `M Edot` (which annihilates `nu`) yields a `C` with `Mdot - 2C` skew.

use nalgebra::{DMatrix, DVector};

use super::kinematics::Kinematics;
use super::model::RobotModel;
use super::state::RobotState;
use crate::error::Result;
use crate::math::skew;

/// Central-difference step on the configuration.
pub const CORIOLIS_FD_STEP: f64 = 1e-5;

/// Partial derivatives `dM/d delta_k` at `delta = 0` by central differences.
pub fn mass_matrix_derivatives(model: &RobotModel, state: &RobotState) -> Vec<DMatrix<f64>> {
    let nv = model.nv();
    let h = CORIOLIS_FD_STEP;
    (0..nv)
        .map(|k| {
            let mut d = DVector::zeros(nv);
            d[k] = h;
            let plus = Kinematics::new_unchecked(model, &state.displaced(&d)).mass_matrix();
            let minus = Kinematics::new_unchecked(model, &state.displaced(&(-d))).mass_matrix();
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

fn rotation_block(nv: usize, w: &nalgebra::Vector3<f64>) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(nv, nv);
    e.fixed_view_mut::<3, 3>(3, 3).copy_from(&skew(w));
    e
}

/// Coriolis matrix `C(q, nu)` with `C nu + G = h` and `Mdot - 2C` skew-symmetric.
pub fn coriolis_matrix(model: &RobotModel, state: &RobotState) -> Result<DMatrix<f64>> {
    state.validate(model)?;
    let nv = model.nv();
    let nu = state.nu();
    let m = Kinematics::new(model, state)?.mass_matrix();
    let mut dm = mass_matrix_derivatives(model, state);
    for (axis, d) in dm.iter_mut().enumerate().skip(3).take(3) {
        let mut e = nalgebra::Vector3::zeros();
        e[axis - 3] = 1.0;
        let ek = rotation_block(nv, &e) * 0.5;
        *d += ek.transpose() * &m + &m * ek;
    }
    let mut c = DMatrix::zeros(nv, nv);
    for i in 0..nv {
        for j in 0..nv {
            let mut s = 0.0;
            for k in 0..nv {
                s += 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * nu[k];
            }
            c[(i, j)] = s;
        }
    }
    let w = state.base_angular_velocity;
    let edot = rotation_block(nv, &w) * 0.5;
    Ok(c - &m * edot)
}

/// Partition of `C` into `(C_b, C_bj, C_jb, C_j)`.
pub fn partition(c: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = c.nrows() - 6;
    (
        c.view((0, 0), (6, 6)).into_owned(),
        c.view((0, 6), (6, n)).into_owned(),
        c.view((6, 0), (n, 6)).into_owned(),
        c.view((6, 6), (n, n)).into_owned(),
    )
}
