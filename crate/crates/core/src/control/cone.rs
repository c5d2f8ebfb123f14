use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows per foot in the linearized contact-wrench cone.
pub const CONE_ROWS: usize = 11;

/// Rectangular-foot contact parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionCone {
    /// Static friction coefficient.
    pub mu: f64,
    /// Half-length of the sole along its x axis (m).
    pub half_length: f64,
    /// Half-width of the sole along its y axis (m).
    pub half_width: f64,
    /// Minimum normal force (N).
    #[serde(default)]
    pub fz_min: f64,
}

impl Default for FrictionCone {
    fn default() -> Self {
        Self { mu: 0.7, half_length: 0.08, half_width: 0.04, fz_min: 0.0 }
    }
}

impl FrictionCone {
    pub fn unbounded() -> Self {
        Self { mu: f64::INFINITY, half_length: f64::INFINITY, half_width: f64::INFINITY, fz_min: f64::NEG_INFINITY }
    }

    pub fn is_unbounded(&self) -> bool {
        self.mu.is_infinite() && self.half_length.is_infinite() && self.half_width.is_infinite()
    }
}

/// Linearized wrench cone `C f <= b` for a wrench `(f_x, f_y, f_z, tau_x,
/// tau_y, tau_z)` expressed in the sole frame about the sole origin.
///
/// Rows: the four friction-pyramid faces, the minimum normal force, the two
/// pairs of center-of-pressure bounds and the yaw-torque pair with
/// coefficient `mu * min(half_length, half_width)`.
pub fn friction_cone(params: &FrictionCone) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let FrictionCone { mu, half_length: l, half_width: w, fz_min } = *params;
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::Config(format!("friction coefficient must be positive, got {mu}")));
    }
    if l.is_nan() || w.is_nan() || l <= 0.0 || w <= 0.0 {
        return Err(Error::Config(format!("foot half-sizes must be positive, got {l} x {w}")));
    }
    if fz_min.is_nan() || fz_min < 0.0 {
        return Err(Error::Config(format!("minimum normal force must be nonnegative, got {fz_min}")));
    }
    let yaw = mu * l.min(w);
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(CONE_ROWS, 6, &[
         1.0,  0.0, -mu,   0.0,  0.0,  0.0,
        -1.0,  0.0, -mu,   0.0,  0.0,  0.0,
         0.0,  1.0, -mu,   0.0,  0.0,  0.0,
         0.0, -1.0, -mu,   0.0,  0.0,  0.0,
         0.0,  0.0, -1.0,  0.0,  0.0,  0.0,
         0.0,  0.0, -w,    1.0,  0.0,  0.0,
         0.0,  0.0, -w,   -1.0,  0.0,  0.0,
         0.0,  0.0, -l,    0.0,  1.0,  0.0,
         0.0,  0.0, -l,    0.0, -1.0,  0.0,
         0.0,  0.0, -yaw,  0.0,  0.0,  1.0,
         0.0,  0.0, -yaw,  0.0,  0.0, -1.0,
    ]);
    let mut b = DVector::zeros(CONE_ROWS);
    b[4] = -fz_min;
    Ok((c, b))
}

/// Cone rows for a wrench given in the inertial frame, for a sole with
/// world orientation `rotation`.
pub fn world_cone(params: &FrictionCone, rotation: &Matrix3<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (c, b) = friction_cone(params)?;
    let mut rt = DMatrix::zeros(6, 6);
    let r = DMatrix::from_column_slice(3, 3, rotation.transpose().as_slice());
    rt.view_mut((0, 0), (3, 3)).copy_from(&r);
    rt.view_mut((3, 3), (3, 3)).copy_from(&r);
    Ok((c * rt, b))
}

/// Indices of violated rows of `C f <= b` beyond `tol`.
pub fn violated_rows(c: &DMatrix<f64>, b: &DVector<f64>, f: &DVector<f64>, tol: f64) -> Vec<usize> {
    let s = c * f - b;
    (0..s.len()).filter(|&i| s[i] > tol).collect()
}
