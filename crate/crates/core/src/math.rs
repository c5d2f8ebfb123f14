//! Small dense linear-algebra helpers shared by the dynamics and control code.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, SymmetricEigen, Vector3};

/// Relative singular-value cutoff used for every pseudoinverse in the crate.
pub const PINV_RCOND: f64 = 1e-10;

/// Skew-symmetric matrix with `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Roll-pitch-yaw (fixed-axis x, y, z) to a rotation matrix, `Rz(y) Ry(p) Rx(r)`.
pub fn rpy_rotation(rpy: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::from_euler_angles(rpy.x, rpy.y, rpy.z).into_inner()
}

/// Rotation about a unit axis.
pub fn axis_rotation(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = skew(axis);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Rotation vector `phi` with `exp(S(phi)) == r`.
///
/// Uses `atan2` on the skew and trace parts so that small rotations keep
/// full relative precision.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let v = 0.5 * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let s = v.norm();
    let c = 0.5 * (r.trace() - 1.0);
    if c < 0.0 && s < 1e-6 {
        return Rotation3::from_matrix_unchecked(*r).scaled_axis();
    }
    if s < 1e-300 {
        return Vector3::zeros();
    }
    v * (s.atan2(c) / s)
}

/// Rotation matrix `exp(S(phi))`.
pub fn rotation_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*phi).into_inner()
}

/// Moore-Penrose pseudoinverse with relative cutoff [`PINV_RCOND`]; returns the
/// pseudoinverse together with the numerical rank.
pub fn pinv(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return (DMatrix::zeros(c, r), 0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = PINV_RCOND * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(c, r);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            out += (vt.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    (out, rank)
}

/// Numerical rank with the crate-wide relative cutoff.
pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = a.clone().singular_values();
    let cutoff = PINV_RCOND * s.max();
    s.iter().filter(|&&x| x > cutoff && x > 0.0).count()
}

/// 2-norm condition number.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = a.clone().singular_values();
    let min = s.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        s.max() / min
    }
}

/// `(a + a^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Extreme eigenvalues `(min, max)` of the symmetric part of `a`.
pub fn sym_eig_range(a: &DMatrix<f64>) -> (f64, f64) {
    if a.is_empty() {
        return (0.0, 0.0);
    }
    let e = SymmetricEigen::new(symmetrize(a)).eigenvalues;
    (e.min(), e.max())
}

/// Symmetric within `tol` (relative to the largest entry) and positive definite.
pub fn is_spd(a: &DMatrix<f64>, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > tol * scale {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    sym_eig_range(a).0 > 0.0
}

/// Symmetric and positive semidefinite within `tol`.
pub fn is_spsd(a: &DMatrix<f64>, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > tol * scale {
        return false;
    }
    a.is_empty() || sym_eig_range(a).0 >= -tol * scale
}

/// Stack two matrices with the same column count.
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Block-diagonal concatenation.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Concatenate two vectors.
pub fn vconcat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// Largest absolute difference between two equally sized matrices,
/// divided by `max(1, |b|_max)`.
pub fn rel_max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}
