use nalgebra::{DMatrix, Matrix3, Matrix6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{is_spd, is_spsd};

/// Which integral law and postural gains the controller uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// Integral of the momentum error, zero angular integral gain, constant
    /// postural gains.
    Classical,
    /// Integral of the constrained momentum map with the angular part frozen
    /// at the postural reference, positive definite integral gain, and
    /// postural gains shaped by the null-space projector.
    Modified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub kp: Matrix6<f64>,
    pub ki: Matrix6<f64>,
    /// Postural stiffness and damping. In classical mode these multiply the
    /// joint error directly; in modified mode they are the constant factors
    /// in front of `N M_j`.
    pub posture_kp: DMatrix<f64>,
    pub posture_kd: DMatrix<f64>,
    pub mode: GainMode,
}

const SYM_TOL: f64 = 1e-12;

fn dyn6(m: &Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(6, 6, m.as_slice())
}

impl GainSet {
    pub fn new(
        kp: Matrix6<f64>,
        ki: Matrix6<f64>,
        posture_kp: DMatrix<f64>,
        posture_kd: DMatrix<f64>,
        mode: GainMode,
    ) -> Result<Self> {
        let g = Self { kp, ki, posture_kp, posture_kd, mode };
        g.validate()?;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.posture_kp.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidGains(m));
        if !is_spd(&dyn6(&self.kp), SYM_TOL) {
            return fail("momentum gain kp must be symmetric positive definite".into());
        }
        let ki = dyn6(&self.ki);
        match self.mode {
            GainMode::Classical => {
                let ang: Matrix3<f64> = self.ki.fixed_view::<3, 3>(3, 3).into_owned();
                let off: Matrix3<f64> = self.ki.fixed_view::<3, 3>(0, 3).into_owned();
                let off2: Matrix3<f64> = self.ki.fixed_view::<3, 3>(3, 0).into_owned();
                if ang.amax() != 0.0 || off.amax() != 0.0 || off2.amax() != 0.0 {
                    return fail("classical mode requires a purely linear integral gain".into());
                }
                let lin = ki.view((0, 0), (3, 3)).into_owned();
                if !is_spsd(&lin, SYM_TOL) {
                    return fail("linear integral gain must be symmetric positive semidefinite".into());
                }
            }
            GainMode::Modified => {
                if !is_spd(&ki, SYM_TOL) {
                    return fail("modified mode requires a symmetric positive definite integral gain".into());
                }
            }
        }
        let n = self.posture_kp.nrows();
        if self.posture_kp.shape() != (n, n) || self.posture_kd.shape() != (n, n) {
            return fail(format!(
                "postural gains must be square and equal sized, got {:?} and {:?}",
                self.posture_kp.shape(),
                self.posture_kd.shape()
            ));
        }
        if !is_spd(&self.posture_kp, SYM_TOL) || !is_spd(&self.posture_kd, SYM_TOL) {
            return fail("postural gains must be symmetric positive definite".into());
        }
        Ok(())
    }

    /// Classical integral gain `blockdiag(k 1_3, 0)`.
    pub fn classical_ki(k: f64) -> Matrix6<f64> {
        let mut ki = Matrix6::zeros();
        ki.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * k));
        ki
    }
}
