use nalgebra::{DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

/// Shape of the desired center-of-mass motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Keep the CoM where it starts; zero desired momentum.
    Hold,
    /// `x_c^d(t) = x_c(0) + amplitude sin(2 pi frequency t) axis`.
    ComSine {
        #[serde(default = "default_axis")]
        axis: [f64; 3],
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_frequency")]
        frequency: f64,
    },
}

pub fn default_axis() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

pub fn default_amplitude() -> f64 {
    0.05
}

pub fn default_frequency() -> f64 {
    0.3
}

/// Desired CoM trajectory, momentum and joint posture.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub kind: ReferenceKind,
    pub com0: Vector3<f64>,
    pub mass: f64,
    pub q_des: DVector<f64>,
}

/// Reference evaluated at one time instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub com: Vector3<f64>,
    pub com_vel: Vector3<f64>,
    pub com_acc: Vector3<f64>,
    pub momentum: Vector6<f64>,
    pub momentum_rate: Vector6<f64>,
}

impl Reference {
    pub fn new(kind: ReferenceKind, com0: Vector3<f64>, mass: f64, q_des: DVector<f64>) -> Self {
        Self { kind, com0, mass, q_des }
    }

    pub fn sample(&self, t: f64) -> ReferenceSample {
        let (com, com_vel, com_acc) = match &self.kind {
            ReferenceKind::Hold => (self.com0, Vector3::zeros(), Vector3::zeros()),
            ReferenceKind::ComSine { axis, amplitude, frequency } => {
                let a = Vector3::from_column_slice(axis);
                let a = if a.norm() > 0.0 { a.normalize() } else { a };
                let w = 2.0 * std::f64::consts::PI * frequency;
                let (s, c) = (w * t).sin_cos();
                (self.com0 + a * (amplitude * s), a * (amplitude * w * c), a * (-amplitude * w * w * s))
            }
        };
        let mut momentum = Vector6::zeros();
        momentum.fixed_rows_mut::<3>(0).copy_from(&(com_vel * self.mass));
        let mut momentum_rate = Vector6::zeros();
        momentum_rate.fixed_rows_mut::<3>(0).copy_from(&(com_acc * self.mass));
        ReferenceSample { com, com_vel, com_acc, momentum, momentum_rate }
    }

    /// True when the desired momentum is identically zero.
    pub fn is_hold(&self) -> bool {
        match &self.kind {
            ReferenceKind::Hold => true,
            ReferenceKind::ComSine { amplitude, .. } => *amplitude == 0.0,
        }
    }
}
