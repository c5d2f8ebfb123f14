//! Scenario files: TOML descriptions of a closed-loop experiment.
//!
//! ```toml
//! model = "../crates/core/models/pendulum_foot.json"
//! contact = "one_foot"
//! controller = "modified"
//! duration = 10.0
//!
//! [gains]
//! kp = 2.0
//! ki = 4.0
//! posture_kp = { diagonal = [40, 40, 40, 40, 40, 40, 40] }
//! posture_kd = 10.0
//!
//! [reference]
//! type = "hold"
//! ```
//!
//! Relative model paths are resolved against the scenario file's directory.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Matrix6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centroidal::anchored_state;
use crate::control::{BalanceController, FrictionCone, GainMode, GainSet, Reference, ReferenceKind};
use crate::error::{Error, Result};
use crate::math::pinv;
use crate::multibody::{Kinematics, Pose, RobotModel, RobotState};
use crate::sim::{ContactSetup, SimOptions, DEFAULT_DT, DEFAULT_K_POS, DEFAULT_K_VEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactMode {
    OneFoot,
    TwoFeet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Classical,
    Modified,
    TwoFeetQp,
}

/// A gain matrix: `k` (k times identity), `{ diagonal = [...] }`, or the
/// full matrix as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal { diagonal: Vec<f64> },
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn to_matrix(&self, size: usize, what: &str) -> Result<DMatrix<f64>> {
        let m = match self {
            MatrixSpec::Scalar(k) => DMatrix::identity(size, size) * *k,
            MatrixSpec::Diagonal { diagonal } => {
                if diagonal.len() != size {
                    return Err(Error::Config(format!(
                        "{what}: diagonal has {} entries, expected {size}",
                        diagonal.len()
                    )));
                }
                DMatrix::from_diagonal(&DVector::from_column_slice(diagonal))
            }
            MatrixSpec::Rows(rows) => {
                if rows.len() != size || rows.iter().any(|r| r.len() != size) {
                    return Err(Error::Config(format!("{what}: expected a {size}x{size} matrix")));
                }
                DMatrix::from_fn(size, size, |i, j| rows[i][j])
            }
        };
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("{what}: non-finite entry")));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub kp: MatrixSpec,
    /// In classical mode a scalar `k` means `blockdiag(k I, 0)`.
    pub ki: MatrixSpec,
    pub posture_kp: MatrixSpec,
    pub posture_kd: MatrixSpec,
    /// Postural law used by the two-feet controller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<GainMode>,
}

/// Joint-angle offset from the nominal posture at `t = 0`: an explicit
/// vector, or a magnitude for uniform random offsets drawn from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Perturbation {
    Magnitude(f64),
    Offsets(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baumgarte {
    #[serde(default = "default_k_pos")]
    pub k_pos: f64,
    #[serde(default = "default_k_vel")]
    pub k_vel: f64,
}

impl Default for Baumgarte {
    fn default() -> Self {
        Self { k_pos: DEFAULT_K_POS, k_vel: DEFAULT_K_VEL }
    }
}

fn default_k_pos() -> f64 {
    DEFAULT_K_POS
}

fn default_k_vel() -> f64 {
    DEFAULT_K_VEL
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_log_interval() -> f64 {
    0.01
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: PathBuf,
    pub contact: ContactMode,
    pub controller: ControllerMode,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_log_interval")]
    pub log_interval: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub seed: u64,
    /// Support frames; defaults to the first one or two frames of the model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub supports: Vec<String>,
    /// Nominal joint posture, also the postural reference. Zero if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posture: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    pub gains: GainsConfig,
    pub reference: ReferenceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<FrictionCone>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub baumgarte: Baumgarte,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields serialize")
    }

    /// Reads a scenario file and resolves its model path against the
    /// file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if config.model.is_relative() {
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            config.model = dir.join(&config.model);
        }
        Ok(config)
    }

    /// Checks that do not need the model.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be nonnegative, got {}", self.duration)));
        }
        if !(self.log_interval >= 0.0 && self.log_interval.is_finite()) {
            return Err(Error::Config(format!("log_interval must be nonnegative, got {}", self.log_interval)));
        }
        if let ReferenceKind::ComSine { axis, amplitude, frequency } = &self.reference {
            if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                return Err(Error::Config(format!("amplitude must be nonnegative, got {amplitude}")));
            }
            if !(*frequency >= 0.0 && frequency.is_finite()) {
                return Err(Error::Config(format!("frequency must be nonnegative, got {frequency}")));
            }
            let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Config("reference axis must be a nonzero vector".into()));
            }
        }
        match (self.contact, self.controller) {
            (ContactMode::OneFoot, ControllerMode::Classical | ControllerMode::Modified)
            | (ContactMode::TwoFeet, ControllerMode::TwoFeetQp) => {}
            (c, m) => return Err(Error::Config(format!("controller {m:?} is not available with contact {c:?}"))),
        }
        let expected = match self.contact {
            ContactMode::OneFoot => 1,
            ContactMode::TwoFeet => 2,
        };
        if !self.supports.is_empty() && self.supports.len() != expected {
            return Err(Error::Config(format!(
                "{:?} needs {expected} support frames, got {}",
                self.contact,
                self.supports.len()
            )));
        }
        if !(self.baumgarte.k_pos >= 0.0 && self.baumgarte.k_vel >= 0.0) {
            return Err(Error::Config("Baumgarte gains must be nonnegative".into()));
        }
        match &self.perturbation {
            Some(Perturbation::Magnitude(m)) if !(*m >= 0.0 && m.is_finite()) => {
                return Err(Error::Config(format!("perturbation magnitude must be nonnegative, got {m}")));
            }
            Some(Perturbation::Offsets(v)) if v.iter().any(|x| !x.is_finite()) => {
                return Err(Error::Config("perturbation offsets must be finite".into()));
            }
            _ => {}
        }
        if let Some(f) = &self.friction {
            crate::control::friction_cone(f)?;
        }
        Ok(())
    }

    pub fn load_model(&self) -> Result<RobotModel> {
        if !self.model.exists() {
            return Err(Error::Config(format!("model file not found: {}", self.model.display())));
        }
        RobotModel::from_path(&self.model)
    }

    pub fn options(&self) -> SimOptions {
        SimOptions { dt: self.dt, duration: self.duration, log_interval: self.log_interval }
    }

    pub fn gain_mode(&self) -> GainMode {
        match self.controller {
            ControllerMode::Classical => GainMode::Classical,
            ControllerMode::Modified => GainMode::Modified,
            ControllerMode::TwoFeetQp => self.gains.mode.unwrap_or(GainMode::Classical),
        }
    }

    pub fn gains(&self, n: usize) -> Result<GainSet> {
        let mode = self.gain_mode();
        let six = |spec: &MatrixSpec, what: &str| -> Result<Matrix6<f64>> {
            let m = spec.to_matrix(6, what)?;
            Ok(Matrix6::from_fn(|i, j| m[(i, j)]))
        };
        let kp = six(&self.gains.kp, "kp")?;
        let ki = match (&self.gains.ki, mode) {
            (MatrixSpec::Scalar(k), GainMode::Classical) => GainSet::classical_ki(*k),
            (spec, _) => six(spec, "ki")?,
        };
        GainSet::new(
            kp,
            ki,
            self.gains.posture_kp.to_matrix(n, "posture_kp")?,
            self.gains.posture_kd.to_matrix(n, "posture_kd")?,
            mode,
        )
    }

    pub fn supports(&self, model: &RobotModel) -> Result<Vec<String>> {
        let count = match self.contact {
            ContactMode::OneFoot => 1,
            ContactMode::TwoFeet => 2,
        };
        let supports: Vec<String> = if self.supports.is_empty() {
            model.frames.iter().take(count).map(|f| f.name.clone()).collect()
        } else {
            self.supports.clone()
        };
        if supports.len() != count {
            return Err(Error::Config(format!("model {} has fewer than {count} frames to stand on", model.name)));
        }
        for s in &supports {
            model.frame(s)?;
        }
        Ok(supports)
    }

    pub fn posture(&self, model: &RobotModel) -> Result<DVector<f64>> {
        match &self.posture {
            None => Ok(DVector::zeros(model.dof())),
            Some(q) if q.len() == model.dof() => Ok(DVector::from_column_slice(q)),
            Some(q) => Err(Error::Config(format!("posture has {} entries, model has {} joints", q.len(), model.dof()))),
        }
    }

    /// Joint offsets applied at `t = 0`.
    pub fn offsets(&self, n: usize) -> Result<DVector<f64>> {
        match &self.perturbation {
            None => Ok(DVector::zeros(n)),
            Some(Perturbation::Offsets(v)) if v.len() == n => Ok(DVector::from_column_slice(v)),
            Some(Perturbation::Offsets(v)) => {
                Err(Error::Config(format!("perturbation has {} entries, model has {n} joints", v.len())))
            }
            Some(Perturbation::Magnitude(m)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok(DVector::from_fn(n, |_, _| if *m > 0.0 { rng.random_range(-*m..*m) } else { 0.0 }))
            }
        }
    }
}

/// Ground pose of the first support sole.
pub fn ground_anchor() -> Pose {
    Pose::identity()
}

/// Max iterations of the loop-closure projection.
const CLOSURE_ITERATIONS: usize = 50;

/// Adjusts `q` (minimum-norm Gauss-Newton steps) so that every support
/// after the first returns to the pose it has at `nominal`, with the first
/// support anchored on the ground.
pub fn close_supports(
    model: &RobotModel,
    supports: &[String],
    nominal: &DVector<f64>,
    q: &DVector<f64>,
) -> Result<DVector<f64>> {
    if supports.len() < 2 {
        return Ok(q.clone());
    }
    let anchor = ground_anchor();
    let poses = |q: &DVector<f64>| -> Result<Vec<Pose>> {
        let s = anchored_state(model, &supports[0], &anchor, q, None)?;
        let kin = Kinematics::new(model, &s)?;
        supports[1..].iter().map(|f| kin.frame_pose(f)).collect()
    };
    let target = poses(nominal)?;
    let error = |q: &DVector<f64>| -> Result<DVector<f64>> {
        let current = poses(q)?;
        let mut e = DVector::zeros(6 * current.len());
        for (k, (p, t)) in current.iter().zip(&target).enumerate() {
            e.fixed_rows_mut::<3>(6 * k).copy_from(&(p.translation - t.translation));
            let r = crate::math::rotation_log(&(p.rotation * t.rotation.transpose()));
            e.fixed_rows_mut::<3>(6 * k + 3).copy_from(&r);
        }
        Ok(e)
    };
    let n = q.len();
    let mut q = q.clone();
    for _ in 0..CLOSURE_ITERATIONS {
        let e = error(&q)?;
        if e.norm() < 1e-12 {
            return Ok(q);
        }
        let h = 1e-7;
        let mut jac = DMatrix::zeros(e.len(), n);
        for i in 0..n {
            let mut qp = q.clone();
            qp[i] += h;
            let mut qm = q.clone();
            qm[i] -= h;
            jac.set_column(i, &((error(&qp)? - error(&qm)?) / (2.0 * h)));
        }
        q -= pinv(&jac).0 * e;
    }
    let e = error(&q)?.norm();
    if e < 1e-10 {
        Ok(q)
    } else {
        Err(Error::Config(format!("cannot close the support loop, residual {e:.3e}")))
    }
}

/// Everything needed to run a scenario, derived from the config.
#[derive(Debug, Clone)]
pub struct ScenarioSetup {
    pub supports: Vec<String>,
    pub gains: GainSet,
    /// Reference posture, anchored, at rest.
    pub nominal: RobotState,
    /// Perturbed start, anchored, at rest.
    pub initial: RobotState,
    pub reference: Reference,
    pub cone: FrictionCone,
}

impl ScenarioSetup {
    pub fn new(model: &RobotModel, config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let n = model.dof();
        let supports = config.supports(model)?;
        let gains = config.gains(n)?;
        let q_des = config.posture(model)?;
        let anchor = ground_anchor();
        let nominal = anchored_state(model, &supports[0], &anchor, &q_des, None)?;
        let q0 = close_supports(model, &supports, &q_des, &(&q_des + config.offsets(n)?))?;
        let initial = anchored_state(model, &supports[0], &anchor, &q0, None)?;
        let com = Kinematics::new(model, &nominal)?.com();
        let reference = Reference::new(config.reference.clone(), com, model.total_mass(), q_des);
        let cone = config.friction.unwrap_or(match config.contact {
            ContactMode::OneFoot => FrictionCone::unbounded(),
            ContactMode::TwoFeet => FrictionCone::default(),
        });
        Ok(Self { supports, gains, nominal, initial, reference, cone })
    }

    pub fn controller<'a>(&self, model: &'a RobotModel) -> Result<BalanceController<'a>> {
        BalanceController::new(
            model,
            self.gains.clone(),
            self.reference.clone(),
            self.supports.clone(),
            self.cone,
            &self.nominal,
        )
    }

    /// Supports held at their poses in the nominal posture.
    pub fn contact(&self, model: &RobotModel, config: &ScenarioConfig) -> Result<ContactSetup> {
        ContactSetup::capture(model, &self.nominal, &self.supports, config.baumgarte.k_pos, config.baumgarte.k_vel)
    }
}
