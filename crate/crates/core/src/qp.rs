//! Dense strictly convex QP solver:
//!
//! ```text
//! minimize    1/2 x' P x + g' x
//! subject to  A_eq x  = b_eq
//!             A_in x <= b_in
//! ```
//!
//! Equalities are removed with an orthonormal null-space basis, then the
//! reduced problem is solved by the Goldfarb-Idnani dual active-set method.
//! The most violated inequality enters the active set; ties go to the lowest
//! index, so repeated solves are bit-for-bit identical.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{pinv, rank};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Residuals of the first-order optimality conditions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KktResiduals {
    /// `|P x + g + A_eq' lambda + A_in' mu|_inf`.
    pub stationarity: f64,
    /// `|A_eq x - b_eq|_inf`.
    pub equality: f64,
    /// `max(0, max_i (A_in x - b_in)_i)`.
    pub inequality: f64,
    /// `max(0, -min_i mu_i)`.
    pub dual: f64,
    /// `max_i |mu_i (A_in x - b_in)_i|`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.equality).max(self.inequality).max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub mu: DVector<f64>,
    /// Active inequality indices in the order they were added.
    pub active: Vec<usize>,
    pub status: QpStatus,
    pub iterations: usize,
    /// Objective value after every active-set change, starting from the
    /// equality-constrained minimizer.
    pub objective_trace: Vec<f64>,
    pub kkt: KktResiduals,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

impl QpProblem {
    /// Problem without constraints.
    pub fn unconstrained(p: DMatrix<f64>, g: DVector<f64>) -> Self {
        let d = g.len();
        Self {
            p,
            g,
            a_eq: DMatrix::zeros(0, d),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, d),
            b_in: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.g.dot(x)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let bad = |what: &str| Err(Error::InvalidState(format!("QP: {what}")));
        if self.p.shape() != (d, d) {
            return bad("Hessian shape does not match gradient");
        }
        if self.a_eq.ncols() != d || self.a_eq.nrows() != self.b_eq.len() {
            return bad("equality block shape mismatch");
        }
        if self.a_in.ncols() != d || self.a_in.nrows() != self.b_in.len() {
            return bad("inequality block shape mismatch");
        }
        if self.a_eq.nrows() > d {
            return bad("more equalities than variables");
        }
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if !finite(self.p.as_slice())
            || !finite(self.g.as_slice())
            || !finite(self.a_eq.as_slice())
            || !finite(self.b_eq.as_slice())
            || !finite(self.a_in.as_slice())
            || !finite(self.b_in.as_slice())
        {
            return bad("non-finite data");
        }
        if d == 0 {
            return Ok(());
        }
        let scale = self.p.amax().max(f64::MIN_POSITIVE);
        if (&self.p - self.p.transpose()).amax() > 1e-10 * scale {
            return bad("Hessian is not symmetric");
        }
        let eig = self.p.clone().symmetric_eigen().eigenvalues;
        if eig.min() <= 1e-12 * eig.max() {
            return bad("Hessian is not positive definite");
        }
        Ok(())
    }

    /// KKT residuals of a candidate primal-dual point.
    pub fn kkt_residuals(&self, x: &DVector<f64>, lambda: &DVector<f64>, mu: &DVector<f64>) -> KktResiduals {
        let grad = &self.p * x + &self.g + self.a_eq.transpose() * lambda + self.a_in.transpose() * mu;
        let slack = &self.a_in * x - &self.b_in;
        KktResiduals {
            stationarity: grad.amax(),
            equality: (&self.a_eq * x - &self.b_eq).amax(),
            inequality: slack.iter().fold(0.0f64, |m, &s| m.max(s)),
            dual: mu.iter().fold(0.0f64, |m, &v| m.max(-v)),
            complementarity: mu.iter().zip(slack.iter()).fold(0.0f64, |m, (a, b)| m.max((a * b).abs())),
        }
    }

    /// Scale used to turn the relative tolerance into absolute thresholds.
    pub fn scale(&self) -> f64 {
        1.0f64.max(self.p.amax()).max(self.g.amax()).max(self.b_eq.amax()).max(self.b_in.amax())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&QpDump::from(self)).expect("plain numeric data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: QpDump = serde_json::from_str(text).map_err(|e| Error::InvalidState(format!("QP dump: {e}")))?;
        dump.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct QpDump {
    p: Vec<Vec<f64>>,
    g: Vec<f64>,
    a_eq: Vec<Vec<f64>>,
    b_eq: Vec<f64>,
    a_in: Vec<Vec<f64>>,
    b_in: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if r.iter().any(|row| row.len() != ncols) {
        return Err(Error::InvalidState("QP dump: ragged matrix".into()));
    }
    Ok(DMatrix::from_fn(r.len(), ncols, |i, j| r[i][j]))
}

impl From<&QpProblem> for QpDump {
    fn from(p: &QpProblem) -> Self {
        Self {
            p: rows(&p.p),
            g: p.g.iter().copied().collect(),
            a_eq: rows(&p.a_eq),
            b_eq: p.b_eq.iter().copied().collect(),
            a_in: rows(&p.a_in),
            b_in: p.b_in.iter().copied().collect(),
        }
    }
}

impl TryFrom<QpDump> for QpProblem {
    type Error = Error;

    fn try_from(d: QpDump) -> Result<Self> {
        let n = d.g.len();
        let problem = QpProblem {
            p: from_rows(&d.p, n)?,
            g: DVector::from_vec(d.g),
            a_eq: from_rows(&d.a_eq, n)?,
            b_eq: DVector::from_vec(d.b_eq),
            a_in: from_rows(&d.a_in, n)?,
            b_in: DVector::from_vec(d.b_in),
        };
        problem.validate()?;
        Ok(problem)
    }
}

/// Minimum-norm correction `x = x0 + A^+ (b - A x0)`, the closest point to
/// `x0` on `{x : A x = b}`.
pub fn solve_equality_ls(a: &DMatrix<f64>, b: &DVector<f64>, x0: &DVector<f64>) -> Result<DVector<f64>> {
    if a.ncols() != x0.len() || a.nrows() != b.len() {
        return Err(Error::InvalidState("least-squares dimensions".into()));
    }
    let (a_pinv, r) = pinv(a);
    let x = x0 + &a_pinv * (b - a * x0);
    if r < a.nrows() {
        let res = (a * &x - b).norm();
        if res > 1e-8 * (1.0 + b.norm()) {
            return Err(Error::Infeasible(format!(
                "rank-deficient equality system (rank {r} of {}) is inconsistent, residual {res:.3e}",
                a.nrows()
            )));
        }
    }
    Ok(x)
}

/// Orthonormal basis of the null space of a full-row-rank `a`.
fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, d) = a.shape();
    let mut aug = DMatrix::zeros(d, m + d);
    aug.columns_mut(0, m).copy_from(&a.transpose());
    aug.columns_mut(m, d).copy_from(&DMatrix::identity(d, d));
    let q = aug.qr().q();
    q.columns(m, d - m).into_owned()
}

pub fn solve(problem: &QpProblem, options: &QpOptions) -> Result<QpSolution> {
    problem.validate()?;
    let d = problem.dim();
    let me = problem.a_eq.nrows();
    let mi = problem.a_in.nrows();
    let tol = options.tol;
    let scale = problem.scale();

    // Equality elimination: x = x_p + Z y.
    let (x_p, z) = if me == 0 {
        (DVector::zeros(d), DMatrix::identity(d, d))
    } else {
        let r = rank(&problem.a_eq);
        if r < me {
            return Err(Error::RankDeficient { what: "QP equality matrix".into(), rank: r, required: me });
        }
        let (a_pinv, _) = pinv(&problem.a_eq);
        let x_p = &a_pinv * &problem.b_eq;
        (x_p, null_space(&problem.a_eq))
    };
    let h = z.transpose() * &problem.p * &z;
    let h = (&h + h.transpose()) * 0.5;
    let c = z.transpose() * (&problem.p * &x_p + &problem.g);
    let ci = &problem.a_in * &z;
    let ei = &problem.b_in - &problem.a_in * &x_p;
    let r = z.ncols();

    let h_inv = if r == 0 {
        DMatrix::zeros(0, 0)
    } else {
        h.clone()
            .cholesky()
            .ok_or_else(|| Error::Singular {
                context: "reduced QP Hessian".into(),
                detail: "not positive definite".into(),
            })?
            .inverse()
    };

    let mut y = -(&h_inv * &c);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let objective_of = |y: &DVector<f64>| problem.objective(&(&x_p + &z * y));
    let mut trace = vec![objective_of(&y)];
    let feas_tol = |i: usize| tol * scale.max(ei[i].abs());
    let mut status = QpStatus::Optimal;

    'outer: loop {
        let slack = &ci * &y - &ei;
        let mut p = None;
        let mut worst = 0.0;
        for i in 0..mi {
            if active.contains(&i) {
                continue;
            }
            if slack[i] > feas_tol(i) && slack[i] > worst {
                worst = slack[i];
                p = Some(i);
            }
        }
        let Some(p) = p else { break };

        let n_p: DVector<f64> = -ci.row(p).transpose();
        let mut u_p = 0.0;
        loop {
            iterations += 1;
            if iterations > options.max_iter {
                status = QpStatus::MaxIter;
                break 'outer;
            }
            let q = active.len();
            let (step, dual_dir) = if q == 0 {
                (&h_inv * &n_p, DVector::zeros(0))
            } else {
                let mut nmat = DMatrix::zeros(r, q);
                for (k, &i) in active.iter().enumerate() {
                    nmat.set_column(k, &(-ci.row(i).transpose()));
                }
                let hn = &h_inv * &nmat;
                let w = nmat.transpose() * &hn;
                let w_chol = w.cholesky().ok_or_else(|| Error::Singular {
                    context: "QP active-set normal matrix".into(),
                    detail: format!("{q} active constraints"),
                })?;
                let dual_dir = w_chol.solve(&(hn.transpose() * &n_p));
                let step = &h_inv * &n_p - &hn * &dual_dir;
                (step, dual_dir)
            };

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for k in 0..q {
                if dual_dir[k] > 1e-14 {
                    let ratio = u[k] / dual_dir[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(k);
                    }
                }
            }
            let curvature = step.dot(&n_p);
            let violation = -(n_p.dot(&y)) - ei[p];
            let t2 = if step.norm() > 1e-14 * (1.0 + n_p.norm()) && curvature > 0.0 {
                violation / curvature
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                status = QpStatus::Infeasible;
                break 'outer;
            }
            for k in 0..q {
                u[k] -= t * dual_dir[k];
            }
            u_p += t;
            if t2.is_finite() {
                y += &step * t;
                trace.push(objective_of(&y));
            }
            if t2 <= t1 {
                active.push(p);
                u.push(u_p);
                break;
            }
            let k = drop.expect("finite dual step has a blocking constraint");
            active.remove(k);
            u.remove(k);
        }
    }

    let x = &x_p + &z * &y;
    let mut mu = DVector::zeros(mi);
    for (k, &i) in active.iter().enumerate() {
        mu[i] = u[k].max(0.0);
    }
    let lambda = if me == 0 {
        DVector::zeros(0)
    } else {
        let rhs = -(&problem.p * &x + &problem.g + problem.a_in.transpose() * &mu);
        pinv(&problem.a_eq.transpose()).0 * rhs
    };
    let kkt = problem.kkt_residuals(&x, &lambda, &mu);
    Ok(QpSolution { x, lambda, mu, active, status, iterations, objective_trace: trace, kkt })
}
