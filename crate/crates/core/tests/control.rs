mod common;

use balance_core::centroidal::{anchored_state, Centroidal};
use balance_core::control::*;
use balance_core::multibody::{
    bias_forces, frame_jacobian, jacobian_dot_nu, mass_matrix, Pose, RobotModel, RobotState, GRAVITY,
};
use balance_core::qp::{QpOptions, QpStatus};
use common::*;
use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3, Vector6};
use proptest::prelude::*;
use rand::Rng;

fn supports(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn ground() -> Pose {
    Pose::identity()
}

/// Standing state on `support` with random joint angles and rates.
fn standing(model: &RobotModel, support: &str, seed: u64, qscale: f64, vscale: f64) -> RobotState {
    let mut r = rng(seed);
    let q = uniform_vec(&mut r, model.dof(), qscale);
    let qd = uniform_vec(&mut r, model.dof(), vscale);
    anchored_state(model, support, &ground(), &q, Some(&qd)).unwrap()
}

fn gains(model: &RobotModel, mode: GainMode) -> GainSet {
    let n = model.dof();
    let ki = match mode {
        GainMode::Classical => GainSet::classical_ki(5.0),
        GainMode::Modified => Matrix6::identity() * 5.0,
    };
    GainSet::new(
        Matrix6::identity() * 3.0,
        ki,
        DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| 10.0 + i as f64)),
        DMatrix::identity(n, n) * 2.0,
        mode,
    )
    .unwrap()
}

fn hold_reference(model: &RobotModel, s: &RobotState) -> Reference {
    let com = balance_core::multibody::Kinematics::new(model, s).unwrap().com();
    Reference::new(ReferenceKind::Hold, com, model.total_mass(), s.joint_positions.clone())
}

#[test]
fn momentum_reference_examples() {
    let model = pendulum();
    let s = RobotState::zero(7);
    let mut g = gains(&model, GainMode::Classical);
    let r = hold_reference(&model, &s);
    let ctrl = ControllerState::default();
    assert_eq!(momentum_reference(&g, &ctrl, &Vector6::zeros(), &r, 0.0), Vector6::zeros());
    g.kp = Matrix6::identity();
    let e1 = Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    assert_eq!(momentum_reference(&g, &ctrl, &e1, &r, 0.0), -e1);
}

#[test]
fn sinusoid_reference_at_start() {
    let m = 16.3;
    let r = Reference::new(
        ReferenceKind::ComSine { axis: [0.0, 1.0, 0.0], amplitude: 0.05, frequency: 0.3 },
        Vector3::zeros(),
        m,
        DVector::zeros(7),
    );
    let s = r.sample(0.0);
    let w = 2.0 * std::f64::consts::PI * 0.3;
    assert_eq!(s.momentum_rate[1], 0.0);
    assert!((s.momentum[1] - m * 0.05 * w).abs() < 1e-14);
    assert_eq!(s.momentum[0], 0.0);
    assert_eq!(s.momentum.fixed_rows::<3>(3).norm(), 0.0);
    let later = r.sample(0.4);
    assert!((later.momentum_rate[1] + m * 0.05 * w * w * (w * 0.4).sin()).abs() < 1e-12);
    assert!((later.com[1] - 0.05 * (w * 0.4).sin()).abs() < 1e-15);
}

#[test]
fn integral_is_unchanged_without_error() {
    let model = pendulum();
    let s = anchored_state(&model, "left_sole", &ground(), &DVector::from_element(7, 0.1), None).unwrap();
    let r = hold_reference(&model, &s);
    let ctrl = ControllerState { integral: Vector6::new(0.1, -0.2, 0.3, 0.4, 0.5, -0.6), time: 0.0 };
    for mode in [GainMode::Classical, GainMode::Modified] {
        let g = gains(&model, mode);
        let next = integrate_momentum_error(&g, &ctrl, &model, &s, &r, "left_sole", 1e-3).unwrap();
        assert_eq!(next.integral, ctrl.integral);
        assert_eq!(next.time, 1e-3);
    }
}

#[test]
fn classical_integral_accumulates_momentum_error() {
    let model = pendulum();
    let s = standing(&model, "left_sole", 1, 0.2, 0.5);
    let r = hold_reference(&model, &s);
    let g = gains(&model, GainMode::Classical);
    let next = integrate_momentum_error(&g, &ControllerState::default(), &model, &s, &r, "left_sole", 0.01).unwrap();
    let h = Centroidal::new(&model, &s).unwrap().momentum();
    assert!((next.integral - h * 0.01).norm() < 1e-15);
}

#[test]
fn gravity_compensating_wrench() {
    for model in bundled() {
        let s = standing(&model, "left_sole", 2, 0.3, 0.0);
        let f = one_foot_wrench(&model, &s, "left_sole", &Vector6::zeros()).unwrap();
        let cen = Centroidal::new(&model, &s).unwrap();
        let (j, _) = cen.frame_jacobian("left_sole").unwrap();
        let jb = j.columns(0, 6).into_owned();
        let rate = jb.transpose() * &f;
        let mut weight = DVector::zeros(6);
        weight[2] = model.total_mass() * GRAVITY;
        assert!((rate - weight).norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrench_realizes_momentum_rate(seed in any::<u64>()) {
        let model = humanoid();
        let s = standing(&model, "right_sole", seed, 0.3, 0.5);
        let mut r = rng(seed ^ 1);
        let hs = Vector6::from_fn(|_, _| r.random_range(-20.0..20.0));
        let f = one_foot_wrench(&model, &s, "right_sole", &hs).unwrap();
        let cen = Centroidal::new(&model, &s).unwrap();
        let (j, _) = cen.frame_jacobian("right_sole").unwrap();
        let rate = j.columns(0, 6).transpose() * &f;
        let mut expect = DVector::from_column_slice(hs.as_slice());
        expect[2] += model.total_mass() * GRAVITY;
        prop_assert!((rate - expect).norm() < 1e-9);
    }

    #[test]
    fn projector_identities(seed in any::<u64>(), which in 0usize..2) {
        let model = &bundled()[which];
        let s = standing(model, "left_sole", seed, 0.4, 0.5);
        let cen = Centroidal::new(model, &s).unwrap();
        let t = ContactTerms::new(&cen, &supports(&["left_sole"])).unwrap();
        let nn = &t.nullspace;
        prop_assert!((nn * nn - nn).amax() < 1e-10);
        prop_assert!((&t.lambda * nn).amax() < 1e-10 * t.lambda.amax().max(1.0));
        prop_assert!((nn - nn.transpose()).amax() < 1e-10);
    }

    #[test]
    fn cone_membership_matches_explicit_conditions(seed in any::<u64>()) {
        let p = FrictionCone { mu: 0.6, half_length: 0.1, half_width: 0.05, fz_min: 2.0 };
        let (c, b) = friction_cone(&p).unwrap();
        let mut r = rng(seed);
        let fz: f64 = r.random_range(-5.0..50.0);
        let f: DVector<f64> = DVector::from_vec(vec![
            r.random_range(-40.0..40.0), r.random_range(-40.0..40.0), fz,
            r.random_range(-4.0..4.0), r.random_range(-4.0..4.0), r.random_range(-4.0..4.0),
        ]);
        let explicit = f[0].abs() <= 0.6 * fz && f[1].abs() <= 0.6 * fz && fz >= 2.0
            && f[3].abs() <= 0.05 * fz && f[4].abs() <= 0.1 * fz && f[5].abs() <= 0.6 * 0.05 * fz;
        let rows = (&c * &f - &b).iter().all(|&v| v <= 0.0);
        prop_assert_eq!(explicit, rows);
    }
}

#[test]
fn postural_torque_at_reference_is_compensation_only() {
    for mode in [GainMode::Classical, GainMode::Modified] {
        let model = humanoid();
        let s = standing(&model, "left_sole", 3, 0.3, 0.0);
        let r = hold_reference(&model, &s);
        let g = gains(&model, mode);
        let sup = supports(&["left_sole"]);
        let f = one_foot_wrench(&model, &s, "left_sole", &Vector6::zeros()).unwrap();
        let (tau0, u0) = postural_torque(&model, &s, &sup, &f, &g, &r).unwrap();
        assert_eq!(u0.norm(), 0.0);
        let cen = Centroidal::new(&model, &s).unwrap();
        let (j, _) = cen.frame_jacobian("left_sole").unwrap();
        let expect = cen.h_bar.rows(6, 14) - j.columns(6, 14).transpose() * &f;
        assert!((tau0 - expect).norm() < 1e-12);
    }
}

#[test]
fn modified_postural_gains_are_projected() {
    let model = humanoid();
    let s = standing(&model, "left_sole", 4, 0.3, 0.4);
    let g = gains(&model, GainMode::Modified);
    let cen = Centroidal::new(&model, &s).unwrap();
    let t = ContactTerms::new(&cen, &supports(&["left_sole"])).unwrap();
    let (kp, kd) = t.postural_gains(&g);
    let x = uniform_vec(&mut rng(5), 14, 1.0);
    assert!((&kp * &x - &g.posture_kp * (&t.nullspace * (&t.mj * &x))).norm() < 1e-10);
    assert!((&kd * &x - &g.posture_kd * (&t.nullspace * (&t.mj * &x))).norm() < 1e-10);
    // Direct recomputation of the feedback from its definition.
    let mut r = rng(6);
    let q_des = &s.joint_positions + uniform_vec(&mut r, 14, 0.1);
    let u0 = t.postural_feedback(&g, &s.joint_positions, &s.joint_velocities, &q_des);
    let lam = &t.jj * t.mj.clone().try_inverse().unwrap();
    let lam_pinv = lam.transpose() * (&lam * lam.transpose()).try_inverse().unwrap();
    let nproj = DMatrix::identity(14, 14) - &lam_pinv * &lam;
    let expect = &g.posture_kp * &nproj * &t.mj * (&s.joint_positions - &q_des)
        + &g.posture_kd * &nproj * &t.mj * &s.joint_velocities;
    assert!((u0 - &expect).norm() < 1e-8 * expect.norm().max(1.0));
}

/// Generalized acceleration from the original-coordinate dynamics with the
/// given joint torques and support wrench.
fn accel(model: &RobotModel, s: &RobotState, frames: &[&str], tau: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
    let m = mass_matrix(model, s).unwrap();
    let mut rhs = -bias_forces(model, s).unwrap();
    let mut rows = rhs.rows_mut(6, model.dof());
    rows += tau;
    for (k, fr) in frames.iter().enumerate() {
        let j = frame_jacobian(model, s, fr).unwrap();
        rhs += j.transpose() * f.rows(6 * k, 6);
    }
    m.cholesky().unwrap().solve(&rhs)
}

#[test]
fn torques_keep_the_support_at_rest() {
    for model in bundled() {
        for seed in 0..10 {
            let s = standing(&model, "left_sole", 100 + seed, 0.4, 0.8);
            let mut r = rng(seed);
            let hs = Vector6::from_fn(|_, _| r.random_range(-10.0..10.0));
            let f = one_foot_wrench(&model, &s, "left_sole", &hs).unwrap();
            let tau0 = uniform_vec(&mut r, model.dof(), 10.0);
            let tau = one_foot_torques(&model, &s, "left_sole", &f, &tau0).unwrap();
            let nd = accel(&model, &s, &["left_sole"], &tau, &f);
            let j = frame_jacobian(&model, &s, "left_sole").unwrap();
            let res = j * &nd + jacobian_dot_nu(&model, &s, "left_sole").unwrap();
            assert!(res.norm() < 1e-8, "{}", res.norm());
        }
    }
}

#[test]
fn joint_accelerations_follow_the_reduced_closed_loop() {
    let model = humanoid();
    let s = standing(&model, "left_sole", 7, 0.3, 0.6);
    let r = hold_reference(&model, &s);
    let mut rr = rng(8);
    let q_des = &s.joint_positions + uniform_vec(&mut rr, 14, 0.1);
    let r = Reference { q_des, ..r };
    let g = gains(&model, GainMode::Modified);
    let sup = supports(&["left_sole"]);
    let hs = Vector6::from_fn(|_, _| rr.random_range(-5.0..5.0));
    let f = one_foot_wrench(&model, &s, "left_sole", &hs).unwrap();
    let (tau0, u0) = postural_torque(&model, &s, &sup, &f, &g, &r).unwrap();
    let tau = one_foot_torques(&model, &s, "left_sole", &f, &tau0).unwrap();
    let qdd = accel(&model, &s, &["left_sole"], &tau, &f).rows(6, 14).into_owned();
    let cen = Centroidal::new(&model, &s).unwrap();
    let t = ContactTerms::new(&cen, &sup).unwrap();
    let inner = &t.jb * (&t.mb_inv * (&t.hb - t.jb.transpose() * &f)) - &t.drift;
    let expect = &t.mj_inv * (&t.lambda_pinv * inner - &t.nullspace * &u0);
    assert!((&qdd - &expect).norm() < 1e-8 * expect.norm().max(1.0), "{}", (&qdd - &expect).norm());
}

#[test]
fn modes_agree_at_equilibrium() {
    let model = humanoid();
    let s = anchored_state(&model, "left_sole", &ground(), &DVector::from_element(14, 0.05), None).unwrap();
    let r = hold_reference(&model, &s);
    let sup = supports(&["left_sole"]);
    let mut taus = vec![];
    for mode in [GainMode::Classical, GainMode::Modified] {
        let c =
            BalanceController::new(&model, gains(&model, mode), r.clone(), sup.clone(), FrictionCone::default(), &s)
                .unwrap();
        let ctrl = c.initial_state(&s).unwrap();
        assert_eq!(ctrl.integral, Vector6::zeros());
        taus.push(c.evaluate(&s, &ctrl).unwrap().tau);
    }
    assert!((&taus[0] - &taus[1]).norm() < 1e-12);
}

#[test]
fn cone_rows_for_pure_normal_force() {
    let (c, b) = friction_cone(&FrictionCone { mu: 0.5, half_length: 0.1, half_width: 0.05, fz_min: 0.0 }).unwrap();
    assert_eq!(c.shape(), (CONE_ROWS, 6));
    let f = DVector::from_vec(vec![0.0, 0.0, 16.3 * GRAVITY, 0.0, 0.0, 0.0]);
    assert!((&c * &f - &b).iter().all(|&v| v < 0.0));
    let slip = DVector::from_vec(vec![2.0 * 0.5 * 10.0, 0.0, 10.0, 0.0, 0.0, 0.0]);
    let bad = balance_core::control::cone::violated_rows(&c, &b, &slip, 0.0);
    assert_eq!(bad, vec![0]);
    assert!(friction_cone(&FrictionCone { mu: 0.0, ..FrictionCone::default() }).is_err());
    assert!(friction_cone(&FrictionCone { mu: -1.0, ..FrictionCone::default() }).is_err());
}

fn two_feet_state(model: &RobotModel, q: &DVector<f64>) -> RobotState {
    anchored_state(model, "left_sole", &ground(), q, None).unwrap()
}

#[test]
fn symmetric_stance_shares_weight_equally() {
    let model = humanoid();
    let s = two_feet_state(&model, &crouch(0.3));
    let r = hold_reference(&model, &s);
    let g = gains(&model, GainMode::Classical);
    let out = two_feet_controller(
        &model,
        &s,
        &supports(&["left_sole", "right_sole"]),
        &Vector6::zeros(),
        &g,
        &r,
        0.0,
        &FrictionCone::default(),
        &QpOptions::default(),
    )
    .unwrap();
    let half = model.total_mass() * GRAVITY / 2.0;
    assert!((out.wrench[2] - half).abs() < 1e-6, "{}", out.wrench[2]);
    assert!((out.wrench[8] - half).abs() < 1e-6, "{}", out.wrench[8]);
    let qp = out.qp.unwrap();
    assert_eq!(qp.status, QpStatus::Optimal);
    assert!(qp.kkt.max() < 1e-8 * qp.scale);
}

#[test]
fn unbounded_cone_gives_equality_constrained_minimum() {
    let model = humanoid();
    let mut rr = rng(9);
    let q = crouch(0.3) + uniform_vec(&mut rr, 14, 0.1);
    let s = two_feet_state(&model, &q);
    let r = hold_reference(&model, &s);
    let g = gains(&model, GainMode::Classical);
    let sup = supports(&["left_sole", "right_sole"]);
    let hs = Vector6::from_fn(|_, _| rr.random_range(-5.0..5.0));
    let cen = Centroidal::new(&model, &s).unwrap();
    let terms = ContactTerms::new(&cen, &sup).unwrap();
    let u0 = terms.postural_feedback(&g, &s.joint_positions, &s.joint_velocities, &r.q_des);
    let (problem, _, _) =
        allocation_problem(&terms, &hs, &u0, &FrictionCone::unbounded(), &[Matrix3::identity(); 2]).unwrap();
    assert_eq!(problem.a_in.nrows(), 0);
    // KKT system of the equality-constrained problem solved directly.
    let mut kkt = DMatrix::zeros(18, 18);
    kkt.view_mut((0, 0), (12, 12)).copy_from(&problem.p);
    kkt.view_mut((0, 12), (12, 6)).copy_from(&problem.a_eq.transpose());
    kkt.view_mut((12, 0), (6, 12)).copy_from(&problem.a_eq);
    let mut rhs = DVector::zeros(18);
    rhs.rows_mut(0, 12).copy_from(&(-&problem.g));
    rhs.rows_mut(12, 6).copy_from(&problem.b_eq);
    let f_direct = kkt.lu().solve(&rhs).unwrap().rows(0, 12).into_owned();
    let out =
        two_feet_controller(&model, &s, &sup, &hs, &g, &r, 0.0, &FrictionCone::unbounded(), &QpOptions::default())
            .unwrap();
    assert!((&out.wrench - &f_direct).norm() < 1e-8 * f_direct.norm(), "{}", (&out.wrench - &f_direct).norm());
}

#[test]
fn two_feet_torques_realize_the_wrench() {
    let model = humanoid();
    let mut rr = rng(10);
    let q = crouch(0.3) + uniform_vec(&mut rr, 14, 0.03);
    let s = two_feet_state(&model, &q);
    let r = hold_reference(&model, &s);
    let g = gains(&model, GainMode::Modified);
    let sup = supports(&["left_sole", "right_sole"]);
    let hs = Vector6::from_fn(|_, _| rr.random_range(-5.0..5.0));
    let out = two_feet_controller(&model, &s, &sup, &hs, &g, &r, 0.0, &FrictionCone::default(), &QpOptions::default())
        .unwrap();
    let nd = accel(&model, &s, &["left_sole", "right_sole"], &out.tau, &out.wrench);
    for (k, f) in ["left_sole", "right_sole"].iter().enumerate() {
        let res = frame_jacobian(&model, &s, f).unwrap() * &nd + jacobian_dot_nu(&model, &s, f).unwrap();
        assert!(res.norm() < 1e-7, "{k}: {}", res.norm());
    }
    // Momentum rate produced by the wrenches.
    let cen = Centroidal::new(&model, &s).unwrap();
    let (j, _) = cen.stacked_jacobian(&sup).unwrap();
    let mut rate = j.columns(0, 6).transpose() * &out.wrench;
    rate[2] -= model.total_mass() * GRAVITY;
    assert!((rate - DVector::from_column_slice(hs.as_slice())).norm() < 1e-8);
}

/// Brute-force solution of an allocation QP over active sets of size at
/// most the reduced dimension.
fn enumerate_allocation(p: &balance_core::qp::QpProblem) -> DVector<f64> {
    let d = p.dim();
    let me = p.a_eq.nrows();
    let mi = p.a_in.nrows();
    let max_active = d - me;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut stack: Vec<Vec<usize>> = vec![vec![]];
    while let Some(set) = stack.pop() {
        let start = set.last().map_or(0, |&i| i + 1);
        if set.len() < max_active {
            for i in start..mi {
                let mut next = set.clone();
                next.push(i);
                stack.push(next);
            }
        }
        let k = me + set.len();
        let mut kkt = DMatrix::zeros(d + k, d + k);
        let mut rhs = DVector::zeros(d + k);
        kkt.view_mut((0, 0), (d, d)).copy_from(&p.p);
        rhs.rows_mut(0, d).copy_from(&(-&p.g));
        let mut a = DMatrix::zeros(k, d);
        let mut b = DVector::zeros(k);
        a.rows_mut(0, me).copy_from(&p.a_eq);
        b.rows_mut(0, me).copy_from(&p.b_eq);
        for (j, &i) in set.iter().enumerate() {
            a.row_mut(me + j).copy_from(&p.a_in.row(i));
            b[me + j] = p.b_in[i];
        }
        kkt.view_mut((d, 0), (k, d)).copy_from(&a);
        kkt.view_mut((0, d), (d, k)).copy_from(&a.transpose());
        rhs.rows_mut(d, k).copy_from(&b);
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if !sol.iter().all(|v| v.is_finite()) {
            continue;
        }
        let x = sol.rows(0, d).into_owned();
        let feasible = (&p.a_in * &x - &p.b_in).iter().all(|&v| v <= 1e-7);
        let dual = (0..set.len()).all(|j| sol[d + me + j] >= -1e-7);
        if feasible && dual {
            let f = p.objective(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.unwrap().1
}

#[test]
fn active_cone_allocation_matches_enumeration() {
    let model = humanoid();
    let s = two_feet_state(&model, &crouch(0.3));
    let r = hold_reference(&model, &s);
    let g = gains(&model, GainMode::Classical);
    let sup = supports(&["left_sole", "right_sole"]);
    let cen = Centroidal::new(&model, &s).unwrap();
    let terms = ContactTerms::new(&cen, &sup).unwrap();
    let u0 = terms.postural_feedback(&g, &s.joint_positions, &s.joint_velocities, &r.q_des);
    // A sideways push on narrow, slippery feet forces cone rows active.
    let hs = Vector6::new(10.0, 20.0, 0.0, 0.0, 2.0, 1.0);
    let cone = FrictionCone { mu: 0.3, half_length: 0.06, half_width: 0.02, fz_min: 5.0 };
    let rot = [Matrix3::identity(); 2];
    let (problem, _, _) = allocation_problem(&terms, &hs, &u0, &cone, &rot).unwrap();
    let sol = balance_core::qp::solve(&problem, &QpOptions::default()).unwrap();
    assert_eq!(sol.status, QpStatus::Optimal);
    assert!(!sol.active.is_empty());
    assert!(sol.kkt.max() < 1e-8 * problem.scale(), "{:?}", sol.kkt);
    let brute = enumerate_allocation(&problem);
    assert!((&sol.x - &brute).norm() < 1e-8 * brute.norm(), "{}", (&sol.x - &brute).norm());
}

#[test]
fn impossible_allocation_reports_violated_rows() {
    let model = humanoid();
    let s = two_feet_state(&model, &crouch(0.3));
    let r = hold_reference(&model, &s);
    let g = gains(&model, GainMode::Classical);
    // Asking for a downward-accelerating momentum beyond free fall needs pulling on the floor.
    let hs = Vector6::new(0.0, 0.0, -2.0 * model.total_mass() * GRAVITY, 0.0, 0.0, 0.0);
    let err = two_feet_controller(
        &model,
        &s,
        &supports(&["left_sole", "right_sole"]),
        &hs,
        &g,
        &r,
        0.0,
        &FrictionCone::default(),
        &QpOptions::default(),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("rows violated"), "{msg}");
}

#[test]
fn gain_validation() {
    let n = 7;
    let id = DMatrix::identity(n, n);
    assert!(
        GainSet::new(Matrix6::identity(), Matrix6::identity(), id.clone(), id.clone(), GainMode::Classical).is_err()
    );
    assert!(GainSet::new(Matrix6::identity(), GainSet::classical_ki(1.0), id.clone(), id.clone(), GainMode::Modified)
        .is_err());
    assert!(GainSet::new(
        -Matrix6::identity(),
        GainSet::classical_ki(1.0),
        id.clone(),
        id.clone(),
        GainMode::Classical
    )
    .is_err());
    assert!(GainSet::new(
        Matrix6::identity(),
        GainSet::classical_ki(1.0),
        -id.clone(),
        id.clone(),
        GainMode::Classical
    )
    .is_err());
    assert!(GainSet::new(Matrix6::identity(), GainSet::classical_ki(1.0), id.clone(), id, GainMode::Classical).is_ok());
}
