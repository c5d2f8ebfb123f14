mod common;

use balance_core::math::{rpy_rotation, skew};
use balance_core::multibody::coriolis::partition;
use balance_core::multibody::{
    bias_forces, coriolis_matrix, forward_kinematics, frame_jacobian, gravity_forces, inverse_dynamics,
    jacobian_dot_nu, load_model, mass_matrix, total_energy, Kinematics, Pose, RobotModel, RobotState, GRAVITY,
};
use common::*;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use proptest::prelude::*;

const ONE_BODY: &str = r#"{
  "name": "brick", "base_link": "body",
  "links": [{"name": "body", "mass": 2.0, "com": [0.1, -0.05, 0.2],
             "inertia": [0.02, 0.001, 0.0, 0.001, 0.03, 0.0, 0.0, 0.0, 0.04]}],
  "joints": [],
  "frames": [{"name": "top", "link": "body", "origin_xyz": [0.0, 0.0, 0.3], "origin_rpy": [0.1, 0.0, 0.0]}]
}"#;

fn one_body() -> RobotModel {
    load_model(ONE_BODY).unwrap()
}

/// Frame poses recomputed from the model file alone, chaining 4x4
/// homogeneous transforms from the base outward.
fn chained_pose(model: &RobotModel, state: &RobotState, frame: &str) -> (Matrix3<f64>, Vector3<f64>) {
    type H = nalgebra::Matrix4<f64>;
    let hom = |r: Matrix3<f64>, p: Vector3<f64>| {
        let mut h = H::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&p);
        h
    };
    let (link, offset) = model.frame(frame).unwrap();
    let mut chain = vec![];
    let mut cur = link;
    while cur != model.base {
        let j = model.joints.iter().position(|j| j.child == cur).unwrap();
        chain.push(j);
        cur = model.joints[j].parent;
    }
    let mut h = hom(state.base_rotation(), state.base_position);
    for &j in chain.iter().rev() {
        let joint = &model.joints[j];
        let rot =
            nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(joint.axis), state.joint_positions[j]);
        h = h * hom(joint.origin.rotation, joint.origin.translation) * hom(*rot.matrix(), Vector3::zeros());
    }
    h *= hom(offset.rotation, offset.translation);
    (h.fixed_view::<3, 3>(0, 0).into_owned(), h.fixed_view::<3, 1>(0, 3).into_owned())
}

#[test]
fn identity_state_puts_base_at_identity() {
    for model in bundled() {
        let s = RobotState::zero(model.dof());
        let poses = forward_kinematics(&model, &s).unwrap();
        let base = &poses[&model.links[model.base].name];
        assert_eq!(base.rotation, Matrix3::identity());
        assert_eq!(base.translation, Vector3::zeros());
    }
}

#[test]
fn base_translation_shifts_every_frame() {
    let model = humanoid();
    let s0 = RobotState::zero(model.dof());
    let mut s1 = s0.clone();
    s1.base_position = Vector3::new(1.0, 0.0, 0.0);
    let a = forward_kinematics(&model, &s0).unwrap();
    let b = forward_kinematics(&model, &s1).unwrap();
    assert_eq!(a.len(), model.links.len() + model.frames.len());
    for (name, pa) in &a {
        let pb = &b[name];
        assert!((pb.translation - pa.translation - Vector3::x()).norm() < 1e-14, "{name}");
        assert!((pb.rotation - pa.rotation).norm() < 1e-14);
    }
}

#[test]
fn sole_pose_matches_chained_transforms() {
    let model = humanoid();
    let mut r = rng(11);
    for _ in 0..20 {
        let s = random_pose(&model, &mut r);
        let poses = forward_kinematics(&model, &s).unwrap();
        for f in ["left_sole", "right_sole"] {
            let (rot, pos) = chained_pose(&model, &s, f);
            assert!((poses[f].translation - pos).norm() < 1e-12);
            assert!((poses[f].rotation - rot).norm() < 1e-12);
        }
    }
}

#[test]
fn jacobian_base_block_has_exact_structure() {
    let model = humanoid();
    let mut r = rng(3);
    let s = random_state(&model, &mut r);
    let kin = Kinematics::new(&model, &s).unwrap();
    let j = frame_jacobian(&model, &s, "left_sole").unwrap();
    let p = kin.frame_pose("left_sole").unwrap().translation;
    let mut expect = DMatrix::<f64>::identity(6, 6);
    expect.view_mut((0, 3), (3, 3)).copy_from(&DMatrix::from_column_slice(
        3,
        3,
        (-skew(&(p - s.base_position))).as_slice(),
    ));
    assert_eq!(j.view((0, 0), (6, 6)).into_owned(), expect);
}

#[test]
fn frame_at_base_origin_has_identity_base_block() {
    let model = pendulum();
    let s = random_state(&model, &mut rng(5));
    let j = frame_jacobian(&model, &s, "left_sole").unwrap();
    assert_eq!(j.view((0, 0), (6, 6)).into_owned(), DMatrix::<f64>::identity(6, 6));
}

#[test]
fn single_body_has_empty_joint_block() {
    let model = one_body();
    let s = random_state(&model, &mut rng(1));
    let j = frame_jacobian(&model, &s, "top").unwrap();
    assert_eq!(j.shape(), (6, 6));
}

#[test]
fn unknown_frame_is_an_error() {
    let model = pendulum();
    let s = RobotState::zero(model.dof());
    assert!(frame_jacobian(&model, &s, "nose").is_err());
    assert!(jacobian_dot_nu(&model, &s, "nose").is_err());
}

fn fd_frame_velocity(model: &RobotModel, s: &RobotState, frame: &str, h: f64) -> DVector<f64> {
    let p = forward_kinematics(model, &s.flowed(h)).unwrap()[frame];
    let m = forward_kinematics(model, &s.flowed(-h)).unwrap()[frame];
    let v = (p.translation - m.translation) / (2.0 * h);
    let w = rot_diff(&p.rotation, &m.rotation) / (2.0 * h);
    DVector::from_column_slice(&[v.x, v.y, v.z, w.x, w.y, w.z])
}

#[test]
fn jacobian_matches_finite_difference_velocity() {
    for model in bundled() {
        let mut r = rng(21);
        for _ in 0..10 {
            let s = random_state(&model, &mut r);
            for f in model.frames.iter().map(|f| f.name.clone()) {
                let jv = frame_jacobian(&model, &s, &f).unwrap() * s.nu();
                let fd = fd_frame_velocity(&model, &s, &f, 1e-6);
                assert!(rel_err(&jv, &fd) < 1e-6, "{f}: {}", rel_err(&jv, &fd));
            }
        }
    }
}

#[test]
fn jacobian_drift_matches_finite_difference() {
    for model in bundled() {
        let mut r = rng(22);
        for _ in 0..10 {
            let s = random_state(&model, &mut r);
            let nu = s.nu();
            for f in model.frames.iter().map(|f| f.name.clone()) {
                let h = 1e-5;
                let jp = frame_jacobian(&model, &s.flowed(h), &f).unwrap() * &nu;
                let jm = frame_jacobian(&model, &s.flowed(-h), &f).unwrap() * &nu;
                let fd = (jp - jm) / (2.0 * h);
                let d = jacobian_dot_nu(&model, &s, &f).unwrap();
                assert!(rel_err(&d, &fd) < 1e-5, "{f}: {}", rel_err(&d, &fd));
            }
        }
    }
}

#[test]
fn drift_vanishes_at_rest_and_under_pure_translation() {
    let model = humanoid();
    let mut s = random_pose(&model, &mut rng(4));
    assert_eq!(jacobian_dot_nu(&model, &s, "left_sole").unwrap().norm(), 0.0);
    s.base_linear_velocity = Vector3::new(0.3, -0.2, 0.5);
    assert!(jacobian_dot_nu(&model, &s, "left_sole").unwrap().norm() < 1e-14);
}

#[test]
fn one_body_mass_matrix_is_its_spatial_inertia() {
    let model = one_body();
    let s = random_pose(&model, &mut rng(8));
    let m = mass_matrix(&model, &s).unwrap();
    let link = &model.links[0];
    let rot = s.base_rotation();
    let r = rot * link.com;
    let ic = rot * link.inertia * rot.transpose();
    let mut expect = DMatrix::zeros(6, 6);
    expect.view_mut((0, 0), (3, 3)).copy_from(&DMatrix::from_diagonal_element(3, 3, link.mass));
    let mr = link.mass * skew(&r);
    let blk = |a: Matrix3<f64>| DMatrix::from_column_slice(3, 3, a.as_slice());
    expect.view_mut((0, 3), (3, 3)).copy_from(&blk(-mr));
    expect.view_mut((3, 0), (3, 3)).copy_from(&blk(mr));
    expect.view_mut((3, 3), (3, 3)).copy_from(&blk(ic + link.mass * skew(&r) * skew(&r).transpose()));
    assert!(rel_err_m(&m, &expect) < 1e-14);
}

#[test]
fn mass_matrix_columns_match_inverse_dynamics() {
    for model in bundled() {
        let s = random_state(&model, &mut rng(31));
        let m = mass_matrix(&model, &s).unwrap();
        for i in 0..model.nv() {
            let mut e = DVector::zeros(model.nv());
            e[i] = 1.0;
            let col = Kinematics::new(&model, &s).unwrap().inverse_dynamics(&e, false, false);
            assert!((col - m.column(i)).norm() < 1e-12 * m.norm());
        }
    }
}

#[test]
fn bias_is_inverse_dynamics_at_zero_acceleration() {
    for model in bundled() {
        let s = random_state(&model, &mut rng(32));
        let h = bias_forces(&model, &s).unwrap();
        let id = inverse_dynamics(&model, &s, &DVector::zeros(model.nv())).unwrap();
        assert!((h - id).norm() < 1e-10);
        let rest = random_pose(&model, &mut rng(33));
        assert!((bias_forces(&model, &rest).unwrap() - gravity_forces(&model, &rest).unwrap()).norm() < 1e-12);
    }
}

#[test]
fn gravity_base_force_is_total_weight() {
    for model in bundled() {
        let s = random_pose(&model, &mut rng(34));
        let g = gravity_forces(&model, &s).unwrap();
        let kin = Kinematics::new(&model, &s).unwrap();
        let w = model.total_mass() * GRAVITY;
        assert!((g.fixed_rows::<3>(0) - Vector3::new(0.0, 0.0, w)).norm() < 1e-10);
        let torque = (kin.com() - s.base_position).cross(&Vector3::new(0.0, 0.0, w));
        assert!((g.fixed_rows::<3>(3) - torque).norm() < 1e-10);
        let m = mass_matrix(&model, &s).unwrap();
        assert!((g - m.column(2) * GRAVITY).norm() < 1e-10);
    }
}

#[test]
fn forward_dynamics_round_trip_reproduces_applied_forces() {
    for model in bundled() {
        let mut r = rng(35);
        let s = random_state(&model, &mut r);
        let applied = uniform_vec(&mut r, model.nv(), 5.0);
        let m = mass_matrix(&model, &s).unwrap();
        let h = bias_forces(&model, &s).unwrap();
        let acc = m.clone().cholesky().unwrap().solve(&(&applied - &h));
        let back = inverse_dynamics(&model, &s, &acc).unwrap();
        assert!((back - &applied).norm() < 1e-8);
    }
}

#[test]
fn coriolis_reproduces_bias_forces() {
    for model in bundled() {
        let mut r = rng(41);
        for _ in 0..3 {
            let s = random_state(&model, &mut r);
            let c = coriolis_matrix(&model, &s).unwrap();
            let lhs = &c * s.nu() + gravity_forces(&model, &s).unwrap();
            let h = bias_forces(&model, &s).unwrap();
            assert!((lhs - h).norm() < 1e-6, "{}", model.name);
        }
        let rest = random_pose(&model, &mut r);
        let c = coriolis_matrix(&model, &rest).unwrap();
        assert!((c * rest.nu()).norm() == 0.0);
    }
}

#[test]
fn mdot_minus_two_c_is_skew() {
    for model in bundled() {
        let mut r = rng(42);
        for _ in 0..3 {
            let s = random_state(&model, &mut r);
            let c = coriolis_matrix(&model, &s).unwrap();
            let h = 1e-6;
            let mdot =
                (mass_matrix(&model, &s.flowed(h)).unwrap() - mass_matrix(&model, &s.flowed(-h)).unwrap()) / (2.0 * h);
            let k = &mdot - 2.0 * &c;
            let sym = (&k + k.transpose()) * 0.5;
            assert!(sym.norm() < 1e-5 * mdot.norm().max(1.0), "{}", sym.norm());
            let w = uniform_vec(&mut r, model.nv(), 1.0);
            assert!(w.dot(&(&k * &w)).abs() < 1e-5 * mdot.norm().max(1.0));
        }
    }
}

#[test]
fn coriolis_partition_has_block_shapes() {
    let model = pendulum();
    let s = random_state(&model, &mut rng(43));
    let (cb, cbj, cjb, cj) = partition(&coriolis_matrix(&model, &s).unwrap());
    assert_eq!(cb.shape(), (6, 6));
    assert_eq!(cbj.shape(), (6, 7));
    assert_eq!(cjb.shape(), (7, 6));
    assert_eq!(cj.shape(), (7, 7));
}

#[test]
fn energy_of_trivial_states() {
    let model = load_model(
        r#"{"name": "p", "base_link": "b",
            "links": [{"name": "b", "mass": 2.0, "com": [0, 0, 0], "inertia": [1, 0, 0, 0, 1, 0, 0, 0, 1]}],
            "joints": [], "frames": []}"#,
    )
    .unwrap();
    let mut s = RobotState::zero(0);
    assert_eq!(total_energy(&model, &s).unwrap(), 0.0);
    s.base_position.z = 1.0;
    assert!((total_energy(&model, &s).unwrap() - 19.62).abs() < 1e-12);
}

#[test]
fn frame_offsets_compose() {
    let model = one_body();
    let s = RobotState::zero(0);
    let poses = forward_kinematics(&model, &s).unwrap();
    let expect =
        Pose { rotation: rpy_rotation(&Vector3::new(0.1, 0.0, 0.0)), translation: Vector3::new(0.0, 0.0, 0.3) };
    assert!((poses["top"].rotation - expect.rotation).norm() < 1e-15);
    assert!((poses["top"].translation - expect.translation).norm() < 1e-15);
}

#[test]
fn desk_humanoid_mass_is_sum_of_links() {
    let text = balance_core::models::DESK_HUMANOID;
    let raw: serde_json::Value = serde_json::from_str(text).unwrap();
    let sum: f64 = raw["links"].as_array().unwrap().iter().map(|l| l["mass"].as_f64().unwrap()).sum();
    let model = humanoid();
    assert_eq!(model.dof(), 14);
    assert!((model.total_mass() - sum).abs() < 1e-12);
    assert_eq!(pendulum().dof(), 7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(seed in any::<u64>(), which in 0usize..2) {
        let model = &bundled()[which];
        let s = random_state(model, &mut rng(seed));
        let m = mass_matrix(model, &s).unwrap();
        prop_assert!((&m - m.transpose()).norm() < 1e-10 * m.norm());
        let eig = m.symmetric_eigen();
        prop_assert!(eig.eigenvalues.min() > 0.0);
    }

    #[test]
    fn jacobian_times_velocity_is_frame_velocity(seed in any::<u64>()) {
        let model = humanoid();
        let s = random_state(&model, &mut rng(seed));
        let jv = frame_jacobian(&model, &s, "right_sole").unwrap() * s.nu();
        let fd = fd_frame_velocity(&model, &s, "right_sole", 1e-6);
        prop_assert!(rel_err(&jv, &fd) < 1e-6);
    }

    #[test]
    fn bias_matches_zero_acceleration_dynamics(seed in any::<u64>()) {
        let model = humanoid();
        let s = random_state(&model, &mut rng(seed));
        let h = bias_forces(&model, &s).unwrap();
        let id = inverse_dynamics(&model, &s, &DVector::zeros(model.nv())).unwrap();
        prop_assert!((h - id).norm() < 1e-10);
    }
}
