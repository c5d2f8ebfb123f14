use std::fmt::Write as _;
use std::path::Path;

use balance_core::analysis::linearization_report;
use balance_core::centroidal::Centroidal;
use balance_core::math::condition_number;
use balance_core::multibody::{RobotModel, RobotState};
use balance_core::scenario::{ContactMode, ScenarioConfig, ScenarioSetup};
use balance_core::sim::{format_sci, run_scenario, TrajectoryLog};
use balance_core::{Error, Result};
use log::info;
use nalgebra::{DVector, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::ModelParse(_)
        | Error::InvalidModel { .. }
        | Error::Cycle(_)
        | Error::UnknownFrame(_)
        | Error::InvalidGains(_)
        | Error::InvalidState(_) => 2,
        Error::NonFinite { .. } => 3,
        Error::RankDeficient { .. } => 4,
        _ => 1,
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<(ScenarioConfig, RobotModel)> {
    let mut config = ScenarioConfig::from_path(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let model = config.load_model()?;
    Ok((config, model))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Headline numbers of a run.
struct Summary {
    final_jerr: f64,
    max_jerr: f64,
    max_momentum_error: f64,
    trend: &'static str,
}

fn momentum_error_norms(log: &TrajectoryLog) -> Vec<f64> {
    let cols: Vec<usize> = (1..=6).filter_map(|i| log.column_index(&format!("Ht_{i}"))).collect();
    log.rows.iter().map(|r| cols.iter().map(|&c| r[c] * r[c]).sum::<f64>().sqrt()).collect()
}

fn summarize(log: &TrajectoryLog) -> Summary {
    let jerr = log.column("jerr_norm").unwrap_or_default();
    let times = log.times();
    let end = times.last().copied().unwrap_or(0.0);
    let final_jerr = jerr.last().copied().unwrap_or(0.0);
    let max_jerr = jerr.iter().copied().fold(0.0, f64::max);
    let early = jerr.iter().zip(&times).filter(|(_, t)| **t <= 0.1 * end).map(|(j, _)| *j).fold(0.0, f64::max);
    let trend = if final_jerr > 2.0 * early && final_jerr > 1e-6 {
        "diverging"
    } else if final_jerr < 0.1 * max_jerr || final_jerr < 1e-6 {
        "converging"
    } else {
        "bounded"
    };
    Summary {
        final_jerr,
        max_jerr,
        max_momentum_error: momentum_error_norms(log).into_iter().fold(0.0, f64::max),
        trend,
    }
}

pub fn simulate(path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let (config, model) = load(path, seed)?;
    info!("simulating {} for {} s", path.display(), config.duration);
    let log = run_scenario(&model, &config)?;
    if let Some(out) = out {
        write(out, &log.to_csv())?;
    }
    let s = summarize(&log);
    println!(
        "final_jerr_norm={} max_momentum_error={} trend={}",
        format_sci(s.final_jerr),
        format_sci(s.max_momentum_error),
        s.trend
    );
    Ok(())
}

pub fn linearize(path: &Path, out: Option<&Path>) -> Result<()> {
    let (config, model) = load(path, None)?;
    if config.contact != ContactMode::OneFoot {
        return Err(Error::Config("linearization needs a one-foot scenario".into()));
    }
    let setup = ScenarioSetup::new(&model, &config)?;
    let report = linearization_report(&model, &setup.reference.q_des, &setup.gains, &setup.supports[0])?;
    if let Some(out) = out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write(out, &json)?;
    }
    println!(
        "max_re={} verdict={} fd_agreement={}",
        format_sci(report.max_re),
        serde_json::to_value(report.verdict).expect("verdict serializes").as_str().unwrap_or("?"),
        format_sci(report.fd_agreement)
    );
    if let Some(reason) = &report.reason {
        println!("reason: {reason}");
    }
    Ok(())
}

pub fn compare(first: &Path, second: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let run = |path: &Path| -> Result<TrajectoryLog> {
        let (config, model) = load(path, seed)?;
        run_scenario(&model, &config)
    };
    let (a, b) = std::thread::scope(|scope| {
        let a = scope.spawn(|| run(first));
        let b = scope.spawn(|| run(second));
        (a.join().expect("scenario thread"), b.join().expect("scenario thread"))
    });
    let (a, b) = (a?, b?);
    let (ta, tb) = (a.times(), b.times());
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(x, y)| (x - y).abs() > 1e-9) {
        return Err(Error::Config("the two scenarios must log at the same times".into()));
    }
    if let Some(out) = out {
        let ja = a.column("jerr_norm").unwrap_or_default();
        let jb = b.column("jerr_norm").unwrap_or_default();
        let mut csv = String::from("t,jerr_norm_a,jerr_norm_b\n");
        for ((t, x), y) in ta.iter().zip(&ja).zip(&jb) {
            let _ = writeln!(csv, "{},{},{}", format_sci(*t), format_sci(*x), format_sci(*y));
        }
        write(out, &csv)?;
    }
    println!(
        "{:<32} {:>20} {:>20} {:>20}  trend",
        "scenario", "final_jerr_norm", "max_jerr_norm", "max_momentum_error"
    );
    for (path, log) in [(first, &a), (second, &b)] {
        let s = summarize(log);
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        println!(
            "{name:<32} {:>20} {:>20} {:>20}  {}",
            format_sci(s.final_jerr),
            format_sci(s.max_jerr),
            format_sci(s.max_momentum_error),
            s.trend
        );
    }
    Ok(())
}

fn random_state(model: &RobotModel, seed: u64) -> RobotState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.dof();
    let mut v3 = |s: f64| Vector3::from_fn(|_, _| rng.random_range(-s..s));
    let mut state = RobotState::zero(n);
    state.base_position = v3(1.0);
    state.base_orientation = UnitQuaternion::from_scaled_axis(v3(1.5));
    state.base_linear_velocity = v3(1.0);
    state.base_angular_velocity = v3(1.0);
    state.joint_positions = DVector::from_fn(n, |_, _| rng.random_range(-0.8..0.8));
    state.joint_velocities = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    state
}

pub fn model_info(path: &Path, seed: u64) -> Result<()> {
    if !path.exists() {
        return Err(Error::Config(format!("model file not found: {}", path.display())));
    }
    let model = RobotModel::from_path(path)?;
    let n = model.dof();
    println!("model {}", model.name);
    println!("n = {n}");
    println!("m = {:.6} kg", model.total_mass());
    println!("{:<24} {:>10}  {:<24} {:<20}", "link", "mass", "parent joint", "axis");
    for (i, link) in model.links.iter().enumerate() {
        let (joint, axis) = match model.parent_joint(i) {
            Some(j) => {
                let a = model.joints[j].axis;
                (model.joints[j].name.clone(), format!("[{:.3}, {:.3}, {:.3}]", a.x, a.y, a.z))
            }
            None => ("(floating base)".to_string(), String::new()),
        };
        println!("{:<24} {:>10.4}  {:<24} {:<20}", link.name, link.mass, joint, axis);
    }

    let state = random_state(&model, seed);
    let cen = Centroidal::new(&model, &state)?;
    let coupling = cen.m_bar.view((0, 6), (6, n)).norm() / cen.m_bar.norm();
    println!("block_diagonality_residual = {}", format_sci(coupling));

    let zero = Centroidal::new(&model, &RobotState::zero(n))?;
    for frame in &model.frames {
        let (j_bar, _) = zero.frame_jacobian(&frame.name)?;
        let cond = condition_number(&j_bar.view((0, 0), (6, 6)).into_owned());
        println!("support_jacobian_condition[{}] = {}", frame.name, format_sci(cond));
    }
    Ok(())
}
