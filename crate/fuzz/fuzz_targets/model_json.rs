#![no_main]

use balance_core::multibody::{Kinematics, RobotModel, RobotState};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(model) = RobotModel::from_json_str(text) else { return };
    if model.dof() <= 64 {
        let _ = Kinematics::new(&model, &RobotState::zero(model.dof()));
    }
});
