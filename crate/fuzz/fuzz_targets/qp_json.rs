#![no_main]

use balance_core::qp::{solve, QpOptions, QpProblem};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(problem) = QpProblem::from_json(text) {
        if problem.dim() <= 32 {
            let _ = solve(&problem, &QpOptions::default());
        }
    }
});
