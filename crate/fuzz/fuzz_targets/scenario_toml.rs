#![no_main]

use balance_core::scenario::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ScenarioConfig::from_toml(text) {
        let _ = config.options();
    }
});
