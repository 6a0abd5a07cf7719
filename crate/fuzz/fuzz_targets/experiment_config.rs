#![no_main]

use libfuzzer_sys::fuzz_target;
use shiftlab::verify::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::from_json(text) {
        if let Ok(pair) = cfg.pair() {
            let _ = cfg.mode(&pair);
        }
        let _ = cfg.max_horizon();
    }
});
