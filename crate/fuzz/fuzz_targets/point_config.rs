#![no_main]

use libfuzzer_sys::fuzz_target;
use shiftlab::alloc::{compute_n, stable_allocation, stable_allocation_naive, PointConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(cfg) = serde_json::from_slice::<PointConfig>(data) else {
        return;
    };
    let fast = stable_allocation(&cfg);
    if cfg.a().len() <= 256 {
        assert_eq!(fast.as_ref().ok(), stable_allocation_naive(&cfg).as_ref().ok());
    }
    let _ = compute_n(&cfg);
});
