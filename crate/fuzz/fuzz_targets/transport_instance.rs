#![no_main]

use libfuzzer_sys::fuzz_target;
use shiftlab::gauge::Gauge;
use shiftlab::transport::{inequality_check, Instance};

fuzz_target!(|data: &[u8]| {
    let Ok(inst) = serde_json::from_slice::<Instance>(data) else {
        return;
    };
    // matrices are dense; keep iterations fast
    if inst.a.len() > 64 || inst.b.len() > 64 {
        return;
    }
    let Ok((cfg, pi)) = inst.resolve() else {
        return;
    };
    for g in Gauge::standard_set() {
        if let Ok(r) = inequality_check(&pi, &cfg, &g) {
            assert!(r.margin >= -1e-9 * r.lhs.abs().max(1.0), "{r:?}");
        }
    }
});
