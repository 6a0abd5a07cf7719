#![no_main]

use libfuzzer_sys::fuzz_target;
use shiftlab::gauge::Gauge;
use shiftlab::rational::parse_rational;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_rational(&text);
    let Ok(g) = serde_json::from_str::<Gauge>(&text) else {
        return;
    };
    let mut prev = 0.0;
    for t in [0.0, 0.5, 1.0, 7.0, 1e6] {
        let v = g.apply(t);
        assert!(v.is_finite() && v >= prev, "{} at {t}: {v}", g.label());
        prev = v;
    }
    assert_eq!(g.apply(0.0), 0.0);
});
