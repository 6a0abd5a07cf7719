#![no_main]

use libfuzzer_sys::fuzz_target;
use shiftlab::measure::{split_measures, DiscreteMeasure};

// Input: one measure, or a JSON pair `[mu, nu]`.
fuzz_target!(|data: &[u8]| {
    if let Ok(m) = serde_json::from_slice::<DiscreteMeasure>(data) {
        let back: DiscreteMeasure = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(m.total() <= 1.into());
    }
    if let Ok((mu, nu)) = serde_json::from_slice::<(DiscreteMeasure, DiscreteMeasure)>(data) {
        if let Ok(pair) = split_measures(&mu, &nu) {
            // the common part cancels, so the orthogonal parts differ by the totals
            assert_eq!(pair.mu_tilde.total() - pair.nu_tilde.total(), mu.total() - nu.total());
        }
    }
});
