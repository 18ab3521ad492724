#![no_main]

use libfuzzer_sys::fuzz_target;
use mixval::io::parse_samples;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_samples(data) {
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.sample.label));
        }
    }
});
