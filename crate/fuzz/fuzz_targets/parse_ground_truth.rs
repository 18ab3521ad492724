#![no_main]

use libfuzzer_sys::fuzz_target;
use mixval::io::parse_ground_truth;

fuzz_target!(|data: &[u8]| {
    let _ = parse_ground_truth(data);
});
