#![no_main]

use libfuzzer_sys::fuzz_target;
use mixval::io::parse_contributor;

fuzz_target!(|data: &[u8]| {
    let _ = parse_contributor("S01", data);
});
