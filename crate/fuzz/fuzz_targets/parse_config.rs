#![no_main]

use libfuzzer_sys::fuzz_target;
use mixval::config::*;

// first byte picks the schema, the rest is the JSON document
fuzz_target!(|data: &[u8]| {
    let Some((&tag, json)) = data.split_first() else {
        return;
    };
    match tag % 8 {
        0 => drop(parse::<SimulateConfig>(json)),
        1 => drop(parse::<GenerateConfig>(json)),
        2 => drop(parse::<DiscrepancyConfig>(json)),
        3 => drop(parse::<GramConfig>(json)),
        4 => drop(parse::<ValueConfig>(json)),
        5 => drop(parse::<MarginalConfig>(json)),
        6 => drop(parse::<GroundTruthConfig>(json)),
        _ => drop(parse::<BenchConfig>(json)),
    }
});
