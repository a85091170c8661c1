#![no_main]

use fanet_core::experiment::{aggregate, compare, metrics_csv_string, parse_metrics_csv, SweepAxis};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_metrics_csv(text) {
        let _ = aggregate(&rows, SweepAxis::NUavs);
        let _ = compare(&rows);
        let _ = parse_metrics_csv(&metrics_csv_string(&rows)).expect("serialized rows re-parse");
    }
});
