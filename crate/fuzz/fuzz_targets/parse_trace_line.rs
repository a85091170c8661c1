#![no_main]

use fanet_core::trace::{parse_trace, parse_trace_line, trace_to_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = parse_trace_line(text) {
        let _ = r.tick();
    }
    if let Ok(records) = parse_trace(text) {
        let _ = parse_trace(&trace_to_string(&records)).expect("serialized trace re-parses");
    }
});
