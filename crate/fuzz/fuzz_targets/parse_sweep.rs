#![no_main]

use fanet_core::experiment::parse_sweep;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_sweep(text, None) {
        assert_eq!(parse_sweep(&spec.to_toml(), None).expect("serialized sweep re-parses"), spec);
    }
});
