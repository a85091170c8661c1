#![no_main]

use fanet_core::config_io::{config_to_toml, parse_config, parse_config_unchecked};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_config_unchecked(text);
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&config_to_toml(&cfg)).expect("serialized config re-parses");
        assert_eq!(again, cfg);
    }
});
