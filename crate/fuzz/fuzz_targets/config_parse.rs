#![no_main]

use libfuzzer_sys::fuzz_target;
use snr_sentry::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config(text, Some(1)) {
        config.validate().expect("parsed configs are valid");
    }
});
