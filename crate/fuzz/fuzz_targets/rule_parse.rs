#![no_main]

use libfuzzer_sys::fuzz_target;
use snr_sentry::TuningRule;

// Canonical form is a fixed point of parse . format.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rule) = text.parse::<TuningRule>() {
        let canonical = rule.to_string();
        let again: TuningRule = canonical.parse().expect("canonical rule parses");
        assert_eq!(again.to_string(), canonical);
    }
});
