#![no_main]

use libfuzzer_sys::fuzz_target;
use snr_sentry::config::parse_algorithm_line;
use snr_sentry::experiment::MatrixSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<MatrixSpec>() {
        assert_eq!(spec.to_string().parse::<MatrixSpec>().expect("display parses"), spec);
    }
    let _ = parse_algorithm_line(text);
});
