#![no_main]

use libfuzzer_sys::fuzz_target;
use snr_sentry::textio::{format_matrix, parse_matrix};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_matrix(text) {
        let again = parse_matrix(&format_matrix(&m)).expect("formatted matrix parses");
        assert_eq!(again, m);
    }
});
