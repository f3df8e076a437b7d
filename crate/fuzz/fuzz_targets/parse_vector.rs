#![no_main]

use libfuzzer_sys::fuzz_target;
use snr_sentry::textio::{format_vector, parse_vector};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_vector(text) {
        let again = parse_vector(&format_vector(&v)).expect("formatted vector parses");
        assert_eq!(again, v);
    }
});
