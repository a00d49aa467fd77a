#![no_main]

use ghrelax::io::{format_matrix, parse_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_matrix(text) {
        assert!(m.iter().all(|v| v.is_finite()));
        let again = parse_matrix(&format_matrix(&m)).expect("formatted matrix parses");
        assert_eq!(again, m);
    }
});
