#![no_main]

use ghrelax::io::parse_mapping_pair;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(pair) = parse_mapping_pair(text) {
        assert!(pair.f.iter().all(|&j| j < pair.m()));
        assert!(pair.g.iter().all(|&i| i < pair.n()));
        let dense = pair.to_point().to_dense();
        assert_eq!(dense.sum(), (pair.n() + pair.m()) as f64);
    }
});
