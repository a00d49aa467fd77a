#![no_main]

use ghrelax::io::parse_space;
use ghrelax::metric::{distortion_gap_with_limit, trivial_lower_bound};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let strict = data.first().is_some_and(|b| b & 1 == 1);
    let Ok(space) = parse_space(text, strict) else {
        return;
    };
    assert!(space.radius() <= space.diameter());
    if strict {
        assert!(space.diameter() <= 2.0 * space.radius() + 1e-12 + 1e-9 * space.diameter());
    }
    let _ = distortion_gap_with_limit(&space, &space, 10_000);
    assert!(trivial_lower_bound(&space, &space) == 0.0);
});
