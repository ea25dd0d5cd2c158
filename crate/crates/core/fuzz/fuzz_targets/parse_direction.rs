#![no_main]

use libfuzzer_sys::fuzz_target;
use rwre::config::parse_direction;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(xi) = parse_direction(s) {
        let norm: f64 = xi.components().iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-9, "{norm}");
    }
});
