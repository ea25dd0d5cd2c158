#![no_main]

use libfuzzer_sys::fuzz_target;
use rwre::config::parse_horizons;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(hs) = parse_horizons(s) {
        assert!(!hs.is_empty() && hs[0] > 0);
        assert!(hs.windows(2).all(|w| w[0] < w[1]));
    }
});
