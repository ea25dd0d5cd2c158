#![no_main]

use libfuzzer_sys::fuzz_target;
use rwre::config::parse_seed;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(seed) = parse_seed(s) {
        assert_eq!(parse_seed(&seed.to_string()).unwrap(), seed);
        assert_eq!(parse_seed(&format!("0x{seed:x}")).unwrap(), seed);
    }
});
