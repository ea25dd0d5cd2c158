#![no_main]

use libfuzzer_sys::fuzz_target;
use rwre::config::parse_law;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(law) = parse_law(s) {
        assert!(law.validate().is_ok());
        for axis in 0..3 {
            let m = law.marginal(axis);
            assert!(m.alpha() > 0.0 && m.beta() >= m.alpha());
            let x = m.sample(0.5);
            assert!(x >= m.alpha() && x <= m.beta());
        }
        let json = serde_json::to_string(&law).unwrap();
        let back: rwre::ConductanceLaw = serde_json::from_str(&json).unwrap();
        assert_eq!(back, law);
    }
});
