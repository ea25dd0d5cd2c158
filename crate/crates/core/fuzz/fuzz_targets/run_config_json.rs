#![no_main]

use libfuzzer_sys::fuzz_target;
use rwre::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::from_json_str(s) else { return };
    if let Some(law) = &cfg.law {
        let _ = law.resolve();
    }
    if let Some(t) = &cfg.t {
        let _ = t.resolve();
    }
    if let Some(xi) = &cfg.xi {
        let _ = xi.resolve();
    }
    if let Some(seed) = &cfg.seed {
        let _ = seed.resolve();
    }
    let echoed = serde_json::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::from_json_str(&echoed).unwrap(), cfg);
});
