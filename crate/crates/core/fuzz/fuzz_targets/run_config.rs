#![no_main]

use hes_flex::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    match RunConfig::from_str_doc(text) {
        Ok(cfg) => assert!(cfg.validate().is_empty()),
        Err(e) => assert!(!e.problems.is_empty()),
    }
});
