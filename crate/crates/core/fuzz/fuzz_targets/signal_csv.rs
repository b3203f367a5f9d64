#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = hes_flex::data_io::parse_signal(data) {
        // Accepted series honour the signal range.
        assert!(s.values.iter().all(|v| v.abs() <= 1.0));
        assert!(s.gaps.iter().all(|&g| g < s.len()));
    }
});
