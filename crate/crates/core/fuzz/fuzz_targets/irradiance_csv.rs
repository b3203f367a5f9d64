#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = hes_flex::data_io::parse_irradiance(data) {
        assert!(s.values.iter().all(|v| *v >= 0.0 && v.is_finite()));
        let _ = hes_flex::data_io::resample_hold(&s, 2);
    }
});
