#![no_main]

use hes_flex::data_io::{parse_trace, write_trace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Parse, write back, parse again: the records must survive.
    if let Ok(records) = parse_trace(data) {
        let mut out = Vec::new();
        write_trace(&records, &mut out).expect("writing to memory");
        let again = parse_trace(out.as_slice()).expect("re-parse of written trace");
        assert_eq!(records, again);
    }
});
