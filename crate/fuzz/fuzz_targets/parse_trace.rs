//! Arbitrary bytes as a channel trace CSV. Must not panic, and anything that
//! parses must survive a write/parse round trip unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;

use butler_mimo::experiment::parse_trace;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = parse_trace(data) {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).expect("writing to memory");
        let again = parse_trace(buf.as_slice()).expect("re-parse of written trace");
        assert_eq!(again, trace);
    }
});
