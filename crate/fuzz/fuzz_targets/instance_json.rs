//! Instance documents are user-supplied files. Parsing plus the condition check must reject
//! bad input with an error, never a panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(profile) = extauction::instance::instance_from_str(text) {
        let n = profile.n();
        let all = extauction::WinnerSet::full(n);
        for i in 0..n {
            assert!(profile.value(i, all) >= 0.0);
        }
    }
});
