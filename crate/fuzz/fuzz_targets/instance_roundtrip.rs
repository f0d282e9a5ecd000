#![no_main]

use extauction::instance::{instance_hash, instance_to_string, parse_instance};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(profile) = parse_instance(text) else { return };
    let saved = instance_to_string(&profile);
    let back = parse_instance(&saved).expect("saved instance parses");
    assert_eq!(profile, back);
    assert_eq!(instance_hash(&profile), instance_hash(&back));
    assert_eq!(saved, instance_to_string(&back));
});
