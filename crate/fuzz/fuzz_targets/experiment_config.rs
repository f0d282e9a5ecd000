#![no_main]

use extauction::experiments::{config_hash, config_to_string, parse_config};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config(text) {
        let again = parse_config(&config_to_string(&config)).expect("canonical config parses");
        assert_eq!(config, again);
        assert_eq!(config_hash(&config), config_hash(&again));
    }
});
