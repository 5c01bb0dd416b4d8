#![no_main]

use libfuzzer_sys::fuzz_target;

// The run-configuration parser must reject arbitrary input with a
// structured error and never panic or abort.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = llab::config::parse_config_str(text);
    }
});
