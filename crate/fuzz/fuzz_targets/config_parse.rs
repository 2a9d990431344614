//! Config parsing and validation never panic; accepted configs echo to an equal spec.
#![no_main]
use libfuzzer_sys::fuzz_target;
use nudge_ns::config::parse_config_str;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let spec = match parse_config_str(s) {
        Ok(spec) => spec,
        Err(e) => {
            let _ = e.to_string();
            return;
        }
    };
    let echo = spec.to_config_text();
    assert_eq!(parse_config_str(&echo).expect("echo must parse"), spec);
    let _ = spec.variants();
});
