//! Mesh text parsing: no panics, and accepted meshes survive a write/parse round trip.
#![no_main]
use libfuzzer_sys::fuzz_target;
use nudge_ns::mesh::{parse_mesh, write_mesh};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(m) = parse_mesh(s) else { return };
    let again = parse_mesh(&write_mesh(&m)).expect("written mesh must parse");
    assert_eq!(again.hash_hex(), m.hash_hex());
});
