//! Snapshot decoding with a length prefix byte choosing the expected dof count.
#![no_main]
use libfuzzer_sys::fuzz_target;
use nudge_ns::truth::archive::{decode_snapshot, encode_snapshot};

fuzz_target!(|data: &[u8]| {
    let Some((&n, bytes)) = data.split_first() else { return };
    if let Ok(v) = decode_snapshot(bytes, n as usize) {
        assert_eq!(v.len(), n as usize);
        assert_eq!(encode_snapshot(&v), bytes);
    }
});
