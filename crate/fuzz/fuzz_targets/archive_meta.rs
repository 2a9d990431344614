#![no_main]
use libfuzzer_sys::fuzz_target;
use nudge_ns::truth::ArchiveMeta;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(meta) = ArchiveMeta::parse(s) {
        assert_eq!(ArchiveMeta::parse(&meta.to_text()).expect("round trip"), meta);
    }
});
