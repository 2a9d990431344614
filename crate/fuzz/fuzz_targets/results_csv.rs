#![no_main]
use libfuzzer_sys::fuzz_target;
use nudge_ns::metrics::TimeSeries;

fuzz_target!(|data: &[u8]| {
    let Ok(ts) = TimeSeries::read_csv(data) else { return };
    let mut out = Vec::new();
    ts.write_csv(&mut out).expect("write to memory");
    let back = TimeSeries::read_csv(out.as_slice()).expect("written csv must parse");
    assert_eq!(back.names(), ts.names());
    assert_eq!(back.len(), ts.len());
});
