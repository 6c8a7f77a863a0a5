#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(truth) = vxsearch::dataset::parse_ivecs(data) {
        let _ = truth.validate(truth.len());
    }
});
