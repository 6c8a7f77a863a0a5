#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = vxsearch::dataset::parse_fvecs(data) {
        let mut out = Vec::new();
        vxsearch::dataset::write_fvecs(&mut out, &set).unwrap();
        assert_eq!(vxsearch::dataset::parse_fvecs(&out).unwrap(), set);
    }
});
