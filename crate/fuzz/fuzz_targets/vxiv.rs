#![no_main]
use libfuzzer_sys::fuzz_target;
use vxsearch::ivf::{parse_index, write_index, IvfSearchParams};

fuzz_target!(|data: &[u8]| {
    let Ok(index) = parse_index(data) else { return };
    // anything accepted must re-encode to the same bytes and be searchable
    assert_eq!(write_index(&index).unwrap(), data);
    let q = vec![0.5f32; index.dim()];
    let _ = index.search(&q, &IvfSearchParams { nprobe: index.nlist(), k: 1 });
});
