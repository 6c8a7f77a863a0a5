#![no_main]
use libfuzzer_sys::fuzz_target;
use vxsearch::graph::{parse_graph, write_graph};

fuzz_target!(|data: &[u8]| {
    if let Ok(graph) = parse_graph(data) {
        assert_eq!(write_graph(&graph).unwrap(), data);
    }
});
