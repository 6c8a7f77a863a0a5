//! Decoder robustness: arbitrary and mutated inputs never panic, and any
//! accepted binary index re-encodes to the exact input bytes.

use std::path::PathBuf;

use proptest::prelude::*;
use vxsearch::dataset::{parse_bvecs, parse_fvecs, parse_ivecs};
use vxsearch::graph::{parse_adjacency_text, parse_graph, write_graph};
use vxsearch::ivf::{parse_index, write_index};

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.into_iter().map(|p| std::fs::read(p).unwrap()).collect()
}

fn all_decoders(bytes: &[u8]) {
    let _ = parse_fvecs(bytes);
    let _ = parse_bvecs(bytes);
    let _ = parse_ivecs(bytes);
    if let Ok(index) = parse_index(bytes) {
        assert_eq!(write_index(&index).unwrap(), bytes);
    }
    if let Ok(graph) = parse_graph(bytes) {
        assert_eq!(write_graph(&graph).unwrap(), bytes);
    }
    if let Ok(text) = std::str::from_utf8(bytes) {
        let _ = parse_adjacency_text(text);
    }
}

#[test]
fn corpus_seeds_decode() {
    for seed in corpus("vxiv") {
        assert_eq!(write_index(&parse_index(&seed).unwrap()).unwrap(), seed);
    }
    for seed in corpus("vxgr") {
        assert_eq!(write_graph(&parse_graph(&seed).unwrap()).unwrap(), seed);
    }
    for seed in corpus("ivecs") {
        parse_ivecs(&seed).unwrap();
    }
    for seed in corpus("bvecs") {
        parse_bvecs(&seed).unwrap();
    }
    for seed in corpus("adjacency_text") {
        parse_adjacency_text(std::str::from_utf8(&seed).unwrap()).unwrap();
    }
    let fvecs = corpus("fvecs");
    assert!(fvecs.iter().any(|s| parse_fvecs(s).is_ok()));
}

fn seeds() -> Vec<Vec<u8>> {
    ["fvecs", "bvecs", "ivecs", "vxiv", "vxgr", "adjacency_text"]
        .iter()
        .flat_map(|t| corpus(t))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        all_decoders(&bytes);
    }

    #[test]
    fn mutated_seeds(
        pick in any::<prop::sample::Index>(),
        edits in proptest::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..6),
        cut in any::<prop::sample::Index>(),
        truncate in any::<bool>(),
    ) {
        let all = seeds();
        let mut bytes = all[pick.index(all.len())].clone();
        for (at, value) in edits {
            let i = at.index(bytes.len());
            bytes[i] = value;
        }
        if truncate {
            bytes.truncate(cut.index(bytes.len() + 1));
        }
        all_decoders(&bytes);
    }
}
