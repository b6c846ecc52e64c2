use isonbhd_cli::ExperimentConfig;
use proptest::prelude::*;

/// Body of the `config_json` fuzz target.
fn round_trip(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::from_json(text) else { return };
    let again = serde_json::to_string(&cfg).expect("parsed configs serialize");
    let back = ExperimentConfig::from_json(&again).expect("serialized configs parse");
    assert_eq!(back.sha256(), cfg.sha256());
}

fn seeds() -> Vec<Vec<u8>> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/config_json");
    let mut paths: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn corpus_seeds_parse_and_round_trip() {
    let seeds = seeds();
    assert!(seeds.len() >= 10);
    for s in &seeds {
        ExperimentConfig::from_json(std::str::from_utf8(s).unwrap()).unwrap();
        round_trip(s);
    }
}

proptest! {
    #[test]
    fn mutated_seeds_never_panic(pick in any::<usize>(), edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 0..6)) {
        let seeds = seeds();
        let mut data = seeds[pick % seeds.len()].clone();
        for (at, byte) in edits {
            let i = at % data.len();
            data[i] = byte;
        }
        round_trip(&data);
    }
}
