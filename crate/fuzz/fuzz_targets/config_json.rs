#![no_main]

use isonbhd_cli::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::from_json(text) else { return };
    let again = serde_json::to_string(&cfg).expect("parsed configs serialize");
    let back = ExperimentConfig::from_json(&again).expect("serialized configs parse");
    assert_eq!(back.sha256(), cfg.sha256());
});
