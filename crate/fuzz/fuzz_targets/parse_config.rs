#![no_main]

use frontier_cli::config::ExperimentKind;
use frontier_cli::parse_config;
use libfuzzer_sys::fuzz_target;

const KINDS: [ExperimentKind; 6] = [
    ExperimentKind::LevyScan,
    ExperimentKind::WaveMoment,
    ExperimentKind::Diverge,
    ExperimentKind::ThresholdScan,
    ExperimentKind::Simulate,
    ExperimentKind::Classify,
];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = parse_config(text) else { return };
    for kind in KINDS {
        if let Ok(v) = cfg.validate(kind) {
            // a validated config must hash and build its engine inputs without panicking
            let _ = v.hash();
            let _ = v.hurst_vector();
            let _ = v.mollifier_spec();
            let _ = v.grid_spec();
        }
    }
});
