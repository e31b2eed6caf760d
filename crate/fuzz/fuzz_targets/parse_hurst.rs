#![no_main]

use frontier_cli::parse_hurst;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_hurst(text) {
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| x.is_finite()));
        let again: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        assert_eq!(parse_hurst(&again.join(",")).unwrap(), v);
    }
});
