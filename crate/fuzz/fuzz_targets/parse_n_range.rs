#![no_main]

use frontier_cli::parse_n_range;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((a, b)) = parse_n_range(text) {
        assert!(a <= b);
        assert_eq!(parse_n_range(&format!("{a}..{b}")).unwrap(), (a, b));
    }
});
