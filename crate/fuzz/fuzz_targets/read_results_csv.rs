#![no_main]

use frontier_cli::read_results_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = read_results_csv(text) {
        assert!(t.rows.iter().all(|r| r.len() == t.columns.len()));
        // written tables read back unchanged
        let back = read_results_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }
});
