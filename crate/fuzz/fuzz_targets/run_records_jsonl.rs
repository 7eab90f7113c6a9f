#![no_main]

use libfuzzer_sys::fuzz_target;
use wsqaoa::harness::{aggregate, depth_scaling_report, read_jsonl, summarize_sweep};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = read_jsonl(text) {
        let _ = aggregate(&records);
        let _ = depth_scaling_report(&records);
        let _ = summarize_sweep(&records);
    }
});
