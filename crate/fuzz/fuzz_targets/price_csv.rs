#![no_main]

use libfuzzer_sys::fuzz_target;
use wsqaoa::portfolio::{estimate_mu_sigma, load_price_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(series) = load_price_csv(text) {
        assert_eq!(series.rows(), series.dates.len());
        let _ = estimate_mu_sigma(&series);
    }
});
