#![no_main]

use libfuzzer_sys::fuzz_target;
use wsqaoa::encoding::CostTable;
use wsqaoa::quality::{rank_solutions, RankingMode};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = CostTable::from_json(text) else { return };
    for mode in [RankingMode::TwoSet, RankingMode::ByViolationMagnitude] {
        let ranking = rank_solutions(&table, mode);
        assert_eq!(ranking.len(), table.dim());
    }
});
