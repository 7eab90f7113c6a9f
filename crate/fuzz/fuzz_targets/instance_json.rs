#![no_main]

use libfuzzer_sys::fuzz_target;
use wsqaoa::encoding::{alpha_min, cost_table, ConstraintScheme};
use wsqaoa::portfolio::ProblemInstance;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(inst) = ProblemInstance::from_json(text) else { return };
    let again = ProblemInstance::from_json(&inst.to_json().unwrap()).unwrap();
    assert_eq!(again, inst);
    if inst.n <= 8 {
        let _ = alpha_min(&inst);
        let _ = cost_table(&inst, &ConstraintScheme::HardDickeComplete);
    }
});
