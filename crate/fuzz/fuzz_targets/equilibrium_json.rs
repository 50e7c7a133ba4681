#![no_main]

use libfuzzer_sys::fuzz_target;
use motionlab_core::thermo::EquilibriumData;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(eq) = EquilibriumData::from_json(text) {
        let _ = eq.cross_checked_pressure();
        let _ = eq.mu.total_mass();
    }
});
