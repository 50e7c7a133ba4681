#![no_main]

use libfuzzer_sys::fuzz_target;
use motionlab_core::motion::Family;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(fam) = Family::from_json(text) {
        let json = fam.to_json();
        assert_eq!(Family::from_json(&json).expect("re-encoded family decodes").to_json(), json);
    }
});
