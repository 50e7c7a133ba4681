#![no_main]

use libfuzzer_sys::fuzz_target;
use motionlab_core::RationalMap;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = RationalMap::from_json(text) {
        let again = RationalMap::from_json(&f.to_json()).expect("re-encoded map decodes");
        assert_eq!(again.degree(), f.degree());
    }
});
