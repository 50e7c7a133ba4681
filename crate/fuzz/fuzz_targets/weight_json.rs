#![no_main]

use libfuzzer_sys::fuzz_target;
use motionlab_core::Weight;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(w) = Weight::from_json(text) {
        assert_eq!(Weight::from_json(&w.to_json()).expect("re-encoded weight decodes"), w);
    }
});
