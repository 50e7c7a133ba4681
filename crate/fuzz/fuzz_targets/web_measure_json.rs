#![no_main]

use libfuzzer_sys::fuzz_target;
use motionlab_core::motion::WebMeasure;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(web) = WebMeasure::from_json(text) {
        let json = web.to_json();
        assert_eq!(WebMeasure::from_json(&json).expect("re-encoded web decodes").to_json(), json);
        let _ = web.summary();
    }
});
