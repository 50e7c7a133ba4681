#![no_main]

use libfuzzer_sys::fuzz_target;
use motionlab_core::motion::MotionGraph;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = MotionGraph::from_json(text) {
        let json = g.to_json();
        assert_eq!(MotionGraph::from_json(&json).expect("re-encoded graph decodes").to_json(), json);
    }
});
