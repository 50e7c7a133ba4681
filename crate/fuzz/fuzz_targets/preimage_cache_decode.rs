#![no_main]

use libfuzzer_sys::fuzz_target;
use motionlab_core::cache::PreimageRecords;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = PreimageRecords::decode(data) {
        let again = PreimageRecords::decode(&records.encode()).expect("re-encoded records decode");
        assert_eq!(again, records);
    }
});
