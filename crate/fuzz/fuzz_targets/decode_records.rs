#![no_main]

use ftmr_core::record::{decode_records, encode_records};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = decode_records(data) {
        assert_eq!(encode_records(&records).unwrap(), data);
    }
});
