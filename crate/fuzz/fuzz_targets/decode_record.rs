#![no_main]

use ftmr_core::record::{decode_record, encode_record};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((record, used)) = decode_record(data) {
        assert!(used <= data.len());
        assert_eq!(encode_record(&record).unwrap(), &data[..used]);
    }
});
