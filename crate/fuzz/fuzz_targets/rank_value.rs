#![no_main]

use ftmr_core::benchmarks::pagerank::RankValue;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(value) = RankValue::decode(data) {
        assert_eq!(value.encode(), data);
    }
});
