#![no_main]

use ftmr_core::JobConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = JobConfig::from_text(text) {
        let again = JobConfig::from_text(&cfg.to_text()).expect("printed config parses");
        assert_eq!(cfg.to_text(), again.to_text());
    }
});
