#![no_main]

use ftmr_core::config::{format_failure_event, parse_failure_spec};
use ftmr_core::FailureSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(FailureSpec::Events(events)) = parse_failure_spec(text) {
        let printed: Vec<String> = events.iter().map(format_failure_event).collect();
        let reparsed = parse_failure_spec(&printed.join(";")).expect("printed spec parses");
        if events.is_empty() {
            assert_eq!(reparsed, FailureSpec::None);
        } else {
            assert_eq!(reparsed, FailureSpec::Events(events));
        }
    }
});
