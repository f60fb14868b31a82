#![no_main]

use libfuzzer_sys::fuzz_target;
use matprod::bernoulli::{decompose_word, format_word, parse_word};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(w) = parse_word(s) {
            let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            assert_eq!(format_word(&w), compact);
            assert_eq!(decompose_word(&w).concat(), w);
        }
    }
});
