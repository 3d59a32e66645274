#![no_main]

use libfuzzer_sys::fuzz_target;
use staticext_cli::solfile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(state) = solfile::parse(text) {
        solfile::parse(&solfile::render(&state)).expect("rendered file parses");
    }
});
