#![no_main]

use libfuzzer_sys::fuzz_target;
use staticext::field::standard;
use staticext_cli::bdfile::BoundaryFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = BoundaryFile::parse(text) else {
        return;
    };
    let again = BoundaryFile::parse(&file.render()).expect("rendered file parses");
    assert_eq!(again, file);
    // Building the fields must fail cleanly, never panic.
    if file.max_degree() <= 4 {
        let disc = standard(8, 4).unwrap();
        let _ = file.to_boundary_data(&disc);
    }
});
