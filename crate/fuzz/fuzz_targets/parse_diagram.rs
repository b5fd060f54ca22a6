//! Fuzzes the diagram parser: parsing must never panic, and any accepted
//! diagram must survive a write/reparse round trip byte-identically.

#![no_main]

use idsolve::format::{parse_diagram, write_diagram};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(diagram) = parse_diagram(text) else {
        return;
    };
    // Validation must be total on parseable input.
    let _ = diagram.validate();

    let canonical = write_diagram(&diagram);
    let reparsed = parse_diagram(&canonical).expect("canonical output must reparse");
    assert_eq!(
        write_diagram(&reparsed),
        canonical,
        "canonical form must be a fixed point"
    );
});
