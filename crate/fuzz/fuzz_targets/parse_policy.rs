//! Fuzzes the policy parser against the bundled used-car diagram: parsing
//! must never panic, and accepted policies must round-trip through text.

#![no_main]

use std::sync::OnceLock;

use idsolve::format::{parse_diagram, parse_policy, write_policy};
use idsolve::model::InfluenceDiagram;
use libfuzzer_sys::fuzz_target;

fn diagram() -> &'static InfluenceDiagram {
    static DIAGRAM: OnceLock<InfluenceDiagram> = OnceLock::new();
    DIAGRAM.get_or_init(|| {
        parse_diagram(include_str!("../../data/used-car.id")).expect("bundled diagram parses")
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(rules) = parse_policy(text, diagram()) else {
        return;
    };
    let written = write_policy(&rules, diagram());
    let reparsed = parse_policy(&written, diagram()).expect("written policy must reparse");
    assert_eq!(rules, reparsed, "policy text round trip must be lossless");
});
