#![no_main]

use libfuzzer_sys::fuzz_target;
use techcast::dataset::{parse_csv, write_csv};

// Anything that parses must survive a write/parse round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(ingested) = parse_csv(data) else { return };
    for s in &ingested.series {
        assert!(s.len() >= 2);
        assert!(s.years().windows(2).all(|w| w[1] == w[0] + 1));
        assert!(s.costs().iter().all(|c| *c > 0.0 && c.is_finite()));
    }
    let mut buf = Vec::new();
    write_csv(&ingested.series, &mut buf).unwrap();
    let again = parse_csv(buf.as_slice()).unwrap();
    assert_eq!(again.series, ingested.series);
});
