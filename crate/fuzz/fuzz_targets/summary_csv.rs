#![no_main]

use libfuzzer_sys::fuzz_target;
use techcast::dataset::{parse_summary_csv, write_summary_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = parse_summary_csv(data) else { return };
    let mut buf = Vec::new();
    write_summary_csv(&rows, &mut buf).unwrap();
    let again = parse_summary_csv(buf.as_slice()).unwrap();
    // NaN p-values are legal and never compare equal
    assert_eq!(again.len(), rows.len());
    for (a, b) in again.iter().zip(&rows) {
        assert_eq!((&a.name, a.t, a.mu, a.k, a.theta), (&b.name, b.t, b.mu, b.k, b.theta));
    }
});
