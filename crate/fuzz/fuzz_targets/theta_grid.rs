#![no_main]

use libfuzzer_sys::fuzz_target;
use techcast::surrogate::parse_theta_grid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(grid) = parse_theta_grid(text) else { return };
    assert!(!grid.is_empty());
    assert!(grid.iter().all(|t| *t > -1.0 && *t < 1.0));
});
