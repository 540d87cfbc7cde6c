#![no_main]

use libfuzzer_sys::fuzz_target;
use techcast::forecasting::parse_forecast_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(records) = parse_forecast_json(text) else { return };
    let q = |r: &techcast::forecasting::ForecastRecord| r.quantiles;
    for r in &records {
        assert!(q(r).p05 <= q(r).p95 && r.sd_log >= 0.0);
    }
    let json = serde_json::to_string(&records).unwrap();
    assert_eq!(parse_forecast_json(&json).unwrap(), records);
});
