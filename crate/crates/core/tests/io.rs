use std::fs;

use techcast::applications::{
    crossing_curve, forecast_technology, write_band_csv, write_crossing_csv, write_quantile_csv, CrossingSpec,
    CrossingTech, Window,
};
use techcast::dataset::{
    ingest_csv, parse_csv, parse_summary_csv, reference_summaries, summarize, write_csv, write_summary_csv,
    TechnologySeries,
};
use techcast::forecasting::parse_forecast_json;
use techcast::hindcast::{error_growth, hindcast_series, write_growth_csv, write_records_csv, Weighting};
use techcast::models::{estimate_rwd, simulate_rwd, Innovation};
use techcast::stats::Rng;
use techcast::surrogate::{null_xi_band, write_band_csv as write_xi_band_csv, SurrogateConfig, TemplateEntry};
use techcast::{forecasting::distributional_forecast, Error};

fn header(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).lines().next().unwrap().to_string()
}

fn sample() -> Vec<TechnologySeries> {
    let root = Rng::new(3);
    (0..4)
        .map(|i| {
            let s = simulate_rwd(-0.05, 0.1, 15 + i, &mut root.derive(i as u64), Innovation::Normal).unwrap();
            TechnologySeries::from_costs(format!("tech {i}"), "energy", 1970 + i as i32, s.costs().to_vec()).unwrap()
        })
        .collect()
}

#[test]
fn series_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("costs.csv");
    let series = sample();
    write_csv(&series, fs::File::create(&path).unwrap()).unwrap();
    let back = ingest_csv(&path).unwrap();
    assert!(back.gap_warnings.is_empty());
    assert_eq!(back.series, series);
}

#[test]
fn column_order_and_case_do_not_matter() {
    let text = "Cost,YEAR,Technology\n2.0,2001,a\n1.5,2000,a\n1.0,2002,a\n";
    let got = parse_csv(text.as_bytes()).unwrap().series;
    assert_eq!(got[0].years(), &[2000, 2001, 2002]);
    assert_eq!(got[0].costs(), &[1.5, 2.0, 1.0]);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let bad_cost = "technology,year,cost\na,2000,1\na,2001,-3\n";
    match parse_csv(bad_cost.as_bytes()) {
        Err(Error::NonPositiveCost { line, year, .. }) => assert_eq!((line, year), (3, 2001)),
        other => panic!("{other:?}"),
    }
    let bad_year = "technology,year,cost\na,2000,1\na,2001,1\na,20x2,1\n";
    match parse_csv(bad_year.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
    let dup = "technology,year,cost\na,2000,1\nb,2000,1\na,2000,2\n";
    assert!(matches!(
        parse_csv(dup.as_bytes()),
        Err(Error::DuplicateYear { line: 4, .. })
    ));
    let missing = "technology,when,cost\na,2000,1\n";
    assert!(matches!(
        parse_csv(missing.as_bytes()),
        Err(Error::Parse { line: 1, .. })
    ));
    assert!(matches!(
        parse_csv("technology,year,cost\n".as_bytes()),
        Err(Error::EmptyInput)
    ));
}

#[test]
fn gaps_keep_the_longest_run() {
    let text = "technology,year,cost\na,1990,5\na,1991,4\na,1995,3\na,1996,2\na,1997,1\nb,2000,1\n";
    let got = parse_csv(text.as_bytes()).unwrap();
    assert_eq!(got.series.len(), 1);
    assert_eq!(got.series[0].years(), &[1995, 1996, 1997]);
    assert_eq!(got.gap_warnings[0].dropped_years, vec![1990, 1991]);
    assert_eq!(got.dropped_short, vec!["b".to_string()]);
}

#[test]
fn summaries_round_trip() {
    let reference = reference_summaries();
    let mut buf = Vec::new();
    write_summary_csv(&reference, &mut buf).unwrap();
    assert_eq!(header(&buf), "technology,sector,T,mu,p_value,K,theta,improving");
    assert_eq!(parse_summary_csv(buf.as_slice()).unwrap(), reference);

    let computed: Vec<_> = sample().iter().map(|s| summarize(s, 0.1).unwrap()).collect();
    let mut buf = Vec::new();
    write_summary_csv(&computed, &mut buf).unwrap();
    assert_eq!(parse_summary_csv(buf.as_slice()).unwrap(), computed);
}

#[test]
fn forecast_records_round_trip_through_json() {
    let s = &sample()[0];
    let est = estimate_rwd(s, s.len() - 1, 5).unwrap();
    let records: Vec<_> = (1..=5)
        .map(|tau| {
            distributional_forecast(&est, *s.log_costs().last().unwrap(), tau as f64, 0.25)
                .unwrap()
                .to_record(&s.name, *s.years().last().unwrap())
                .unwrap()
        })
        .collect();
    let text = serde_json::to_string_pretty(&records).unwrap();
    assert_eq!(parse_forecast_json(&text).unwrap(), records);
    let one = serde_json::to_string(&records[2]).unwrap();
    assert_eq!(parse_forecast_json(&one).unwrap(), vec![records[2].clone()]);

    let extra = one.replacen('{', "{\"surprise\":1,", 1);
    assert!(matches!(parse_forecast_json(&extra), Err(Error::Json(_))));
    let inverted = one
        .replace("\"p05\"", "\"tmp\"")
        .replace("\"p95\"", "\"p05\"")
        .replace("\"tmp\"", "\"p95\"");
    assert!(parse_forecast_json(&inverted).is_err());
}

#[test]
fn output_tables_have_their_headers() {
    let series = sample();
    let h = hindcast_series(&series[3], 5, 20).unwrap();
    let mut buf = Vec::new();
    write_records_csv(&h.records, &mut buf).unwrap();
    assert_eq!(header(&buf), "technology,t0_year,tau,raw_error,norm_error,mu_hat,K_hat");
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), h.records.len() + 1);

    let curve = error_growth(&h.records, 20, Weighting::Pooled).unwrap();
    let mut buf = Vec::new();
    write_growth_csv(&curve, 5, Some(0.25), None, &mut buf).unwrap();
    assert_eq!(
        header(&buf),
        "tau,n_forecasts,n_technologies,xi_empirical,xi_pred_theta0,xi_pred_theta"
    );

    let spec = CrossingSpec {
        tech_a: CrossingTech {
            current_log_cost: 0.0,
            mu: -0.1,
            k: 0.1,
            m: 5,
        },
        tech_b: CrossingTech {
            current_log_cost: -1.0,
            mu: 0.0,
            k: 0.1,
            m: 5,
        },
        theta: 0.0,
    };
    let mut buf = Vec::new();
    write_crossing_csv(&crossing_curve(&spec, &[1.0, 10.0, 20.0]).unwrap(), &mut buf).unwrap();
    assert_eq!(header(&buf), "tau,p_cross");

    let f = forecast_technology(&series[0], 10, 0.25, Window::Value(5)).unwrap();
    let mut buf = Vec::new();
    write_quantile_csv(&f, &mut buf).unwrap();
    assert_eq!(header(&buf), "tau,q05,q16,q50,q84,q95");
    let mut buf = Vec::new();
    write_band_csv(&f, &mut buf).unwrap();
    assert_eq!(
        header(&buf),
        "tau,year,median,lower_1,upper_1,lower_1.5,upper_1.5,lower_2,upper_2"
    );

    let template: Vec<_> = series
        .iter()
        .map(TemplateEntry::from_series)
        .collect::<Result<_, _>>()
        .unwrap();
    let band = null_xi_band(&SurrogateConfig::new(template, 5, 0.0, 20), Some(&curve)).unwrap();
    let mut buf = Vec::new();
    write_xi_band_csv(&band, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("tau,observed"), "{text}");
    assert_eq!(text.lines().count(), band.horizons.len() + 1);
}
