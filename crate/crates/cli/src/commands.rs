use anyhow::{bail, Context, Result};
use log::warn;
use serde::Serialize;
use serde_json::json;
use techcast::applications::{
    crossing_curve, crossing_horizon, deterministic_trend_crossing, forecast_technology, write_band_csv,
    write_crossing_csv, write_quantile_csv, CrossingSpec, CrossingTech, Window,
};
use techcast::dataset::{
    ingest_csv, mu_k_regression, select_improving, summarize, write_summary_csv, SeriesSummary, TechnologySeries,
};
use techcast::hindcast::{error_growth, hindcast_corpus, predicted_xi, write_growth_csv, write_records_csv};
use techcast::models::estimate_rwd;
use techcast::surrogate::{
    distribution_deviation_test, estimate_theta_matched, estimate_theta_weighted, null_xi_band, parse_theta_grid,
    robustness_suite, theta_forecast_sweep, write_band_csv as write_xi_band_csv, RobustnessOptions, RobustnessSpec,
    SurrogateConfig, TemplateEntry, DEFAULT_BAND_REPLICATIONS, DEFAULT_DEVIATION_REPLICATIONS,
    DEFAULT_MATCH_REPLICATIONS,
};
use techcast::Error;

use crate::args::{
    CompareArgs, DescribeArgs, ForecastArgs, HindcastArgs, SelectionArgs, ThetaSource, TrendArgs, ValidateArgs,
    WindowArg,
};
use crate::output::OutDir;

fn load(path: &std::path::Path) -> Result<Vec<TechnologySeries>> {
    let ingested = ingest_csv(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ingested.series)
}

/// Improving technologies unless `--all-series`.
fn select(series: Vec<TechnologySeries>, sel: &SelectionArgs) -> Result<Vec<TechnologySeries>> {
    let kept = if sel.all_series {
        series
    } else {
        let s = select_improving(&series, sel.alpha);
        for t in &s.excluded {
            log::info!("{}: not improving at alpha = {}", t.name, sel.alpha);
        }
        s.improving
    };
    if kept.is_empty() {
        return Err(Error::EmptyInput).context("no technology passes the selection");
    }
    Ok(kept)
}

fn summaries(series: &[TechnologySeries], alpha: f64) -> Result<(Vec<SeriesSummary>, Vec<String>)> {
    let mut out = Vec::new();
    let mut short = Vec::new();
    for s in series {
        match summarize(s, alpha) {
            Ok(x) => out.push(x),
            Err(Error::TooShort { .. }) => {
                warn!("{}: too short to summarize", s.name);
                short.push(s.name.clone());
            }
            Err(e) => return Err(e).with_context(|| format!("summarizing {}", s.name)),
        }
    }
    Ok((out, short))
}

pub fn describe(args: &DescribeArgs) -> Result<()> {
    let ingested = ingest_csv(&args.io.input).with_context(|| format!("reading {}", args.io.input.display()))?;
    let (rows, too_short) = summaries(&ingested.series, args.alpha)?;
    let improving = rows.iter().filter(|s| s.improving).count();
    let excluded: Vec<&str> = rows.iter().filter(|s| !s.improving).map(|s| s.name.as_str()).collect();

    let mut out = OutDir::create(&args.io.out)?;
    out.write("summary.csv", |w| write_summary_csv(&rows, w))?;
    let regression = match mu_k_regression(&rows) {
        Ok(r) => Some(r),
        Err(Error::TooShort { .. }) => {
            warn!("fewer than three improving technologies, no mu-K regression");
            None
        }
        Err(e) => return Err(e.into()),
    };
    out.json(
        "describe.json",
        &json!({
            "n_series": rows.len(),
            "n_improving": improving,
            "excluded": excluded,
            "too_short": too_short,
            "dropped_short": ingested.dropped_short,
            "gap_warnings": ingested.gap_warnings,
            "regression": regression,
        }),
    )?;

    say!(
        "{:<32} {:>4} {:>8} {:>8} {:>7} {:>7}  improving",
        "technology",
        "T",
        "mu",
        "p",
        "K",
        "theta"
    );
    for s in &rows {
        let theta = s.theta.map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into());
        say!(
            "{:<32} {:>4} {:>8.3} {:>8.3} {:>7.3} {:>7}  {}",
            s.name,
            s.t,
            s.mu,
            s.p_value,
            s.k,
            theta,
            if s.improving { "yes" } else { "no" }
        );
    }
    say!("{improving} improving, {} excluded", excluded.len());
    if let Some(r) = &regression {
        say!(
            "K = {:.4} + {:.3} mu (R^2 {:.3}); ln K = {:.3} + {:.3} ln(-mu) (R^2 {:.3})",
            r.linear.intercept,
            r.linear.slope,
            r.linear.r_squared,
            r.log_log.intercept,
            r.log_log.slope,
            r.log_log.r_squared
        );
    }
    out.manifest("describe", args, json!({ "alpha": args.alpha }))
}

pub fn hindcast(args: &HindcastArgs) -> Result<()> {
    let series = select(load(&args.io.input)?, &args.selection)?;
    let h = hindcast_corpus(&series, args.window, args.tau_max)?;
    let curve = error_growth(&h.records, args.tau_max, args.weighting.into())
        .context("no forecast fits in any series at this window")?;

    let mut out = OutDir::create(&args.io.out)?;
    out.write("records.csv", |w| write_records_csv(&h.records, w))?;
    out.write("growth.csv", |w| {
        write_growth_csv(&curve, args.window, args.theta, None, w)
    })?;
    out.json(
        "hindcast.json",
        &json!({
            "n_series": series.len(),
            "n_records": h.records.len(),
            "skipped_windows": h.skipped_windows,
            "too_short": h.too_short,
        }),
    )?;
    say!(
        "{} forecasts from {} technologies ({} too short, {} windows skipped)",
        h.records.len(),
        series.len() - h.too_short.len(),
        h.too_short.len(),
        h.skipped_windows
    );
    let predicted = predicted_xi(curve.horizons(), args.window, 0.0)?;
    for (p, xi0) in curve.points.iter().zip(predicted) {
        say!(
            "tau {:>3}  n {:>6}  xi {:>9.3}  rwd {:>9.3}",
            p.tau,
            p.n_forecasts,
            p.xi,
            xi0
        );
    }
    out.manifest("hindcast", args, json!({ "n_records": h.records.len() }))
}

fn parse_robustness(text: &str) -> Result<RobustnessSpec> {
    let (kind, value) = text.split_once('=').unwrap_or((text, ""));
    let list = |v: &str| -> Result<Vec<f64>> {
        v.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number `{x}` in `{text}`"))
            })
            .collect()
    };
    let int = |v: &str| {
        v.trim()
            .parse::<usize>()
            .with_context(|| format!("bad integer in `{text}`"))
    };
    let spec = match kind {
        "vary-m" => RobustnessSpec::VaryM(v_usize(list(value)?)?),
        "half" => RobustnessSpec::HalfDataset {
            trials: if value.is_empty() { 1000 } else { int(value)? },
            size: None,
        },
        "tau-max" => RobustnessSpec::TauMax(int(value)?),
        "fat-tails" => RobustnessSpec::FatTails(list(value)?),
        _ => bail!(Error::InvalidArgument(format!(
            "unknown robustness check `{text}`; expected vary-m=, half=, tau-max= or fat-tails="
        ))),
    };
    Ok(spec)
}

fn v_usize(v: Vec<f64>) -> Result<Vec<usize>> {
    v.into_iter()
        .map(|x| {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                bail!(Error::InvalidArgument(format!("window {x} is not a whole number")))
            }
        })
        .collect()
}

#[derive(Serialize)]
struct DeviationSummary {
    label: &'static str,
    theta: f64,
    n_records: usize,
    observed: techcast::surrogate::Deviation,
    p_sum_abs: f64,
    p_sum_sq: f64,
    p_max_abs: f64,
}

pub fn validate(args: &ValidateArgs) -> Result<()> {
    let robustness: Vec<RobustnessSpec> = args
        .robustness
        .iter()
        .map(|r| parse_robustness(r))
        .collect::<Result<_>>()?;
    let grid = parse_theta_grid(&args.grid)?;
    let series = select(load(&args.io.input)?, &args.selection)?;
    let (rows, _) = summaries(&series, args.selection.alpha)?;
    let h = hindcast_corpus(&series, args.window, args.tau_max)?;
    let observed = error_growth(&h.records, args.tau_max, args.weighting.into())
        .context("no forecast fits in any series at this window")?;
    let template: Vec<TemplateEntry> = rows.iter().map(TemplateEntry::from_summary).collect();
    let reps = |default: usize| args.reps.unwrap_or(default);
    let base = SurrogateConfig {
        tau_max: args.tau_max,
        seed: args.seed,
        weighting: args.weighting.into(),
        ..SurrogateConfig::new(template, args.window, 0.0, reps(DEFAULT_BAND_REPLICATIONS))
    };
    let mut out = OutDir::create(&args.io.out)?;

    let weighted = match estimate_theta_weighted(&rows, &h.records) {
        Ok(w) => Some(w),
        Err(Error::AllBoundary) => {
            warn!("every per-series MA estimate is on the boundary, no weighted theta");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let matched = if args.theta.is_none() && args.theta_from == ThetaSource::Matched {
        let cfg = SurrogateConfig {
            replications: reps(DEFAULT_MATCH_REPLICATIONS),
            ..base.clone()
        };
        let fit = estimate_theta_matched(&observed, &cfg, &grid)?;
        if !fit.bracketed {
            warn!(
                "Z(theta) does not cross 1 on the grid, theta_m = {} is an endpoint",
                fit.theta_m
            );
        }
        Some(fit)
    } else {
        None
    };
    let theta = match (args.theta, args.theta_from) {
        (Some(t), _) => t,
        (None, ThetaSource::Matched) => matched.as_ref().expect("computed above").theta_m,
        (None, ThetaSource::Weighted) => match &weighted {
            Some(w) => w.theta_w,
            None => bail!(Error::AllBoundary),
        },
    };
    out.json(
        "theta.json",
        &json!({ "theta": theta, "weighted": weighted, "matched": matched }),
    )?;
    say!("theta = {theta:.3}");
    if let Some(w) = &weighted {
        say!(
            "  weighted MLE theta_w = {:.3} ({} on the boundary)",
            w.theta_w,
            w.excluded.len()
        );
    }
    if let Some(m) = &matched {
        say!("  matched theta_m = {:.3}", m.theta_m);
    }

    let band0 = null_xi_band(&base, Some(&observed))?;
    out.write("band_theta0.csv", |w| write_xi_band_csv(&band0, w))?;
    let band = null_xi_band(&base.with_theta(theta), Some(&observed))?;
    out.write("band_theta.csv", |w| write_xi_band_csv(&band, w))?;
    let outside = |b: &techcast::surrogate::XiBand| {
        b.horizons
            .iter()
            .zip(&b.ensembles)
            .filter(|(tau, e)| observed.xi_at(**tau).is_some_and(|x| !e.contains(x)))
            .count()
    };
    say!(
        "error growth outside the 95% band: {} of {} horizons at theta = 0, {} at theta = {theta:.3}",
        outside(&band0),
        band0.horizons.len(),
        outside(&band)
    );

    let mut candidates = vec![("resolved", theta)];
    if let Some(w) = &weighted {
        if w.theta_w != theta {
            candidates.push(("weighted", w.theta_w));
        }
    }
    let mut deviation = Vec::new();
    for (label, th) in candidates {
        let cfg = SurrogateConfig {
            replications: reps(DEFAULT_DEVIATION_REPLICATIONS),
            ..base.with_theta(th)
        };
        let test = distribution_deviation_test(&h.records, &cfg)?;
        let [p_sum_abs, p_sum_sq, p_max_abs] = test.p_values();
        say!(
            "deviation from t({}) at theta = {th:.3}: p = {p_sum_abs:.3} (sum |d|), {p_sum_sq:.3} (sum d^2), {p_max_abs:.3} (max |d|)",
            args.window - 1
        );
        deviation.push(DeviationSummary {
            label,
            theta: th,
            n_records: test.n_records,
            observed: test.observed,
            p_sum_abs,
            p_sum_sq,
            p_max_abs,
        });
    }
    out.json("deviation.json", &deviation)?;

    if args.sweep {
        let horizons: Vec<usize> = (1..=args.tau_max).collect();
        let sweep = theta_forecast_sweep(&series, args.window, &grid, &horizons)?;
        out.json("sweep.json", &sweep)?;
    }
    let opts = RobustnessOptions {
        m: args.window,
        tau_max: args.tau_max,
        theta,
        replications: reps(DEFAULT_BAND_REPLICATIONS),
        seed: args.seed,
        weighting: args.weighting.into(),
    };
    for (i, spec) in robustness.iter().enumerate() {
        let report = robustness_suite(&series, spec, &opts)?;
        out.json(
            &format!("robustness_{}.json", i + 1),
            &json!({ "check": spec, "report": report }),
        )?;
    }

    out.manifest(
        "validate",
        args,
        json!({
            "theta": theta,
            "grid": grid,
            "replications": {
                "band": reps(DEFAULT_BAND_REPLICATIONS),
                "deviation": reps(DEFAULT_DEVIATION_REPLICATIONS),
                "matching": reps(DEFAULT_MATCH_REPLICATIONS),
            },
            "robustness": robustness,
            "n_series": series.len(),
            "n_records": h.records.len(),
        }),
    )
}

fn find<'a>(series: &'a [TechnologySeries], name: &str) -> Result<&'a TechnologySeries> {
    series
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownTechnology(name.to_string()).into())
}

pub fn forecast(args: &ForecastArgs) -> Result<()> {
    let series = load(&args.io.input)?;
    let tech = find(&series, &args.tech)?;
    let window = match args.window {
        WindowArg::All => Window::All,
        WindowArg::Value(m) => Window::Value(m),
    };
    let forecasts = forecast_technology(tech, args.horizon, args.theta, window)?;
    let origin_year = *tech.years().last().expect("non-empty series");
    let records = forecasts
        .iter()
        .map(|f| f.forecast.to_record(&tech.name, origin_year))
        .collect::<techcast::Result<Vec<_>>>()?;

    let mut out = OutDir::create(&args.io.out)?;
    out.json("forecast.json", &records)?;
    out.write("quantiles.csv", |w| write_quantile_csv(&forecasts, w))?;
    out.write("bands.csv", |w| write_band_csv(&forecasts, w))?;
    let m = forecasts[0].forecast.df as usize + 1;
    let est = estimate_rwd(tech, tech.len() - 1, m)?;
    say!(
        "{}: m = {m}, mu_hat = {:.4}, K_hat = {:.4}, theta = {}",
        tech.name,
        est.mu_hat,
        est.k_hat,
        args.theta
    );
    say!(
        "{:>5} {:>6} {:>12} {:>12} {:>12}",
        "tau",
        "year",
        "q05",
        "median",
        "q95"
    );
    for (f, r) in forecasts.iter().zip(&records) {
        say!(
            "{:>5} {:>6} {:>12.5} {:>12.5} {:>12.5}",
            r.horizon,
            f.year,
            r.quantiles.p05,
            r.quantiles.p50,
            r.quantiles.p95
        );
    }
    out.manifest(
        "forecast",
        args,
        json!({ "m": m, "mu_hat": est.mu_hat, "K_hat": est.k_hat, "origin_year": origin_year }),
    )
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let (tech_a, m) = match (&args.input, &args.tech) {
        (Some(path), Some(name)) => {
            let series = load(path)?;
            let s = find(&series, name)?;
            let m = args.window.unwrap_or(s.len() - 1);
            let est = estimate_rwd(s, s.len() - 1, m)?;
            let a = CrossingTech {
                current_log_cost: *s.log_costs().last().expect("non-empty series"),
                mu: est.mu_hat,
                k: est.k_hat,
                m,
            };
            (a, m)
        }
        _ => {
            let Some(m) = args.window else {
                bail!(Error::InvalidArgument("--window is required without --input".into()));
            };
            let (Some(cost), Some(mu), Some(k)) = (args.a_cost, args.a_mu, args.a_k) else {
                bail!(Error::InvalidArgument("need --a-cost, --a-mu and --a-k".into()));
            };
            (
                CrossingTech {
                    current_log_cost: log_cost(cost)?,
                    mu,
                    k,
                    m,
                },
                m,
            )
        }
    };
    let horizons: Vec<f64> = (1..=args.horizon).map(|t| t as f64).collect();
    let mut out = OutDir::create(&args.out)?;
    let mut scenarios = Vec::new();
    for &k_b in &args.b_k {
        let spec = CrossingSpec {
            tech_a,
            tech_b: CrossingTech {
                current_log_cost: log_cost(args.b_cost)?,
                mu: args.b_mu,
                k: k_b,
                m,
            },
            theta: args.theta,
        };
        let curve = crossing_curve(&spec, &horizons)?;
        let file = format!("crossing_K{k_b}.csv");
        out.write(&file, |w| write_crossing_csv(&curve, w))?;
        let half = if args.horizon > 1 {
            crossing_horizon(&spec, 1.0, args.horizon as f64).ok()
        } else {
            None
        };
        match half {
            Some(t) => say!("K_b = {k_b}: p = 1/2 at tau = {t:.2}"),
            None => say!("K_b = {k_b}: p does not pass 1/2 within {} years", args.horizon),
        }
        scenarios.push(json!({ "K_b": k_b, "tau_half": half, "file": file }));
    }
    out.json("compare.json", &json!({ "tech_a": tech_a, "scenarios": scenarios }))?;
    out.manifest("compare", args, json!({ "m": m, "tech_a": tech_a }))
}

fn log_cost(c: f64) -> Result<f64> {
    if c <= 0.0 || !c.is_finite() {
        bail!(Error::InvalidArgument(format!("cost must be positive, got {c}")));
    }
    Ok(c.ln())
}

pub fn trend(args: &TrendArgs) -> Result<()> {
    let years = deterministic_trend_crossing(args.f, args.gf, args.s, args.gs)?;
    say!("{years:.1} years");
    let mut out = OutDir::create(&args.out)?;
    out.json("trend.json", &json!({ "years": years }))?;
    out.manifest("trend", args, json!({ "years": years }))
}
