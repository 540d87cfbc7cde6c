//! Technology cost series: ingestion, selection and descriptive statistics.
//!
//! Input is long-format CSV with a `technology,year,cost` header (an
//! optional `sector` column is carried along as metadata). Costs are stored
//! both raw and as natural logs; every model in the crate works on the logs.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::fit_ima_mle;
use crate::stats::{self, ols_fit, one_sided_t_test, OlsFit};

/// Default significance level for the improving-technology filter.
pub const DEFAULT_ALPHA: f64 = 0.10;

/// One technology's annual cost trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologySeries {
    pub name: String,
    pub sector: String,
    years: Vec<i32>,
    costs: Vec<f64>,
    log_costs: Vec<f64>,
}

impl TechnologySeries {
    /// Build from strictly positive costs on consecutive years.
    pub fn from_costs(
        name: impl Into<String>,
        sector: impl Into<String>,
        first_year: i32,
        costs: Vec<f64>,
    ) -> Result<Self> {
        if let Some(bad) = costs.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "costs must be finite and strictly positive, got {bad}"
            )));
        }
        let log_costs = costs.iter().map(|c| c.ln()).collect();
        Self::build(name.into(), sector.into(), first_year, costs, log_costs)
    }

    /// Build from log costs on consecutive years.
    pub fn from_log_costs(
        name: impl Into<String>,
        sector: impl Into<String>,
        first_year: i32,
        log_costs: Vec<f64>,
    ) -> Result<Self> {
        if log_costs.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidArgument("log costs must be finite".into()));
        }
        let costs = log_costs.iter().map(|y| y.exp()).collect();
        Self::build(name.into(), sector.into(), first_year, costs, log_costs)
    }

    fn build(name: String, sector: String, first_year: i32, costs: Vec<f64>, log_costs: Vec<f64>) -> Result<Self> {
        if log_costs.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: log_costs.len(),
            });
        }
        let years = (0..log_costs.len() as i32).map(|i| first_year + i).collect();
        Ok(Self {
            name,
            sector,
            years,
            costs,
            log_costs,
        })
    }

    /// Number of annual observations, T.
    pub fn len(&self) -> usize {
        self.log_costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_costs.is_empty()
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn log_costs(&self) -> &[f64] {
        &self.log_costs
    }

    /// First differences of the log costs (length T - 1).
    pub fn diffs(&self) -> Vec<f64> {
        self.log_costs.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Same costs, shifted by a constant factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let costs = self.costs.iter().map(|c| c * factor).collect();
        Self::from_costs(self.name.clone(), self.sector.clone(), self.years[0], costs)
    }
}

/// A dropped gap-separated stretch of a technology's history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapWarning {
    pub technology: String,
    pub kept: (i32, i32),
    pub dropped_years: Vec<i32>,
}

/// Output of [`parse_csv`]: series in order of first appearance plus any
/// non-fatal warnings.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub series: Vec<TechnologySeries>,
    pub gap_warnings: Vec<GapWarning>,
    pub dropped_short: Vec<String>,
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Ingested> {
    parse_csv(File::open(path)?)
}

struct Column {
    technology: usize,
    year: usize,
    cost: usize,
    sector: Option<usize>,
}

fn locate_columns(headers: &csv::StringRecord) -> Result<Column> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
    };
    let missing = |name: &str| Error::Parse {
        line: 1,
        message: format!("header lacks required column `{name}`"),
    };
    Ok(Column {
        technology: find("technology").ok_or_else(|| missing("technology"))?,
        year: find("year").ok_or_else(|| missing("year"))?,
        cost: find("cost").ok_or_else(|| missing("cost"))?,
        sector: find("sector"),
    })
}

/// Parse long-format `technology,year,cost` CSV.
///
/// Within a technology, observations are sorted by year. When the years
/// have gaps only the longest consecutive run is kept (the most recent run
/// on ties) and a [`GapWarning`] is recorded. Technologies left with fewer
/// than two observations are dropped and listed in `dropped_short`.
pub fn parse_csv<R: Read>(reader: R) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let cols = locate_columns(rdr.headers()?)?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (String, Vec<(i32, f64)>)> = HashMap::new();
    let mut seen: HashSet<(String, i32)> = HashSet::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let technology = field(cols.technology).to_string();
        if technology.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty technology name".into(),
            });
        }
        let year: i32 = field(cols.year).parse().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse year `{}`", field(cols.year)),
        })?;
        let cost: f64 = field(cols.cost).parse().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse cost `{}`", field(cols.cost)),
        })?;
        if !(cost > 0.0) || !cost.is_finite() {
            return Err(Error::NonPositiveCost {
                line,
                technology,
                year,
                cost,
            });
        }
        let sector = cols.sector.map(|i| field(i).to_string()).unwrap_or_default();
        let entry = groups.entry(technology.clone()).or_insert_with(|| {
            order.push(technology.clone());
            (sector, Vec::new())
        });
        if !seen.insert((technology.clone(), year)) {
            return Err(Error::DuplicateYear { line, technology, year });
        }
        entry.1.push((year, cost));
    }
    if order.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut out = Ingested::default();
    for name in order {
        let (sector, mut obs) = groups.remove(&name).expect("grouped");
        obs.sort_by_key(|o| o.0);
        let (start, end) = longest_run(&obs);
        if end - start < obs.len() {
            let dropped_years: Vec<i32> = obs[..start].iter().chain(&obs[end..]).map(|o| o.0).collect();
            let gap = GapWarning {
                technology: name.clone(),
                kept: (obs[start].0, obs[end - 1].0),
                dropped_years,
            };
            warn!(
                "{}: gaps in years, keeping {}-{} and dropping {:?}",
                gap.technology, gap.kept.0, gap.kept.1, gap.dropped_years
            );
            out.gap_warnings.push(gap);
        }
        let run = &obs[start..end];
        if run.len() < 2 {
            warn!("{name}: fewer than two consecutive observations, dropped");
            out.dropped_short.push(name);
            continue;
        }
        let costs = run.iter().map(|o| o.1).collect();
        out.series
            .push(TechnologySeries::from_costs(name, sector, run[0].0, costs)?);
    }
    Ok(out)
}

// [start, end) of the longest stretch of consecutive years; latest wins ties.
fn longest_run(obs: &[(i32, f64)]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut start = 0;
    for i in 1..=obs.len() {
        if i == obs.len() || i64::from(obs[i].0) != i64::from(obs[i - 1].0) + 1 {
            if i - start >= best.1 - best.0 {
                best = (start, i);
            }
            start = i;
        }
    }
    best
}

/// Write series back out in long format; re-ingesting reproduces them.
pub fn write_csv<W: Write>(series: &[TechnologySeries], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let with_sector = series.iter().any(|s| !s.sector.is_empty());
    if with_sector {
        wtr.write_record(["technology", "sector", "year", "cost"])?;
    } else {
        wtr.write_record(["technology", "year", "cost"])?;
    }
    for s in series {
        for (year, cost) in s.years.iter().zip(&s.costs) {
            if with_sector {
                wtr.write_record([&s.name, &s.sector, &year.to_string(), &cost.to_string()])?;
            } else {
                wtr.write_record([&s.name, &year.to_string(), &cost.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Full-sample descriptive statistics of one technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    #[serde(rename = "technology")]
    pub name: String,
    pub sector: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub mu: f64,
    pub p_value: f64,
    #[serde(rename = "K")]
    pub k: f64,
    /// MLE of the MA coefficient; absent when the series is too short.
    pub theta: Option<f64>,
    pub improving: bool,
}

impl SeriesSummary {
    /// `|theta|` at the edge of [-1, 1], which signals a misspecified or
    /// poorly identified MA fit.
    pub fn theta_on_boundary(&self) -> bool {
        self.theta
            .map(|t| t.abs() >= 1.0 - crate::models::BOUNDARY_TOLERANCE)
            .unwrap_or(false)
    }
}

/// Improving-ness rule shared by [`summarize`] and [`select_improving`].
/// `alpha >= 1` admits everything, `alpha <= 0` admits nothing.
pub fn is_improving(p_value: f64, alpha: f64) -> bool {
    if alpha >= 1.0 {
        return true;
    }
    p_value < alpha
}

pub fn summarize(series: &TechnologySeries, alpha: f64) -> Result<SeriesSummary> {
    let t = series.len();
    if t < 3 {
        return Err(Error::TooShort { needed: 3, got: t });
    }
    let diffs = series.diffs();
    let mu = stats::mean(&diffs);
    let ss: f64 = diffs.iter().map(|d| (d - mu) * (d - mu)).sum();
    let k = (ss / (diffs.len() as f64 - 1.0)).sqrt();
    let p_value = one_sided_t_test(&diffs)?;
    let theta = match fit_ima_mle(series) {
        Ok(fit) => Some(fit.theta),
        Err(Error::TooShort { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SeriesSummary {
        name: series.name.clone(),
        sector: series.sector.clone(),
        t,
        mu,
        p_value,
        k,
        theta,
        improving: is_improving(p_value, alpha),
    })
}

/// Partition of a corpus by the one-sided drift test.
#[derive(Debug, Clone, Default)]
pub struct Selection {
    pub improving: Vec<TechnologySeries>,
    pub excluded: Vec<TechnologySeries>,
    /// p-values aligned with the input order.
    pub p_values: Vec<(String, f64)>,
}

/// Keep technologies whose mean log-cost change is significantly negative.
/// Series with fewer than three points cannot be tested and are excluded.
pub fn select_improving(series: &[TechnologySeries], alpha: f64) -> Selection {
    let mut sel = Selection::default();
    for s in series {
        let p = if s.len() >= 3 {
            one_sided_t_test(&s.diffs()).unwrap_or(f64::NAN)
        } else {
            warn!("{}: too short for the drift test, excluded", s.name);
            f64::NAN
        };
        sel.p_values.push((s.name.clone(), p));
        if !p.is_nan() && is_improving(p, alpha) {
            sel.improving.push(s.clone());
        } else {
            sel.excluded.push(s.clone());
        }
    }
    sel
}

/// Cross-sectional relation between drift and volatility.
#[derive(Debug, Clone, Serialize)]
pub struct MuKRegression {
    /// K on mu.
    pub linear: OlsFit,
    /// ln K on ln(-mu).
    pub log_log: OlsFit,
    /// Technologies left out of the log-log fit (mu >= 0 or K = 0).
    pub log_log_excluded: Vec<String>,
}

/// Regress K̃ on μ̃ (linear) and ln K̃ on ln(−μ̃) across the improving
/// summaries.
pub fn mu_k_regression(summaries: &[SeriesSummary]) -> Result<MuKRegression> {
    let improving: Vec<&SeriesSummary> = summaries.iter().filter(|s| s.improving).collect();
    if improving.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: improving.len(),
        });
    }
    let mu: Vec<f64> = improving.iter().map(|s| s.mu).collect();
    let k: Vec<f64> = improving.iter().map(|s| s.k).collect();
    let linear = ols_fit(&mu, &k)?;

    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut log_log_excluded = Vec::new();
    for s in &improving {
        if s.mu < 0.0 && s.k > 0.0 {
            lx.push((-s.mu).ln());
            ly.push(s.k.ln());
        } else {
            warn!("{}: mu >= 0 or K = 0, left out of the log-log fit", s.name);
            log_log_excluded.push(s.name.clone());
        }
    }
    let log_log = ols_fit(&lx, &ly)?;
    Ok(MuKRegression {
        linear,
        log_log,
        log_log_excluded,
    })
}

#[derive(Serialize, Deserialize)]
struct SummaryRow {
    technology: String,
    sector: String,
    #[serde(rename = "T")]
    t: usize,
    mu: f64,
    p_value: f64,
    #[serde(rename = "K")]
    k: f64,
    theta: Option<f64>,
    improving: bool,
}

/// Write summaries as `technology,sector,T,mu,p_value,K,theta,improving`.
pub fn write_summary_csv<W: Write>(summaries: &[SeriesSummary], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in summaries {
        wtr.serialize(SummaryRow {
            technology: s.name.clone(),
            sector: s.sector.clone(),
            t: s.t,
            mu: s.mu,
            p_value: s.p_value,
            k: s.k,
            theta: s.theta,
            improving: s.improving,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read the CSV produced by [`write_summary_csv`].
pub fn parse_summary_csv<R: Read>(reader: R) -> Result<Vec<SeriesSummary>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<SummaryRow>() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let finite = row.mu.is_finite()
            && row.k.is_finite()
            && row.k >= 0.0
            && row.theta.map(|t| t.is_finite() && t.abs() <= 1.0).unwrap_or(true);
        if !finite || row.t < 2 {
            return Err(Error::Parse {
                line: out.len() as u64 + 2,
                message: format!("invalid summary values for `{}`", row.technology),
            });
        }
        out.push(SeriesSummary {
            name: row.technology,
            sector: row.sector,
            t: row.t,
            mu: row.mu,
            p_value: row.p_value,
            k: row.k,
            theta: row.theta,
            improving: row.improving,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

const REFERENCE_SUMMARY: &str = include_str!("../data/reference_summary.csv");

/// Full-sample statistics (T, μ̃, p-value, K̃, θ̃) of the
/// 66-technology performance-curve corpus, rounded to two decimals.
/// The first 53 rows are the improving set.
///
/// Useful as a surrogate template when the raw series are not at hand.
pub fn reference_summaries() -> Vec<SeriesSummary> {
    parse_summary_csv(REFERENCE_SUMMARY.as_bytes()).expect("bundled table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ingest_log_transform() {
        let csv = "technology,year,cost\nX,2000,100\nX,2001,90\nX,2002,81\n";
        let got = parse_csv(csv.as_bytes()).unwrap();
        assert_eq!(got.series.len(), 1);
        let s = &got.series[0];
        assert_eq!(s.years(), &[2000, 2001, 2002]);
        assert_eq!(s.log_costs(), &[100f64.ln(), 90f64.ln(), 81f64.ln()]);
        assert!(got.gap_warnings.is_empty());
    }

    #[test]
    fn ingest_sorts_and_keeps_longest_run() {
        let mut csv = String::from("technology,year,cost\n");
        for y in (2008..=2020).rev() {
            csv.push_str(&format!("T,{y},{}\n", 1.0 + (y - 2000) as f64));
        }
        for y in 2000..=2005 {
            csv.push_str(&format!("T,{y},{}\n", 50.0 - y as f64 + 2000.0));
        }
        let got = parse_csv(csv.as_bytes()).unwrap();
        let s = &got.series[0];
        assert_eq!(s.len(), 13);
        assert_eq!(s.years()[0], 2008);
        assert_eq!(*s.years().last().unwrap(), 2020);
        assert_eq!(got.gap_warnings.len(), 1);
        assert_eq!(got.gap_warnings[0].technology, "T");
        assert_eq!(got.gap_warnings[0].dropped_years, (2000..=2005).collect::<Vec<_>>());
    }

    #[test]
    fn ingest_errors() {
        let zero = "technology,year,cost\nX,2000,1\nX,2001,0\n";
        match parse_csv(zero.as_bytes()).unwrap_err() {
            Error::NonPositiveCost { line, year, .. } => {
                assert_eq!(line, 3);
                assert_eq!(year, 2001);
            }
            e => panic!("unexpected {e}"),
        }
        let dup = "technology,year,cost\nX,2000,1\nX,2000,2\n";
        assert!(matches!(
            parse_csv(dup.as_bytes()).unwrap_err(),
            Error::DuplicateYear { line: 3, .. }
        ));
        let bad = "technology,year,cost\nX,20x0,1\n";
        assert!(matches!(
            parse_csv(bad.as_bytes()).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        let ragged = "technology,year,cost\nX,2000\n";
        assert!(matches!(parse_csv(ragged.as_bytes()).unwrap_err(), Error::Parse { .. }));
        assert!(matches!(
            parse_csv("technology,year,cost\n".as_bytes()).unwrap_err(),
            Error::EmptyInput
        ));
        assert!(matches!(
            parse_csv("tech,year,cost\nX,1,1\n".as_bytes()).unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn sector_column_is_optional() {
        let csv = "year,cost,technology,sector\n1990,2,A,Energy\n1991,1,A,Energy\n";
        let got = parse_csv(csv.as_bytes()).unwrap();
        assert_eq!(got.series[0].sector, "Energy");
    }

    #[test]
    fn single_point_technology_is_dropped() {
        let csv = "technology,year,cost\nA,1990,2\nB,1990,3\nB,1991,2\n";
        let got = parse_csv(csv.as_bytes()).unwrap();
        assert_eq!(got.series.len(), 1);
        assert_eq!(got.dropped_short, vec!["A".to_string()]);
    }

    #[test]
    fn constant_increments_have_zero_volatility() {
        let s = TechnologySeries::from_log_costs("c", "", 0, (0..10).map(|i| -0.25 * i as f64).collect()).unwrap();
        let sum = summarize(&s, DEFAULT_ALPHA).unwrap();
        assert_abs_diff_eq!(sum.mu, -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sum.k, 0.0, epsilon = 1e-15);
        assert_eq!(sum.p_value, 0.0);
        assert!(sum.improving);
    }

    #[test]
    fn alpha_extremes() {
        let up = TechnologySeries::from_log_costs("up", "", 0, (0..6).map(|i| 0.1 * i as f64).collect()).unwrap();
        let down = TechnologySeries::from_log_costs("down", "", 0, vec![0.0, -0.2, -0.25, -0.5, -0.55]).unwrap();
        let corpus = vec![up, down];
        assert_eq!(select_improving(&corpus, 1.0).improving.len(), 2);
        assert_eq!(select_improving(&corpus, 0.0).improving.len(), 0);
        let sel = select_improving(&corpus, DEFAULT_ALPHA);
        assert_eq!(sel.improving[0].name, "down");
        assert_eq!(sel.excluded[0].name, "up");
    }

    #[test]
    fn exact_mu_k_line() {
        let summaries: Vec<SeriesSummary> = (1..8)
            .map(|i| {
                let mu = -0.05 * i as f64;
                SeriesSummary {
                    name: format!("s{i}"),
                    sector: String::new(),
                    t: 10,
                    mu,
                    p_value: 0.0,
                    k: 0.01 - 0.5 * mu,
                    theta: None,
                    improving: true,
                }
            })
            .collect();
        let reg = mu_k_regression(&summaries).unwrap();
        assert_abs_diff_eq!(reg.linear.slope, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(reg.linear.intercept, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(reg.linear.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_log_skips_non_improving_drift() {
        let mut summaries: Vec<SeriesSummary> = (1..6)
            .map(|i| SeriesSummary {
                name: format!("s{i}"),
                sector: String::new(),
                t: 10,
                mu: -0.1 * i as f64,
                p_value: 0.0,
                k: 0.05 * i as f64 + 0.01 * (i % 2) as f64,
                theta: None,
                improving: true,
            })
            .collect();
        summaries[0].k = 0.0;
        let reg = mu_k_regression(&summaries).unwrap();
        assert_eq!(reg.log_log_excluded, vec!["s1".to_string()]);
        assert_eq!(reg.log_log.n, 4);
        assert_eq!(reg.linear.n, 5);
    }

    #[test]
    fn reference_table_shape() {
        let table = reference_summaries();
        assert_eq!(table.len(), 66);
        assert_eq!(table.iter().filter(|s| s.improving).count(), 53);
        assert_eq!(table.iter().filter(|s| s.improving && s.theta_on_boundary()).count(), 8);
        let pv = table.iter().find(|s| s.name == "Photovoltaics").unwrap();
        assert_eq!((pv.t, pv.mu, pv.k), (34, -0.10, 0.15));
    }

    #[test]
    fn summary_csv_roundtrip() {
        let table = reference_summaries();
        let mut buf = Vec::new();
        write_summary_csv(&table, &mut buf).unwrap();
        let back = parse_summary_csv(buf.as_slice()).unwrap();
        assert_eq!(back, table);
    }
}
