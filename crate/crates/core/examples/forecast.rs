//! Distributional forecast for one technology from a long-format cost CSV.
//!
//! ```text
//! cargo run -p techcast --example forecast -- costs.csv Photovoltaics 0.63
//! ```

use std::env;

use techcast::applications::{forecast_technology, Window};
use techcast::dataset::ingest_csv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = env::args().collect();
    let [_, path, name, theta] = &args[..] else {
        return Err("usage: forecast <costs.csv> <technology> <theta>".into());
    };
    let data = ingest_csv(path)?;
    let series = data
        .series
        .iter()
        .find(|s| &s.name == name)
        .ok_or_else(|| format!("no technology named {name}"))?;
    for f in forecast_technology(series, 20, theta.parse()?, Window::All)? {
        println!(
            "{}  median {:.4}  90% interval [{:.4}, {:.4}]",
            f.year,
            f.forecast.median_cost,
            f.forecast.quantile_cost(0.05)?,
            f.forecast.quantile_cost(0.95)?
        );
    }
    Ok(())
}
