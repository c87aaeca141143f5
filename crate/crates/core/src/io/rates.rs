use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RATES_HEADER: [&str; 4] = ["date", "policy_rate", "deposit_rate", "lending_rate"];
pub const MIN_OBSERVATIONS: usize = 24;
const MISSING: [&str; 4] = ["", "NA", ".", "NaN"];

/// One dated observation; rates in percent per year, `None` where the source
/// marks the value missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateObservation {
    pub date: NaiveDate,
    pub policy: Option<f64>,
    pub deposit: Option<f64>,
    pub lending: Option<f64>,
}

impl RateObservation {
    fn complete(&self) -> Option<(f64, f64, f64)> {
        Some((self.policy?, self.deposit?, self.lending?))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatesSeries {
    pub observations: Vec<RateObservation>,
}

impl RatesSeries {
    /// Parses `date,policy_rate,deposit_rate,lending_rate` with ISO-8601
    /// dates. Missing values must be written as an empty field, `NA`, `.` or
    /// `NaN`.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = r.headers().map_err(|e| Error::csv("<rates>", e))?.clone();
        if headers.iter().ne(RATES_HEADER.iter().copied()) {
            return Err(Error::malformed(
                "rates csv (line 1)",
                format!("header must be `{}`", RATES_HEADER.join(",")),
            ));
        }
        let mut observations: Vec<RateObservation> = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::csv("<rates>", e))?;
            let raw_date = rec.get(0).unwrap_or("");
            let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
                Error::malformed(
                    format!("rates csv (line {line}, column date)"),
                    format!("`{raw_date}` is not an ISO-8601 date"),
                )
            })?;
            if let Some(prev) = observations.last() {
                if date <= prev.date {
                    return Err(Error::malformed(
                        format!("rates csv (line {line}, column date)"),
                        "dates must be strictly increasing",
                    ));
                }
            }
            let rate = |k: usize| -> Result<Option<f64>> {
                let raw = rec.get(k).unwrap_or("");
                if MISSING.contains(&raw) {
                    return Ok(None);
                }
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Some(v)),
                    _ => Err(Error::malformed(
                        format!("rates csv (line {line}, column {})", RATES_HEADER[k]),
                        format!("`{raw}` is neither a finite number nor a missing marker"),
                    )),
                }
            };
            observations.push(RateObservation {
                date,
                policy: rate(1)?,
                deposit: rate(2)?,
                lending: rate(3)?,
            });
        }
        Ok(RatesSeries { observations })
    }

    pub fn complete_rows(&self) -> usize {
        self.observations
            .iter()
            .filter(|o| o.complete().is_some())
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadStats {
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub fraction_positive: f64,
}

impl SpreadStats {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        SpreadStats {
            mean,
            std: var.sqrt(),
            fraction_positive: xs.iter().filter(|x| **x > 0.0).count() as f64 / n,
        }
    }
}

/// Spreads over the policy rate, as fractions per year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub observations: usize,
    pub skipped_incomplete: usize,
    pub lending_spread: SpreadStats,
    pub deposit_spread: SpreadStats,
    pub pass: bool,
}

/// Checks that lending rates sit above the policy rate by a margin larger
/// than the deposit spread. Only rows with all three rates are used.
pub fn rates_check(series: &RatesSeries) -> Result<SpreadReport> {
    let rows: Vec<(f64, f64, f64)> = series
        .observations
        .iter()
        .filter_map(RateObservation::complete)
        .collect();
    if rows.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData {
            found: rows.len(),
            required: MIN_OBSERVATIONS,
        });
    }
    let lending: Vec<f64> = rows.iter().map(|(p, _, l)| (l - p) / 100.0).collect();
    let deposit: Vec<f64> = rows.iter().map(|(p, d, _)| (d - p) / 100.0).collect();
    let lending_spread = SpreadStats::of(&lending);
    let deposit_spread = SpreadStats::of(&deposit);
    Ok(SpreadReport {
        observations: rows.len(),
        skipped_incomplete: series.observations.len() - rows.len(),
        pass: lending_spread.mean > 0.0 && deposit_spread.mean.abs() < lending_spread.mean,
        lending_spread,
        deposit_spread,
    })
}
