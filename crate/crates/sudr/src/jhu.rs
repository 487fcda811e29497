//! JHU CSSE wide-layout time-series files.
//!
//! Header: `Province/State,Country/Region,Lat,Long,<M/D/YY dates...>`, one
//! row per region, cumulative counts per date.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sudr_core::data::{active_counts, to_prevalence, ActiveCounts, ObservationSeries};
use sudr_core::PopulationScaling;

use crate::error::{Error, Result};

const LEADING_COLUMNS: usize = 4;

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%m/%d/%y").ok()
}

pub fn format_date(d: NaiveDate) -> String {
    use chrono::Datelike;
    format!("{}/{}/{:02}", d.month(), d.day(), d.year() % 100)
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Window {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Config(format!("window end {end} precedes start {start}")));
        }
        Ok(Self { start, end })
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JhuRow {
    pub province: String,
    pub country: String,
    pub lat: String,
    pub long: String,
    pub values: Vec<u64>,
}

/// One wide-layout file.
#[derive(Debug, Clone, PartialEq)]
pub struct JhuTable {
    pub dates: Vec<NaiveDate>,
    pub rows: Vec<JhuRow>,
}

impl JhuTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path)
    }

    pub fn from_reader<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let malformed = |line: u64, message: String| Error::Malformed {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(r) => r.map_err(|e| malformed(1, e.to_string()))?,
            None => return Err(malformed(1, "empty file".into())),
        };
        if header.len() <= LEADING_COLUMNS {
            return Err(malformed(1, "no date columns".into()));
        }
        let dates = header
            .iter()
            .skip(LEADING_COLUMNS)
            .map(|h| parse_date(h).ok_or_else(|| malformed(1, format!("bad date header {h:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if dates.windows(2).any(|w| w[1] != w[0].succ_opt().unwrap_or(w[0])) {
            return Err(malformed(1, "date columns are not consecutive days".into()));
        }
        let mut rows = Vec::new();
        for record in records {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                malformed(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != header.len() {
                return Err(malformed(
                    line,
                    format!("expected {} fields, found {}", header.len(), record.len()),
                ));
            }
            let values = record
                .iter()
                .skip(LEADING_COLUMNS)
                .map(|v| parse_count(v).ok_or_else(|| malformed(line, format!("bad count {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(JhuRow {
                province: record[0].to_string(),
                country: record[1].to_string(),
                lat: record[2].to_string(),
                long: record[3].to_string(),
                values,
            });
        }
        Ok(Self { dates, rows })
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["Province/State".to_string(), "Country/Region".into(), "Lat".into(), "Long".into()];
        header.extend(self.dates.iter().map(|d| format_date(*d)));
        w.write_record(&header).map_err(csv_io)?;
        for row in &self.rows {
            let mut rec = vec![row.province.clone(), row.country.clone(), row.lat.clone(), row.long.clone()];
            rec.extend(row.values.iter().map(u64::to_string));
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush().map_err(|e| Error::io("<output>", e))
    }

    /// Sum of all rows of `country` over `window`.
    pub fn country_totals(&self, country: &str, window: Window) -> Result<Vec<u64>> {
        let rows: Vec<_> = self.rows.iter().filter(|r| r.country == country).collect();
        if rows.is_empty() {
            return Err(Error::MissingCountry(country.to_string()));
        }
        let (first, last) = match (self.dates.first(), self.dates.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(Error::MissingCountry(country.to_string())),
        };
        if window.start < first || window.end > last {
            return Err(Error::WindowOutOfRange {
                start: window.start.to_string(),
                end: window.end.to_string(),
                first: first.to_string(),
                last: last.to_string(),
            });
        }
        let offset = (window.start - first).num_days() as usize;
        Ok((offset..offset + window.days())
            .map(|i| rows.iter().map(|r| r.values[i]).sum())
            .collect())
    }
}

fn parse_count(s: &str) -> Option<u64> {
    let s = s.trim();
    s.parse::<u64>().ok().or_else(|| {
        // Some releases write counts as floats ("12.0").
        let v: f64 = s.parse().ok()?;
        (v >= 0.0 && v.fract() == 0.0).then_some(v as u64)
    })
}

fn csv_io(e: csv::Error) -> Error {
    Error::io("<output>", std::io::Error::other(e))
}

/// Day-to-day decrease in a cumulative series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonicityFlag {
    pub series: String,
    pub date: NaiveDate,
    pub previous: u64,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountrySeries {
    pub country: String,
    pub population: f64,
    pub dates: Vec<NaiveDate>,
    pub confirmed: Vec<u64>,
    pub recovered: Vec<u64>,
    pub deaths: Vec<u64>,
}

impl CountrySeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn window(&self) -> Option<Window> {
        Some(Window {
            start: *self.dates.first()?,
            end: *self.dates.last()?,
        })
    }

    /// Days on which a cumulative series decreases. The values are kept.
    pub fn monotonicity_flags(&self) -> Vec<MonotonicityFlag> {
        let mut flags = Vec::new();
        for (name, series) in [
            ("confirmed", &self.confirmed),
            ("recovered", &self.recovered),
            ("deaths", &self.deaths),
        ] {
            for i in 1..series.len() {
                if series[i] < series[i - 1] {
                    flags.push(MonotonicityFlag {
                        series: name.to_string(),
                        date: self.dates[i],
                        previous: series[i - 1],
                        value: series[i],
                    });
                }
            }
        }
        flags
    }

    pub fn active_documented(&self) -> Result<ActiveCounts> {
        Ok(active_counts(&self.confirmed, &self.recovered, &self.deaths)?)
    }

    /// Removed (recovered plus deceased) counts.
    pub fn removed(&self) -> Vec<u64> {
        self.recovered.iter().zip(&self.deaths).map(|(r, d)| r + d).collect()
    }

    pub fn scaling(&self, alpha: f64) -> Result<PopulationScaling> {
        Ok(PopulationScaling::new(self.population, alpha)?)
    }

    pub fn observations(&self, alpha: f64) -> Result<ObservationSeries> {
        let active = self.active_documented()?;
        let origin = match self.window() {
            Some(w) => format!("{} {}..{}", self.country, w.start, w.end),
            None => self.country.clone(),
        };
        Ok(to_prevalence(&active.counts, self.scaling(alpha)?, origin)?)
    }

    /// The three wide-layout tables holding only this country.
    pub fn to_tables(&self) -> [JhuTable; 3] {
        let table = |values: &Vec<u64>| JhuTable {
            dates: self.dates.clone(),
            rows: vec![JhuRow {
                province: String::new(),
                country: self.country.clone(),
                lat: String::new(),
                long: String::new(),
                values: values.clone(),
            }],
        };
        [table(&self.confirmed), table(&self.recovered), table(&self.deaths)]
    }
}

/// Paths to the confirmed, recovered and deaths files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JhuFiles {
    pub confirmed: PathBuf,
    pub recovered: PathBuf,
    pub deaths: PathBuf,
}

impl JhuFiles {
    /// The standard global file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            confirmed: dir.join("time_series_covid19_confirmed_global.csv"),
            recovered: dir.join("time_series_covid19_recovered_global.csv"),
            deaths: dir.join("time_series_covid19_deaths_global.csv"),
        }
    }
}

pub fn parse_jhu(files: &JhuFiles, country: &str, population: f64, window: Window) -> Result<CountrySeries> {
    let confirmed = JhuTable::read(&files.confirmed)?.country_totals(country, window)?;
    let recovered = JhuTable::read(&files.recovered)?.country_totals(country, window)?;
    let deaths = JhuTable::read(&files.deaths)?.country_totals(country, window)?;
    let dates = (0..window.days())
        .map(|i| window.start + chrono::Days::new(i as u64))
        .collect();
    Ok(CountrySeries {
        country: country.to_string(),
        population,
        dates,
        confirmed,
        recovered,
        deaths,
    })
}

/// Long-format rows `date,country,active,prevalence,masked`.
pub fn write_long<W: Write>(
    writer: W,
    series: &CountrySeries,
    active: &[u64],
    obs: &ObservationSeries,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "country", "active", "prevalence", "masked"]).map_err(csv_io)?;
    for (i, date) in series.dates.iter().enumerate() {
        let masked = obs.is_masked(i);
        let prevalence = obs.values()[i].map_or(String::new(), |v| v.to_string());
        w.write_record([
            date.to_string(),
            series.country.clone(),
            active[i].to_string(),
            prevalence,
            masked.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}
