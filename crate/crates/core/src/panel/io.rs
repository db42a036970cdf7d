//! Long-format CSV ingestion (`unique_id,ds,y`) with zero-filling of missing days.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};

use super::{Panel, Series, SeriesId, STATIC_FEATURES};
use crate::error::{Error, Result};

struct Rows<'a> {
    path: &'a Path,
    reader: csv::Reader<File>,
}

impl<'a> Rows<'a> {
    fn open(path: &'a Path, header: &[&str]) -> Result<Self> {
        let file = File::open(path)?;
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
        let found: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if found != header {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("expected header {}, found {}", header.join(","), found.join(",")),
            });
        }
        Ok(Self { path, reader })
    }

    /// Visits each data row with its 1-based line number.
    fn for_each(mut self, width: usize, mut f: impl FnMut(u64, &csv::StringRecord) -> Result<(), String>) -> Result<()> {
        for record in self.reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let err = |reason: String| Error::Parse {
                path: self.path.to_path_buf(),
                line,
                reason,
            };
            if record.len() != width {
                return Err(err(format!("expected {width} fields, found {}", record.len())));
            }
            f(line, &record).map_err(err)?;
        }
        Ok(())
    }
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| format!("bad ISO-8601 date '{s}'"))
}

fn parse_id(s: &str) -> Result<SeriesId, String> {
    SeriesId::new(s.trim()).map_err(|e| e.to_string())
}

/// Reads a panel from long CSV files.
///
/// Each series is densified to daily frequency over its own observed range,
/// missing days getting `y = 0`. Without an exog file the day of week is
/// computed from the calendar.
pub fn ingest_csv(series_path: &Path, exog_path: Option<&Path>, statics_path: Option<&Path>) -> Result<Panel> {
    let mut observed: BTreeMap<SeriesId, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    Rows::open(series_path, &["unique_id", "ds", "y"])?.for_each(3, |_, r| {
        let id = parse_id(&r[0])?;
        let ds = parse_date(&r[1])?;
        let y: f64 = r[2].trim().parse().map_err(|_| format!("bad value '{}'", &r[2]))?;
        if !y.is_finite() {
            return Err(format!("non-finite y for ({id}, {ds})"));
        }
        if y < 0.0 {
            return Err(format!("negative y {y} for ({id}, {ds})"));
        }
        if observed.entry(id.clone()).or_default().insert(ds, y).is_some() {
            return Err(format!("duplicate key ({id}, {ds})"));
        }
        Ok(())
    })?;

    let mut dows: BTreeMap<SeriesId, BTreeMap<NaiveDate, u8>> = BTreeMap::new();
    if let Some(path) = exog_path {
        Rows::open(path, &["unique_id", "ds", "dow"])?.for_each(3, |_, r| {
            let id = parse_id(&r[0])?;
            if !observed.contains_key(&id) {
                return Err(format!("exog for unknown series '{id}'"));
            }
            let ds = parse_date(&r[1])?;
            let dow: u8 = r[2].trim().parse().map_err(|_| format!("bad dow '{}'", &r[2]))?;
            if dow > 6 {
                return Err(format!("dow {dow} outside 0..=6"));
            }
            if dows.entry(id.clone()).or_default().insert(ds, dow).is_some() {
                return Err(format!("duplicate key ({id}, {ds})"));
            }
            Ok(())
        })?;
    }

    let mut statics: BTreeMap<SeriesId, Vec<String>> = BTreeMap::new();
    if let Some(path) = statics_path {
        let header = ["unique_id", STATIC_FEATURES[0], STATIC_FEATURES[1]];
        Rows::open(path, &header)?.for_each(3, |_, r| {
            let id = parse_id(&r[0])?;
            if !observed.contains_key(&id) {
                return Err(format!("statics for unknown series '{id}'"));
            }
            let values = vec![r[1].trim().to_string(), r[2].trim().to_string()];
            if statics.insert(id.clone(), values).is_some() {
                return Err(format!("duplicate statics for '{id}'"));
            }
            Ok(())
        })?;
    }

    let mut series = BTreeMap::new();
    for (id, obs) in observed {
        let (&first, _) = obs.first_key_value().expect("at least one row");
        let (&last, _) = obs.last_key_value().expect("at least one row");
        let n = (last - first).num_days() as usize + 1;
        let mut y = vec![0.0; n];
        for (d, v) in &obs {
            y[(*d - first).num_days() as usize] = *v;
        }
        let dow = dows.get(&id).map(|given| {
            (0..n)
                .map(|i| {
                    let d = first + Duration::days(i as i64);
                    given.get(&d).copied().unwrap_or_else(|| super::day_of_week(d))
                })
                .collect()
        });
        series.insert(id, Series::new(first, y, dow)?);
    }
    Panel::new(series, statics)
}

/// Paths of the three files written by [`write_csv`].
pub fn panel_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join("series.csv"), dir.join("exog.csv"), dir.join("statics.csv"))
}

/// Writes `series.csv`, `exog.csv` and (when present) `statics.csv` into `dir`.
/// Returns the paths written.
pub fn write_csv(panel: &Panel, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let (series_path, exog_path, statics_path) = panel_paths(dir);
    let mut ys = csv::Writer::from_writer(BufWriter::new(File::create(&series_path)?));
    let mut xs = csv::Writer::from_writer(BufWriter::new(File::create(&exog_path)?));
    ys.write_record(["unique_id", "ds", "y"])?;
    xs.write_record(["unique_id", "ds", "dow"])?;
    for (id, s) in panel.iter() {
        for (i, d) in s.dates().enumerate() {
            let ds = d.to_string();
            ys.write_record([id.as_str(), &ds, &s.values()[i].to_string()])?;
            xs.write_record([id.as_str(), &ds, &s.dow()[i].to_string()])?;
        }
    }
    ys.flush()?;
    xs.flush()?;
    let mut written = vec![series_path, exog_path];
    if panel.has_statics() {
        let mut st = csv::Writer::from_writer(BufWriter::new(File::create(&statics_path)?));
        st.write_record(["unique_id", STATIC_FEATURES[0], STATIC_FEATURES[1]])?;
        for id in panel.ids() {
            let v = panel.statics(id).expect("statics cover every series");
            st.write_record([id.as_str(), &v[0], &v[1]])?;
        }
        st.flush()?;
        written.push(statics_path);
    }
    Ok(written)
}
