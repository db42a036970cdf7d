//! Panels of daily series with day-of-week exogenous input and static
//! categorical features.

mod io;
mod synth;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

pub use io::{ingest_csv, panel_paths, write_csv};
pub use synth::{synth_panel, SynthKind, SynthOptions};

/// Names of the static categorical columns, in storage order.
pub const STATIC_FEATURES: [&str; 2] = ["sales_center", "family"];

/// Number of day-of-week categories. Monday is 0.
pub const DAYS_PER_WEEK: usize = 7;

pub fn day_of_week(date: NaiveDate) -> u8 {
    date.weekday().num_days_from_monday() as u8
}

/// Opaque, non-empty series key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SeriesId(String);

impl SeriesId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(invalid("series id", "must be non-empty"));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SeriesId {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SeriesId> for String {
    fn from(value: SeriesId) -> Self {
        value.0
    }
}

impl fmt::Display for SeriesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One dense daily series. Dates are implied by `start` and the position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    start: NaiveDate,
    y: Vec<f64>,
    dow: Vec<u8>,
}

impl Series {
    /// Builds a series; day-of-week is derived from the calendar when `dow` is `None`.
    pub fn new(start: NaiveDate, y: Vec<f64>, dow: Option<Vec<u8>>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::NotEnoughData("series has no observations".into()));
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain {
                name: "y",
                value: *bad,
                reason: "observations must be finite and nonnegative",
            });
        }
        let dow = match dow {
            Some(d) => {
                if d.len() != y.len() {
                    return Err(Error::Shape(format!(
                        "{} day-of-week values for {} observations",
                        d.len(),
                        y.len()
                    )));
                }
                if d.iter().any(|&v| v as usize >= DAYS_PER_WEEK) {
                    return Err(invalid("exog", "day-of-week must be in 0..=6"));
                }
                d
            }
            None => (0..y.len())
                .map(|i| day_of_week(start + Duration::days(i as i64)))
                .collect(),
        };
        Ok(Self { start, y, dow })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(self.y.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn dow(&self) -> &[u8] {
        &self.dow
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.y.len()).map(move |i| self.date_at(i))
    }

    /// Position of `date`, if it falls inside the series.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        (offset >= 0 && (offset as usize) < self.y.len()).then_some(offset as usize)
    }

    /// Number of observations dated on or before `date`.
    pub fn count_through(&self, date: NaiveDate) -> usize {
        let offset = (date - self.start).num_days() + 1;
        offset.clamp(0, self.y.len() as i64) as usize
    }

    /// Restriction to the closed date range `[from, to]`, if non-empty.
    fn slice(&self, from: NaiveDate, to: NaiveDate) -> Option<Series> {
        let lo = (from - self.start).num_days().max(0) as usize;
        let hi = self.count_through(to);
        (lo < hi).then(|| Series {
            start: self.date_at(lo),
            y: self.y[lo..hi].to_vec(),
            dow: self.dow[lo..hi].to_vec(),
        })
    }
}

/// Train/validation/test boundaries. Partitions are `(.., train_end]`,
/// `(train_end, val_end]` and `(val_end, test_end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_end: NaiveDate,
    pub val_end: NaiveDate,
    pub test_end: NaiveDate,
}

impl SplitSpec {
    pub fn new(train_end: NaiveDate, val_end: NaiveDate, test_end: NaiveDate) -> Result<Self> {
        if !(train_end < val_end && val_end < test_end) {
            return Err(invalid(
                "split",
                format!("need train_end < val_end < test_end, got {train_end}, {val_end}, {test_end}"),
            ));
        }
        Ok(Self {
            train_end,
            val_end,
            test_end,
        })
    }

    /// Places the test span at the end of the panel and the validation span
    /// right before it.
    pub fn trailing(panel: &Panel, val_days: i64, test_days: i64) -> Result<Self> {
        let test_end = panel.end_date();
        let val_end = test_end - Duration::days(test_days);
        let train_end = val_end - Duration::days(val_days);
        let spec = Self::new(train_end, val_end, test_end)?;
        if train_end < panel.start_date() {
            return Err(Error::NotEnoughData(format!(
                "panel starting {} is too short for {val_days} validation and {test_days} test days",
                panel.start_date()
            )));
        }
        Ok(spec)
    }

    pub fn test_span_days(&self) -> i64 {
        (self.test_end - self.val_end).num_days()
    }

    pub fn val_span_days(&self) -> i64 {
        (self.val_end - self.train_end).num_days()
    }
}

/// An immutable collection of daily series plus their static categories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    series: BTreeMap<SeriesId, Series>,
    statics: BTreeMap<SeriesId, Vec<String>>,
}

impl Panel {
    /// `statics` is either empty or has one entry per series with one value
    /// per [`STATIC_FEATURES`] column.
    pub fn new(
        series: BTreeMap<SeriesId, Series>,
        statics: BTreeMap<SeriesId, Vec<String>>,
    ) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::NotEnoughData("panel has no series".into()));
        }
        for (id, values) in &statics {
            if !series.contains_key(id) {
                return Err(invalid("statics", format!("unknown series '{id}'")));
            }
            if values.len() != STATIC_FEATURES.len() {
                return Err(Error::Shape(format!(
                    "series '{id}' has {} static values, expected {}",
                    values.len(),
                    STATIC_FEATURES.len()
                )));
            }
        }
        if !statics.is_empty() {
            if let Some(id) = series.keys().find(|id| !statics.contains_key(*id)) {
                return Err(invalid("statics", format!("missing for series '{id}'")));
            }
        }
        Ok(Self { series, statics })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &SeriesId> {
        self.series.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SeriesId, &Series)> {
        self.series.iter()
    }

    pub fn get(&self, id: &SeriesId) -> Option<&Series> {
        self.series.get(id)
    }

    pub fn statics(&self, id: &SeriesId) -> Option<&[String]> {
        self.statics.get(id).map(Vec::as_slice)
    }

    pub fn has_statics(&self) -> bool {
        !self.statics.is_empty()
    }

    pub fn start_date(&self) -> NaiveDate {
        self.series.values().map(Series::start).min().expect("non-empty")
    }

    pub fn end_date(&self) -> NaiveDate {
        self.series.values().map(Series::end).max().expect("non-empty")
    }

    /// Sorted distinct values of each static column.
    pub fn static_vocab(&self) -> Vec<Vec<String>> {
        if self.statics.is_empty() {
            return Vec::new();
        }
        (0..STATIC_FEATURES.len())
            .map(|f| {
                let mut values: Vec<String> =
                    self.statics.values().map(|v| v[f].clone()).collect();
                values.sort();
                values.dedup();
                values
            })
            .collect()
    }

    /// Category ids of a series' statics under [`Panel::static_vocab`].
    pub fn static_ids(&self, id: &SeriesId, vocab: &[Vec<String>]) -> Vec<usize> {
        match self.statics.get(id) {
            None => Vec::new(),
            Some(values) => values
                .iter()
                .zip(vocab)
                .map(|(v, voc)| voc.binary_search(v).unwrap_or(0))
                .collect(),
        }
    }

    /// The `horizon` observations dated strictly after `origin`.
    pub fn targets_after(&self, id: &SeriesId, origin: NaiveDate, horizon: usize) -> Result<Vec<f64>> {
        let series = self
            .get(id)
            .ok_or_else(|| Error::KeyMismatch(format!("series '{id}' not in panel")))?;
        let first = origin + Duration::days(1);
        let start = series.index_of(first).ok_or_else(|| {
            Error::NotEnoughData(format!("series '{id}' has no observation on {first}"))
        })?;
        if start + horizon > series.len() {
            return Err(Error::NotEnoughData(format!(
                "series '{id}' ends before {}",
                origin + Duration::days(horizon as i64)
            )));
        }
        Ok(series.values()[start..start + horizon].to_vec())
    }

    /// Sub-panel over the closed date range; series with no observations in
    /// range are dropped.
    pub fn restrict(&self, from: NaiveDate, to: NaiveDate) -> Result<Panel> {
        let series: BTreeMap<SeriesId, Series> = self
            .series
            .iter()
            .filter_map(|(id, s)| s.slice(from, to).map(|s| (id.clone(), s)))
            .collect();
        if series.is_empty() {
            return Err(Error::NotEnoughData(format!("no observations between {from} and {to}")));
        }
        let statics = self
            .statics
            .iter()
            .filter(|(id, _)| series.contains_key(*id))
            .map(|(id, v)| (id.clone(), v.clone()))
            .collect();
        Panel::new(series, statics)
    }

    /// Disjoint contiguous train/validation/test partitions.
    pub fn split(&self, spec: &SplitSpec) -> Result<(Panel, Panel, Panel)> {
        SplitSpec::new(spec.train_end, spec.val_end, spec.test_end)?;
        let (start, end) = (self.start_date(), self.end_date());
        if spec.train_end < start || spec.test_end > end {
            return Err(invalid(
                "split",
                format!("boundaries must fall inside the panel range {start}..{end}"),
            ));
        }
        let day = Duration::days(1);
        let train = self.restrict(start, spec.train_end)?;
        let val = self.restrict(spec.train_end + day, spec.val_end)?;
        let test = self.restrict(spec.val_end + day, spec.test_end)?;
        Ok((train, val, test))
    }

    /// SHA-256 over ids, dates, values and statics.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for (id, s) in &self.series {
            hasher.update(id.as_str().as_bytes());
            hasher.update([0]);
            hasher.update(s.start.to_string().as_bytes());
            for (v, d) in s.y.iter().zip(&s.dow) {
                hasher.update(v.to_le_bytes());
                hasher.update([*d]);
            }
            if let Some(st) = self.statics.get(id) {
                for v in st {
                    hasher.update(v.as_bytes());
                    hasher.update([0]);
                }
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
