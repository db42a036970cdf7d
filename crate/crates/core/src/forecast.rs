//! Quantile forecast containers shared by every model and the evaluation code.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::panel::{Panel, SeriesId};

/// Ordered, distinct probabilities in (0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileSet(Vec<f64>);

impl QuantileSet {
    pub fn new(qs: Vec<f64>) -> Result<Self> {
        if qs.is_empty() {
            return Err(invalid("quantiles", "at least one quantile is required"));
        }
        for &q in &qs {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Domain {
                    name: "quantiles",
                    value: q,
                    reason: "each quantile must lie strictly inside (0, 1)",
                });
            }
        }
        if qs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(
                "quantiles",
                "quantiles must be strictly increasing without duplicates",
            ));
        }
        Ok(Self(qs))
    }

    /// The percentiles requested by the demand-planning use case: P30, P50, P70, P90.
    pub fn demand_default() -> Self {
        Self(vec![0.3, 0.5, 0.7, 0.9])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, q: f64) -> Option<usize> {
        self.0.iter().position(|&x| (x - q).abs() < 1e-12)
    }

    /// `P30`-style label for a quantile.
    pub fn label(q: f64) -> String {
        format!("P{}", (q * 100.0).round() as i64)
    }
}

impl TryFrom<Vec<f64>> for QuantileSet {
    type Error = Error;
    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<QuantileSet> for Vec<f64> {
    fn from(value: QuantileSet) -> Self {
        value.0
    }
}

impl fmt::Display for QuantileSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|q| q.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// An `H × |Q|` block of forecasts, row-major in the horizon step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastMatrix {
    horizon: usize,
    n_quantiles: usize,
    values: Vec<f64>,
}

impl ForecastMatrix {
    pub fn zeros(horizon: usize, n_quantiles: usize) -> Self {
        Self {
            horizon,
            n_quantiles,
            values: vec![0.0; horizon * n_quantiles],
        }
    }

    pub fn from_vec(horizon: usize, n_quantiles: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != horizon * n_quantiles {
            return Err(Error::Shape(format!(
                "{} values for a {horizon}x{n_quantiles} forecast matrix",
                values.len()
            )));
        }
        Ok(Self {
            horizon,
            n_quantiles,
            values,
        })
    }

    /// Replicates a point forecast across every quantile column.
    pub fn from_point(point: &[f64], n_quantiles: usize) -> Self {
        let values = point
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, n_quantiles))
            .collect();
        Self {
            horizon: point.len(),
            n_quantiles,
            values,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_quantiles(&self) -> usize {
        self.n_quantiles
    }

    /// `h` is zero-based here.
    pub fn get(&self, h: usize, q: usize) -> f64 {
        self.values[h * self.n_quantiles + q]
    }

    pub fn set(&mut self, h: usize, q: usize, value: f64) {
        self.values[h * self.n_quantiles + q] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn column(&self, q: usize) -> Vec<f64> {
        (0..self.horizon).map(|h| self.get(h, q)).collect()
    }

    /// Sorts each horizon row so quantile forecasts never cross.
    pub fn sort_rows(&mut self) {
        for row in self.values.chunks_mut(self.n_quantiles) {
            row.sort_by(f64::total_cmp);
        }
    }

    pub fn clip_at_zero(&mut self) {
        for v in &mut self.values {
            *v = v.max(0.0);
        }
    }

    /// Elementwise median over a non-empty collection of equally-shaped matrices.
    pub fn median_of(members: &[ForecastMatrix]) -> Result<ForecastMatrix> {
        let first = members
            .first()
            .ok_or_else(|| invalid("ensemble", "no members to combine"))?;
        if members
            .iter()
            .any(|m| m.horizon != first.horizon || m.n_quantiles != first.n_quantiles)
        {
            return Err(Error::Shape("ensemble members disagree in shape".into()));
        }
        let values = (0..first.values.len())
            .map(|i| {
                let column: Vec<f64> = members.iter().map(|m| m.values[i]).collect();
                crate::util::median(&column).expect("non-empty")
            })
            .collect();
        Ok(ForecastMatrix {
            horizon: first.horizon,
            n_quantiles: first.n_quantiles,
            values,
        })
    }
}

/// Key of one forecast block: a series at one backtest window.
pub type BlockKey = (SeriesId, usize);

/// Quantile forecasts keyed by (series, window); every block is `H × |Q|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastSet {
    quantiles: QuantileSet,
    horizon: usize,
    origins: BTreeMap<usize, NaiveDate>,
    blocks: BTreeMap<BlockKey, ForecastMatrix>,
}

impl ForecastSet {
    pub fn new(quantiles: QuantileSet, horizon: usize) -> Self {
        Self {
            quantiles,
            horizon,
            origins: BTreeMap::new(),
            blocks: BTreeMap::new(),
        }
    }

    pub fn quantiles(&self) -> &QuantileSet {
        &self.quantiles
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn origins(&self) -> &BTreeMap<usize, NaiveDate> {
        &self.origins
    }

    pub fn blocks(&self) -> &BTreeMap<BlockKey, ForecastMatrix> {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, id: &SeriesId, window: usize) -> Option<&ForecastMatrix> {
        self.blocks.get(&(id.clone(), window))
    }

    pub fn insert(
        &mut self,
        id: SeriesId,
        window: usize,
        origin: NaiveDate,
        block: ForecastMatrix,
    ) -> Result<()> {
        if block.horizon() != self.horizon || block.n_quantiles() != self.quantiles.len() {
            return Err(Error::Shape(format!(
                "block for {id} window {window} is {}x{}, expected {}x{}",
                block.horizon(),
                block.n_quantiles(),
                self.horizon,
                self.quantiles.len()
            )));
        }
        match self.origins.get(&window) {
            Some(&o) if o != origin => {
                return Err(invalid(
                    "forecast set",
                    format!("window {window} has origins {o} and {origin}"),
                ))
            }
            _ => {
                self.origins.insert(window, origin);
            }
        }
        self.blocks.insert((id, window), block);
        Ok(())
    }

    /// Writes the long `unique_id,window,ds,h,q,y_hat` table.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["unique_id", "window", "ds", "h", "q", "y_hat"])?;
        for ((id, window), block) in &self.blocks {
            let origin = self.origins[window];
            for h in 0..self.horizon {
                let ds = origin + Duration::days(h as i64 + 1);
                for (qi, q) in self.quantiles.as_slice().iter().enumerate() {
                    w.write_record([
                        id.as_str().to_string(),
                        window.to_string(),
                        ds.to_string(),
                        (h + 1).to_string(),
                        q.to_string(),
                        block.get(h, qi).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a table written by [`ForecastSet::write_csv`]. Every block must be
    /// complete in horizon and quantiles.
    pub fn read_csv<R: Read>(input: R, source: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["unique_id", "window", "ds", "h", "q", "y_hat"] {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                line: 1,
                reason: "expected header unique_id,window,ds,h,q,y_hat".into(),
            });
        }
        let mut qs: Vec<f64> = Vec::new();
        let mut horizon = 0usize;
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let parse_err = |reason: String| Error::Parse {
                path: source.to_path_buf(),
                line,
                reason,
            };
            if record.len() != 6 {
                return Err(parse_err(format!("expected 6 fields, found {}", record.len())));
            }
            let id = SeriesId::new(&record[0]).map_err(|e| parse_err(e.to_string()))?;
            let window: usize = record[1]
                .parse()
                .map_err(|_| parse_err(format!("bad window '{}'", &record[1])))?;
            let ds = NaiveDate::parse_from_str(&record[2], "%Y-%m-%d")
                .map_err(|_| parse_err(format!("bad date '{}'", &record[2])))?;
            let h: usize = record[3]
                .parse()
                .map_err(|_| parse_err(format!("bad horizon step '{}'", &record[3])))?;
            let q: f64 = record[4]
                .parse()
                .map_err(|_| parse_err(format!("bad quantile '{}'", &record[4])))?;
            let y_hat: f64 = record[5]
                .parse()
                .map_err(|_| parse_err(format!("bad value '{}'", &record[5])))?;
            if h == 0 {
                return Err(parse_err("horizon steps start at 1".into()));
            }
            if !qs.iter().any(|&x| x == q) {
                qs.push(q);
            }
            horizon = horizon.max(h);
            rows.push((id, window, ds, h, q, y_hat));
        }
        qs.sort_by(f64::total_cmp);
        let quantiles = QuantileSet::new(qs)?;
        let mut set = ForecastSet::new(quantiles, horizon);
        let mut filled: BTreeMap<BlockKey, (NaiveDate, ForecastMatrix, usize)> = BTreeMap::new();
        for (id, window, ds, h, q, y_hat) in rows {
            let origin = ds - Duration::days(h as i64);
            let qi = set.quantiles.index_of(q).expect("collected above");
            let entry = filled.entry((id, window)).or_insert_with(|| {
                (origin, ForecastMatrix::zeros(horizon, set.quantiles.len()), 0)
            });
            if entry.0 != origin {
                return Err(invalid("forecast csv", format!("inconsistent dates in window {window}")));
            }
            entry.1.set(h - 1, qi, y_hat);
            entry.2 += 1;
        }
        for ((id, window), (origin, block, count)) in filled {
            if count != horizon * set.quantiles.len() {
                return Err(invalid(
                    "forecast csv",
                    format!("block ({id}, {window}) has {count} of {} entries", horizon * set.quantiles.len()),
                ));
            }
            set.insert(id, window, origin, block)?;
        }
        Ok(set)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), path)
    }
}

/// Observed values for each (series, window): the `H` targets after the origin.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Actuals {
    blocks: BTreeMap<BlockKey, Vec<f64>>,
}

impl Actuals {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: SeriesId, window: usize, values: Vec<f64>) {
        self.blocks.insert((id, window), values);
    }

    pub fn get(&self, id: &SeriesId, window: usize) -> Option<&[f64]> {
        self.blocks.get(&(id.clone(), window)).map(Vec::as_slice)
    }

    pub fn blocks(&self) -> &BTreeMap<BlockKey, Vec<f64>> {
        &self.blocks
    }

    /// Looks up the targets of every block in `forecasts` from the panel.
    pub fn for_forecasts(panel: &Panel, forecasts: &ForecastSet) -> Result<Self> {
        let mut actuals = Actuals::new();
        for (id, window) in forecasts.blocks().keys() {
            let origin = forecasts.origins()[window];
            let values = panel.targets_after(id, origin, forecasts.horizon())?;
            actuals.insert(id.clone(), *window, values);
        }
        Ok(actuals)
    }
}
