//! Window construction, early-stopping blocks and ensembles for the neural
//! model kinds.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::NeuralOpts;
use crate::drnn::{train, Drnn, DrnnConfig, DrnnParams, TrainWindow, Window};
use crate::error::{Error, Result};
use crate::forecast::{ForecastMatrix, QuantileSet};
use crate::panel::{Panel, Series, SeriesId, DAYS_PER_WEEK};
use crate::scaling::{extract_level, level_forecast, reconstruct};
use crate::util::{derive_seed, rng};

/// A withheld run of consecutive target days used for early stopping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EarlyStopBlock {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl EarlyStopBlock {
    fn overlaps(&self, from: NaiveDate, to: NaiveDate) -> bool {
        from <= self.end && self.start <= to
    }
}

/// Samples `count` blocks of `length` days inside `[first + input_size,
/// train_end]`, without overlap whenever the span allows it.
pub fn earlystop_blocks(
    first: NaiveDate,
    train_end: NaiveDate,
    input_size: usize,
    count: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<EarlyStopBlock>> {
    let lo = first + Duration::days(input_size as i64);
    let hi = train_end - Duration::days(length as i64 - 1);
    if hi < lo {
        return Err(Error::NotEnoughData(format!(
            "training span {first}..{train_end} cannot hold a {length}-day early-stopping block after {input_size} input days"
        )));
    }
    let n_starts = (hi - lo).num_days() + 1;
    let mut r = rng(seed);
    let make = |offset: i64| {
        let start = lo + Duration::days(offset);
        EarlyStopBlock {
            start,
            end: start + Duration::days(length as i64 - 1),
        }
    };
    let mut blocks: Vec<EarlyStopBlock> = Vec::with_capacity(count);
    let mut attempts = 0;
    while blocks.len() < count && attempts < 1000 {
        attempts += 1;
        let b = make(r.random_range(0..n_starts));
        if blocks.iter().all(|o| !o.overlaps(b.start, b.end)) {
            blocks.push(b);
        }
    }
    while blocks.len() < count {
        blocks.push(make(r.random_range(0..n_starts)));
    }
    blocks.sort();
    Ok(blocks)
}

fn one_hot_dow(dow: &[u8]) -> Vec<f64> {
    let mut out = vec![0.0; dow.len() * DAYS_PER_WEEK];
    for (t, &d) in dow.iter().enumerate() {
        out[t * DAYS_PER_WEEK + d as usize] = 1.0;
    }
    out
}

/// Input window whose last step is index `end` of the series.
fn encode(series: &Series, end: usize, input_size: usize, level: f64, statics: &[usize]) -> Window {
    let from = end + 1 - input_size;
    Window {
        z: series.values()[from..=end].iter().map(|y| y - level).collect(),
        exog: one_hot_dow(&series.dow()[from..=end]),
        statics: statics.to_vec(),
    }
}

fn level_of(history: &[f64], scaled: bool) -> Result<f64> {
    if scaled {
        extract_level(history)
    } else {
        Ok(0.0)
    }
}

struct SeriesView<'a> {
    series: &'a Series,
    /// Observations through the origin.
    n: usize,
    level: f64,
    statics: Vec<usize>,
}

fn views<'a>(panel: &'a Panel, origin: NaiveDate, scaled: bool, vocab: &[Vec<String>]) -> Result<Vec<(SeriesId, SeriesView<'a>)>> {
    panel
        .iter()
        .filter_map(|(id, s)| {
            let n = s.count_through(origin);
            (n > 0).then_some((id, s, n))
        })
        .map(|(id, s, n)| {
            Ok((
                id.clone(),
                SeriesView {
                    series: s,
                    n,
                    level: level_of(&s.values()[..n], scaled)?,
                    statics: panel.static_ids(id, vocab),
                },
            ))
        })
        .collect()
}

pub(crate) struct NeuralData {
    pub train: Vec<TrainWindow>,
    pub earlystop: Vec<TrainWindow>,
}

/// Training windows end every `stride` days back from the origin; windows
/// whose targets touch an early-stopping block go to the early-stopping set
/// instead (only when the targets lie entirely inside a block).
pub(crate) fn build_windows(
    panel: &Panel,
    origin: NaiveDate,
    scaled: bool,
    input_size: usize,
    horizon: usize,
    stride: usize,
    blocks: &[EarlyStopBlock],
    vocab: &[Vec<String>],
) -> Result<NeuralData> {
    let mut data = NeuralData {
        train: Vec::new(),
        earlystop: Vec::new(),
    };
    for (_, v) in views(panel, origin, scaled, vocab)? {
        let s = v.series;
        let window = |end: usize| TrainWindow {
            input: encode(s, end, input_size, v.level, &v.statics),
            target: s.values()[end + 1..end + 1 + horizon].iter().map(|y| y - v.level).collect(),
        };
        if v.n < input_size + horizon {
            continue;
        }
        let mut end = v.n - 1 - horizon;
        loop {
            let (from, to) = (s.date_at(end + 1), s.date_at(end + horizon));
            if blocks.iter().any(|b| b.start <= from && to <= b.end) {
                data.earlystop.push(window(end));
            } else if !blocks.iter().any(|b| b.overlaps(from, to)) {
                data.train.push(window(end));
            }
            if end < input_size - 1 + stride {
                break;
            }
            end -= stride;
        }
    }
    if data.train.is_empty() {
        return Err(Error::NotEnoughData(format!("no training windows before {origin}")));
    }
    if data.earlystop.is_empty() {
        return Err(Error::NotEnoughData(format!("no early-stopping windows before {origin}")));
    }
    Ok(data)
}

/// Trained ensemble of networks sharing one architecture.
#[derive(Clone, Debug)]
pub struct NeuralModel {
    pub net: Drnn,
    pub members: Vec<DrnnParams>,
    pub scaled: bool,
    pub vocab: Vec<Vec<String>>,
    pub sort_quantiles: bool,
}

impl NeuralModel {
    /// Median-of-members forecast for every series with enough history.
    pub fn forecast(&self, panel: &Panel, origin: NaiveDate) -> Result<BTreeMap<SeriesId, ForecastMatrix>> {
        let c = self.net.config();
        let n_in = c.input_size();
        let views = views(panel, origin, self.scaled, &self.vocab)?;
        views
            .par_iter()
            .map(|(id, v)| {
                if v.n < n_in {
                    return Err(Error::NotEnoughData(format!(
                        "series '{id}' has {} observations through {origin}, need {n_in}",
                        v.n
                    )));
                }
                let w = encode(v.series, v.n - 1, n_in, v.level, &v.statics);
                let outs = self
                    .members
                    .iter()
                    .map(|p| self.net.forward(p, &w))
                    .collect::<Result<Vec<_>>>()?;
                let z = ForecastMatrix::median_of(&outs)?;
                let mut y = reconstruct(&level_forecast(v.level, c.output_size), &z)?;
                if self.sort_quantiles {
                    y.sort_rows();
                }
                Ok((id.clone(), y))
            })
            .collect()
    }
}

/// Per-fit bookkeeping recorded in the manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub seeds: Vec<u64>,
    pub best_iterations: Vec<usize>,
    pub stopped_early: Vec<bool>,
    pub earlystop_blocks: Vec<EarlyStopBlock>,
    pub n_train_windows: usize,
    pub n_earlystop_windows: usize,
}

pub(crate) struct NeuralFitSpec<'a> {
    pub opts: &'a NeuralOpts,
    pub quantiles: &'a QuantileSet,
    pub horizon: usize,
    pub stride: usize,
    pub ensemble_size: usize,
    pub shared_seeds: bool,
    pub earlystop_windows: usize,
    pub earlystop_length: usize,
}

const BLOCK_STREAM: u64 = 0xB10C;

/// Trains `ensemble_size` networks on data through `origin`.
pub(crate) fn fit_neural(
    panel: &Panel,
    origin: NaiveDate,
    scaled: bool,
    spec: &NeuralFitSpec<'_>,
    seed: u64,
) -> Result<(NeuralModel, FitSummary)> {
    let opts = spec.opts;
    opts.validate()?;
    let vocab = panel.static_vocab();
    let config = DrnnConfig {
        cell_type: opts.cell_type,
        dilations: opts.dilations.clone(),
        state_hsize: opts.state_hsize,
        add_nl_layer: opts.add_nl_layer,
        input_size_multiplier: opts.input_size_multiplier,
        output_size: spec.horizon,
        quantiles: spec.quantiles.clone(),
        static_vocab: vocab.iter().map(Vec::len).collect(),
        exog_width: DAYS_PER_WEEK,
    };
    let net = Drnn::new(config)?;
    let n_in = net.config().input_size();
    let blocks = earlystop_blocks(
        panel.start_date(),
        origin,
        n_in,
        spec.earlystop_windows,
        spec.earlystop_length,
        derive_seed(seed, BLOCK_STREAM),
    )?;
    let data = build_windows(panel, origin, scaled, n_in, spec.horizon, spec.stride, &blocks, &vocab)?;
    let seeds: Vec<u64> = (0..spec.ensemble_size)
        .map(|i| derive_seed(seed, if spec.shared_seeds { 0 } else { i as u64 }))
        .collect();
    let results = seeds
        .par_iter()
        .map(|&s| {
            let mut t = opts.train.clone();
            t.seed = derive_seed(s, 2);
            train(&net, net.init_params(derive_seed(s, 1)), &t, &data.train, &data.earlystop)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = FitSummary {
        seeds: seeds.clone(),
        best_iterations: results.iter().map(|r| r.best_iteration).collect(),
        stopped_early: results.iter().map(|r| r.stopped_early).collect(),
        earlystop_blocks: blocks,
        n_train_windows: data.train.len(),
        n_earlystop_windows: data.earlystop.len(),
    };
    Ok((
        NeuralModel {
            net,
            members: results.into_iter().map(|r| r.params).collect(),
            scaled,
            vocab,
            sort_quantiles: opts.sort_quantiles,
        },
        summary,
    ))
}
