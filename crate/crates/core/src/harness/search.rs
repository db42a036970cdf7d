use chrono::Duration;
use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backtest::fit_model;
use super::plan::BacktestPlan;
use super::{ModelKind, ModelOpts, NeuralOpts};
use crate::drnn::CellType;
use crate::error::{invalid, Error, Result};
use crate::forecast::{Actuals, ForecastSet, QuantileSet};
use crate::metrics::mql;
use crate::panel::{Panel, SplitSpec};
use crate::util::{derive_seed, rng};

/// Half-open interval `[lo, hi)` sampled uniformly; `lo == hi` pins the value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range<T> {
    pub lo: T,
    pub hi: T,
}

impl Range<f64> {
    fn sample(&self, r: &mut impl Rng) -> f64 {
        if self.hi > self.lo {
            r.random_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }
}

impl Range<usize> {
    fn sample(&self, r: &mut impl Rng) -> usize {
        if self.hi > self.lo {
            r.random_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }
}

fn pick<T: Clone>(values: &[T], r: &mut impl Rng, what: &'static str) -> Result<T> {
    values
        .choose(r)
        .cloned()
        .ok_or_else(|| invalid("search space", format!("{what} has no values")))
}

/// Hyperparameter ranges; continuous entries are uniform, lists are uniform
/// choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub input_size_multiplier: Vec<usize>,
    pub add_nl_layer: Vec<bool>,
    pub cell_type: Vec<CellType>,
    pub dilations: Vec<Vec<Vec<usize>>>,
    pub state_hsize: Range<usize>,
    pub learning_rate: Range<f64>,
    pub lr_decay: Vec<f64>,
    pub lr_scheduler_step_size: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub n_iterations: Vec<usize>,
    pub early_stopping_patience: Vec<usize>,
    pub gradient_clipping_threshold: Range<f64>,
    pub noise_std: Vec<f64>,
}

impl SearchSpace {
    /// The default hyperparameter search space.
    pub fn standard() -> Self {
        Self {
            input_size_multiplier: vec![4],
            add_nl_layer: vec![true, false],
            cell_type: vec![CellType::Gru, CellType::Vanilla, CellType::Lstm, CellType::ResLstm],
            dilations: vec![vec![vec![1, 2], vec![4, 8]], vec![vec![1, 2]]],
            state_hsize: Range { lo: 10, hi: 100 },
            learning_rate: Range { lo: 5e-4, hi: 1e-3 },
            lr_decay: vec![0.5],
            lr_scheduler_step_size: vec![2],
            batch_size: vec![32],
            n_iterations: vec![1000],
            early_stopping_patience: vec![10],
            gradient_clipping_threshold: Range { lo: 10.0, hi: 100.0 },
            noise_std: vec![0.001],
        }
    }

    /// A space containing only `opts`.
    pub fn point(opts: &NeuralOpts) -> Self {
        let t = &opts.train;
        Self {
            input_size_multiplier: vec![opts.input_size_multiplier],
            add_nl_layer: vec![opts.add_nl_layer],
            cell_type: vec![opts.cell_type],
            dilations: vec![opts.dilations.clone()],
            state_hsize: Range {
                lo: opts.state_hsize,
                hi: opts.state_hsize,
            },
            learning_rate: Range {
                lo: t.learning_rate,
                hi: t.learning_rate,
            },
            lr_decay: vec![t.lr_decay],
            lr_scheduler_step_size: vec![t.lr_scheduler_step_size],
            batch_size: vec![t.batch_size],
            n_iterations: vec![t.n_iterations],
            early_stopping_patience: vec![t.early_stopping_patience],
            gradient_clipping_threshold: Range {
                lo: t.gradient_clipping_threshold,
                hi: t.gradient_clipping_threshold,
            },
            noise_std: vec![t.noise_std],
        }
    }

    /// Draws one configuration; fields outside the space come from `base`.
    pub fn sample(&self, base: &NeuralOpts, r: &mut impl Rng) -> Result<NeuralOpts> {
        let mut o = base.clone();
        o.input_size_multiplier = pick(&self.input_size_multiplier, r, "input_size_multiplier")?;
        o.add_nl_layer = pick(&self.add_nl_layer, r, "add_nl_layer")?;
        o.cell_type = pick(&self.cell_type, r, "cell_type")?;
        o.dilations = pick(&self.dilations, r, "dilations")?;
        o.state_hsize = self.state_hsize.sample(r);
        o.train.learning_rate = self.learning_rate.sample(r);
        o.train.lr_decay = pick(&self.lr_decay, r, "lr_decay")?;
        o.train.lr_scheduler_step_size = pick(&self.lr_scheduler_step_size, r, "lr_scheduler_step_size")?;
        o.train.batch_size = pick(&self.batch_size, r, "batch_size")?;
        o.train.n_iterations = pick(&self.n_iterations, r, "n_iterations")?;
        o.train.early_stopping_patience = pick(&self.early_stopping_patience, r, "early_stopping_patience")?;
        o.train.gradient_clipping_threshold = self.gradient_clipping_threshold.sample(r);
        o.train.noise_std = pick(&self.noise_std, r, "noise_std")?;
        Ok(o)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub opts: NeuralOpts,
    /// Validation MQL; infinite when the trial failed.
    pub score: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: NeuralOpts,
    pub best_score: f64,
    /// Trials in sampling order.
    pub leaderboard: Vec<Trial>,
}

impl SearchResult {
    /// Trials sorted by score, ties by index.
    pub fn ranked(&self) -> Vec<&Trial> {
        let mut v: Vec<&Trial> = self.leaderboard.iter().collect();
        v.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
        v
    }
}

const TRAIN_STREAM: u64 = 0x5EA7C4;

/// Rolling validation MQL of one configuration: trained once on data
/// through `train_end`, then forecast at every `horizon`-day origin that
/// keeps its targets inside the validation span.
fn evaluate(
    panel: &Panel,
    split: &SplitSpec,
    kind: ModelKind,
    opts: &ModelOpts,
    plan: &BacktestPlan,
    quantiles: &QuantileSet,
) -> Result<f64> {
    let (model, _) = fit_model(kind, panel, split.train_end, opts, plan, quantiles, plan.seed)?;
    let mut set = ForecastSet::new(quantiles.clone(), plan.horizon);
    let mut k = 0;
    loop {
        let origin = split.train_end + Duration::days((k * plan.horizon) as i64);
        if origin + Duration::days(plan.horizon as i64) > split.val_end {
            break;
        }
        for (id, block) in model.forecast(panel, origin, quantiles, plan.horizon)? {
            set.insert(id, k, origin, block)?;
        }
        k += 1;
    }
    if set.is_empty() {
        return Err(Error::NotEnoughData("validation span shorter than one horizon".into()));
    }
    let actuals = Actuals::for_forecasts(panel, &set)?;
    mql(&actuals, &set)
}

/// Uniform random search over `space`, scored by validation MQL.
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    panel: &Panel,
    split: &SplitSpec,
    kind: ModelKind,
    base: &ModelOpts,
    space: &SearchSpace,
    budget: usize,
    horizon: usize,
    quantiles: &QuantileSet,
    seed: u64,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(invalid("budget", "must be at least 1"));
    }
    if !kind.is_neural() {
        return Err(invalid("search", format!("model '{kind}' has no hyperparameters to search")));
    }
    let mut r = rng(seed);
    let candidates: Vec<NeuralOpts> = (0..budget)
        .map(|_| space.sample(&base.neural, &mut r))
        .collect::<Result<_>>()?;
    let plan = BacktestPlan {
        origins: vec![split.train_end],
        horizon,
        stride: horizon,
        retrain: true,
        ensemble_size: 1,
        earlystop_windows: 3,
        earlystop_length: 28,
        seed: derive_seed(seed, TRAIN_STREAM),
        shared_instance_seeds: false,
    };
    let leaderboard: Vec<Trial> = candidates
        .into_par_iter()
        .enumerate()
        .map(|(index, neural)| {
            let opts = ModelOpts {
                neural: neural.clone(),
                ..base.clone()
            };
            match evaluate(panel, split, kind, &opts, &plan, quantiles) {
                Ok(score) if score.is_finite() => Trial {
                    index,
                    opts: neural,
                    score,
                    error: None,
                },
                Ok(score) => Trial {
                    index,
                    opts: neural,
                    score: f64::INFINITY,
                    error: Some(format!("non-finite score {score}")),
                },
                Err(e) => Trial {
                    index,
                    opts: neural,
                    score: f64::INFINITY,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let best = leaderboard
        .iter()
        .min_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)))
        .expect("budget >= 1");
    Ok(SearchResult {
        best: best.opts.clone(),
        best_score: best.score,
        leaderboard,
    })
}
