//! Rolling-origin backtesting, seed ensembles, random search and model
//! comparison reports.

mod backtest;
mod compare;
mod neural;
mod plan;
mod search;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{Seasonal, Trend};
use crate::drnn::{CellType, TrainOpts};
use crate::error::{invalid, Error, Result};
use crate::qarx::{ForecastMode, SolverOptions};

pub use backtest::{fit_model, run_backtest, BacktestResult, FittedModel, RunManifest, WindowRecord, WindowStatus};
pub use compare::{compare, CompareReport};
pub use backtest::QarxSeries;
pub use neural::{earlystop_blocks, EarlyStopBlock, FitSummary, NeuralModel};
pub use plan::{feasible_windows, make_plan, BacktestPlan};
pub use search::{random_search, Range, SearchResult, SearchSpace, Trial};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Naive,
    SeasonalNaive,
    Ets,
    Qarx,
    MqDrnn,
    MqDrnnS,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Naive,
        ModelKind::SeasonalNaive,
        ModelKind::Ets,
        ModelKind::Qarx,
        ModelKind::MqDrnn,
        ModelKind::MqDrnnS,
    ];

    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::MqDrnn | ModelKind::MqDrnnS)
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s.replace('-', "_").to_ascii_lowercase())
            .ok_or_else(|| {
                invalid(
                    "model",
                    format!("'{s}' (expected naive, seasonal_naive, ets, qarx, mq_drnn or mq_drnn_s)"),
                )
            })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Naive => "naive",
            ModelKind::SeasonalNaive => "seasonal_naive",
            ModelKind::Ets => "ets",
            ModelKind::Qarx => "qarx",
            ModelKind::MqDrnn => "mq_drnn",
            ModelKind::MqDrnnS => "mq_drnn_s",
        })
    }
}

/// Network and training settings of the neural kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralOpts {
    pub cell_type: CellType,
    pub dilations: Vec<Vec<usize>>,
    pub state_hsize: usize,
    pub add_nl_layer: bool,
    pub input_size_multiplier: usize,
    pub train: TrainOpts,
    /// Sort each forecast row so quantiles never cross.
    pub sort_quantiles: bool,
    /// Kept for configuration fidelity; the only supported value is 1.
    pub per_series_lr_multip: f64,
    /// Kept for configuration fidelity; the only supported value is 0.
    pub rnn_weight_decay: f64,
}

impl NeuralOpts {
    /// The tuned default configuration (LSTM, dilations
    /// `[[1,2],[4,8]]`, 96 hidden units, 2000 iterations).
    pub fn hpoptimal() -> Self {
        Self {
            cell_type: CellType::Lstm,
            dilations: vec![vec![1, 2], vec![4, 8]],
            state_hsize: 96,
            add_nl_layer: false,
            input_size_multiplier: 4,
            train: TrainOpts {
                learning_rate: 0.00085,
                lr_decay: 0.5,
                lr_scheduler_step_size: 2,
                batch_size: 32,
                n_iterations: 2000,
                early_stopping_patience: 10,
                gradient_clipping_threshold: 73.0,
                noise_std: 0.001,
                seed: 0,
                eval_every: 50,
            },
            sort_quantiles: false,
            per_series_lr_multip: 1.0,
            rnn_weight_decay: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_series_lr_multip != 1.0 {
            return Err(invalid("per_series_lr_multip", "only 1 is supported"));
        }
        if self.rnn_weight_decay != 0.0 {
            return Err(invalid("rnn_weight_decay", "only 0 is supported"));
        }
        self.train.validate()
    }
}

impl Default for NeuralOpts {
    fn default() -> Self {
        Self::hpoptimal()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOpts {
    /// Season length of Seasonal Naive and ETS.
    pub season_length: usize,
    pub ets_trend: Trend,
    pub ets_seasonal: Seasonal,
    pub qarx_lags: Vec<usize>,
    pub qarx_mode: ForecastMode,
    pub qarx_solver: SolverOptions,
    /// Fit QAR-X on at most this many trailing observations.
    pub qarx_max_history: Option<usize>,
    pub neural: NeuralOpts,
}

impl Default for ModelOpts {
    fn default() -> Self {
        Self {
            season_length: 7,
            ets_trend: Trend::Additive,
            ets_seasonal: Seasonal::Additive,
            qarx_lags: vec![1, 7],
            qarx_mode: ForecastMode::Recursive,
            qarx_solver: SolverOptions::default(),
            qarx_max_history: None,
            neural: NeuralOpts::default(),
        }
    }
}
