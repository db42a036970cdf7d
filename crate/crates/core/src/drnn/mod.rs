//! Dilated recurrent network with a direct multi-horizon, multi-quantile
//! head, hand-written backpropagation through time, and its training loop.

mod cell;
mod checkpoint;
mod network;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forecast::QuantileSet;

pub use cell::{cell_step, CellState};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use network::{Drnn, DrnnParams, LayerLayout, ParamLayout, TensorSpec, Trace, Window};
pub use train::{mql_loss_grad, train, write_trace_csv, TraceRow, TrainResult, TrainWindow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellType {
    Vanilla,
    Gru,
    Lstm,
    ResLstm,
}

impl CellType {
    pub const ALL: [CellType; 4] = [CellType::Vanilla, CellType::Gru, CellType::Lstm, CellType::ResLstm];

    /// Number of stacked gate blocks in the packed weight matrices.
    pub(crate) fn gates(self) -> usize {
        match self {
            CellType::Vanilla => 1,
            CellType::Gru => 3,
            CellType::Lstm | CellType::ResLstm => 4,
        }
    }

    pub(crate) fn has_cell_state(self) -> bool {
        matches!(self, CellType::Lstm | CellType::ResLstm)
    }
}

impl FromStr for CellType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" | "rnn" => Ok(CellType::Vanilla),
            "gru" => Ok(CellType::Gru),
            "lstm" => Ok(CellType::Lstm),
            "res_lstm" | "reslstm" => Ok(CellType::ResLstm),
            _ => Err(invalid("cell_type", format!("'{s}' (expected vanilla, gru, lstm or res_lstm)"))),
        }
    }
}

impl fmt::Display for CellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellType::Vanilla => "vanilla",
            CellType::Gru => "gru",
            CellType::Lstm => "lstm",
            CellType::ResLstm => "res_lstm",
        })
    }
}

/// Parses `[[1,2],[4,8]]`-style dilation lists.
pub fn parse_dilations(s: &str) -> Result<Vec<Vec<usize>>> {
    let d: Vec<Vec<usize>> =
        serde_json::from_str(s.trim()).map_err(|e| invalid("dilations", format!("'{s}': {e}")))?;
    validate_dilations(&d)?;
    Ok(d)
}

pub fn format_dilations(d: &[Vec<usize>]) -> String {
    let chunks: Vec<String> = d
        .iter()
        .map(|c| format!("[{}]", c.iter().map(usize::to_string).collect::<Vec<_>>().join(",")))
        .collect();
    format!("[{}]", chunks.join(","))
}

fn validate_dilations(d: &[Vec<usize>]) -> Result<()> {
    if d.is_empty() || d.iter().any(Vec::is_empty) {
        return Err(invalid("dilations", "need at least one chunk and one layer per chunk"));
    }
    if d.iter().flatten().any(|&l| l == 0) {
        return Err(invalid("dilations", "every dilation must be at least 1"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrnnConfig {
    pub cell_type: CellType,
    pub dilations: Vec<Vec<usize>>,
    pub state_hsize: usize,
    pub add_nl_layer: bool,
    pub input_size_multiplier: usize,
    pub output_size: usize,
    pub quantiles: QuantileSet,
    /// Category count of each static feature.
    pub static_vocab: Vec<usize>,
    /// Width of the per-step exogenous encoding.
    pub exog_width: usize,
}

impl DrnnConfig {
    pub fn input_size(&self) -> usize {
        self.input_size_multiplier * self.output_size
    }

    pub fn max_dilation(&self) -> usize {
        self.dilations.iter().flatten().copied().max().unwrap_or(1)
    }

    pub fn n_layers(&self) -> usize {
        self.dilations.iter().map(Vec::len).sum()
    }

    pub fn embedding_widths(&self) -> Vec<usize> {
        self.static_vocab.iter().map(|&v| v.min(4)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        validate_dilations(&self.dilations)?;
        if self.state_hsize == 0 {
            return Err(invalid("state_hsize", "must be at least 1"));
        }
        if self.input_size_multiplier == 0 || self.output_size == 0 {
            return Err(invalid("input size", "multiplier and output_size must be at least 1"));
        }
        if self.static_vocab.contains(&0) {
            return Err(invalid("static_vocab", "every static feature needs at least one category"));
        }
        if self.input_size() < self.max_dilation() {
            return Err(invalid(
                "dilations",
                format!("input size {} is shorter than dilation {}", self.input_size(), self.max_dilation()),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOpts {
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub lr_scheduler_step_size: usize,
    pub batch_size: usize,
    pub n_iterations: usize,
    pub early_stopping_patience: usize,
    pub gradient_clipping_threshold: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// Iterations between early-stopping evaluations.
    pub eval_every: usize,
}

impl Default for TrainOpts {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            lr_decay: 0.5,
            lr_scheduler_step_size: 2,
            batch_size: 32,
            n_iterations: 1000,
            early_stopping_patience: 10,
            gradient_clipping_threshold: 50.0,
            noise_std: 1e-3,
            seed: 0,
            eval_every: 50,
        }
    }
}

impl TrainOpts {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(invalid("lr_decay", "must lie in (0, 1]"));
        }
        if self.lr_scheduler_step_size == 0 {
            return Err(invalid("lr_scheduler_step_size", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be at least 1"));
        }
        if !(self.gradient_clipping_threshold > 0.0) {
            return Err(invalid("gradient_clipping_threshold", "must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(invalid("noise_std", "must be non-negative"));
        }
        if self.eval_every == 0 {
            return Err(invalid("eval_every", "must be at least 1"));
        }
        Ok(())
    }

    /// Learning rate in effect at 1-based `iteration`.
    pub fn lr_at(&self, iteration: usize) -> f64 {
        let step = (self.n_iterations / self.lr_scheduler_step_size).max(1);
        self.learning_rate * self.lr_decay.powi(((iteration.max(1) - 1) / step) as i32)
    }
}
