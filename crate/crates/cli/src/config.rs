//! Flat `key = value` run configuration with strict parsing.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use qforecast::drnn::{format_dilations, parse_dilations, CellType};
use qforecast::harness::{ModelKind, ModelOpts, Range, SearchSpace};
use qforecast::QuantileSet;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Directory holding `series.csv` and optionally `exog.csv` and `statics.csv`.
    pub data: PathBuf,
    pub out: PathBuf,
    pub model: ModelKind,
    pub quantiles: QuantileSet,
    pub seed: u64,
    pub horizon: usize,
    pub stride: usize,
    /// `None` runs every feasible window.
    pub n_windows: Option<usize>,
    pub val_days: i64,
    pub test_days: i64,
    pub retrain: bool,
    pub ensemble_size: usize,
    pub earlystop_windows: usize,
    pub earlystop_length: usize,
    pub shared_instance_seeds: bool,
    pub opts: ModelOpts,
    pub budget: usize,
    pub space: SearchSpace,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            out: PathBuf::from("out"),
            model: ModelKind::MqDrnnS,
            quantiles: QuantileSet::demand_default(),
            seed: 0,
            horizon: 7,
            stride: 7,
            n_windows: None,
            val_days: 28,
            test_days: 371,
            retrain: true,
            ensemble_size: 1,
            earlystop_windows: 3,
            earlystop_length: 28,
            shared_instance_seeds: false,
            opts: ModelOpts::default(),
            budget: 20,
            space: SearchSpace::standard(),
        }
    }
}

fn list<T: Display>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn range<T: Display>(r: &Range<T>) -> String {
    format!("{}..{}", r.lo, r.hi)
}

fn parse<T>(key: &str, value: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    value.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse '{value}': {e}"))
}

fn parse_list<T>(key: &str, value: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_range<T>(key: &str, value: &str) -> Result<Range<T>>
where
    T: FromStr + PartialOrd,
    T::Err: Display,
{
    let (lo, hi) = value
        .split_once("..")
        .ok_or_else(|| anyhow!("{key}: expected 'lo..hi', found '{value}'"))?;
    let r = Range {
        lo: parse(key, lo.trim())?,
        hi: parse(key, hi.trim())?,
    };
    if r.hi < r.lo {
        bail!("{key}: range '{value}' is reversed");
    }
    Ok(r)
}

fn parse_dilation_sets(key: &str, value: &str) -> Result<Vec<Vec<Vec<usize>>>> {
    value
        .split(';')
        .map(|d| parse_dilations(d).map_err(|e| anyhow!("{key}: {e}")))
        .collect()
}

impl RunConfig {
    /// Every key with its canonical value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let o = &self.opts;
        let n = &o.neural;
        let t = &n.train;
        let s = &self.space;
        vec![
            ("data", self.data.display().to_string()),
            ("out", self.out.display().to_string()),
            ("model", self.model.to_string()),
            ("quantiles", list(self.quantiles.as_slice())),
            ("seed", self.seed.to_string()),
            ("horizon", self.horizon.to_string()),
            ("stride", self.stride.to_string()),
            ("n_windows", self.n_windows.map_or("all".into(), |n| n.to_string())),
            ("val_days", self.val_days.to_string()),
            ("test_days", self.test_days.to_string()),
            ("retrain", self.retrain.to_string()),
            ("ensemble_size", self.ensemble_size.to_string()),
            ("earlystop_windows", self.earlystop_windows.to_string()),
            ("earlystop_length", self.earlystop_length.to_string()),
            ("shared_instance_seeds", self.shared_instance_seeds.to_string()),
            ("season_length", o.season_length.to_string()),
            ("ets_trend", o.ets_trend.to_string()),
            ("ets_seasonal", o.ets_seasonal.to_string()),
            ("qarx_lags", list(&o.qarx_lags)),
            ("qarx_mode", o.qarx_mode.to_string()),
            ("qarx_iterations", o.qarx_solver.iterations.to_string()),
            ("qarx_step_scale", o.qarx_solver.step_scale.to_string()),
            ("qarx_polish", o.qarx_solver.polish.to_string()),
            ("qarx_max_history", o.qarx_max_history.map_or("none".into(), |n| n.to_string())),
            ("cell_type", n.cell_type.to_string()),
            ("dilations", format_dilations(&n.dilations)),
            ("state_hsize", n.state_hsize.to_string()),
            ("add_nl_layer", n.add_nl_layer.to_string()),
            ("input_size_multiplier", n.input_size_multiplier.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("lr_decay", t.lr_decay.to_string()),
            ("lr_scheduler_step_size", t.lr_scheduler_step_size.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("n_iterations", t.n_iterations.to_string()),
            ("early_stopping_patience", t.early_stopping_patience.to_string()),
            ("gradient_clipping_threshold", t.gradient_clipping_threshold.to_string()),
            ("noise_std", t.noise_std.to_string()),
            ("eval_every", t.eval_every.to_string()),
            ("sort_quantiles", n.sort_quantiles.to_string()),
            ("per_series_lr_multip", n.per_series_lr_multip.to_string()),
            ("rnn_weight_decay", n.rnn_weight_decay.to_string()),
            ("budget", self.budget.to_string()),
            ("space_input_size_multiplier", list(&s.input_size_multiplier)),
            ("space_add_nl_layer", list(&s.add_nl_layer)),
            ("space_cell_type", list(&s.cell_type)),
            (
                "space_dilations",
                s.dilations.iter().map(|d| format_dilations(d)).collect::<Vec<_>>().join(";"),
            ),
            ("space_state_hsize", range(&s.state_hsize)),
            ("space_learning_rate", range(&s.learning_rate)),
            ("space_lr_decay", list(&s.lr_decay)),
            ("space_lr_scheduler_step_size", list(&s.lr_scheduler_step_size)),
            ("space_batch_size", list(&s.batch_size)),
            ("space_n_iterations", list(&s.n_iterations)),
            ("space_early_stopping_patience", list(&s.early_stopping_patience)),
            ("space_gradient_clipping_threshold", range(&s.gradient_clipping_threshold)),
            ("space_noise_std", list(&s.noise_std)),
        ]
    }

    /// Assigns one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let o = &mut self.opts;
        let n = &mut o.neural;
        let t = &mut n.train;
        let s = &mut self.space;
        match key {
            "data" => self.data = PathBuf::from(value),
            "out" => self.out = PathBuf::from(value),
            "model" => self.model = parse(key, value)?,
            "quantiles" => {
                self.quantiles = QuantileSet::new(parse_list(key, value)?).map_err(|e| anyhow!("quantiles: {e}"))?
            }
            "seed" => self.seed = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "n_windows" => {
                self.n_windows = if value == "all" { None } else { Some(parse(key, value)?) }
            }
            "val_days" => self.val_days = parse(key, value)?,
            "test_days" => self.test_days = parse(key, value)?,
            "retrain" => self.retrain = parse(key, value)?,
            "ensemble_size" => self.ensemble_size = parse(key, value)?,
            "earlystop_windows" => self.earlystop_windows = parse(key, value)?,
            "earlystop_length" => self.earlystop_length = parse(key, value)?,
            "shared_instance_seeds" => self.shared_instance_seeds = parse(key, value)?,
            "season_length" => o.season_length = parse(key, value)?,
            "ets_trend" => o.ets_trend = parse(key, value)?,
            "ets_seasonal" => o.ets_seasonal = parse(key, value)?,
            "qarx_lags" => o.qarx_lags = parse_list(key, value)?,
            "qarx_mode" => o.qarx_mode = parse(key, value)?,
            "qarx_iterations" => o.qarx_solver.iterations = parse(key, value)?,
            "qarx_step_scale" => o.qarx_solver.step_scale = parse(key, value)?,
            "qarx_polish" => o.qarx_solver.polish = parse(key, value)?,
            "qarx_max_history" => {
                o.qarx_max_history = if value == "none" { None } else { Some(parse(key, value)?) }
            }
            "cell_type" => n.cell_type = parse(key, value)?,
            "dilations" => n.dilations = parse_dilations(value).map_err(|e| anyhow!("dilations: {e}"))?,
            "state_hsize" => n.state_hsize = parse(key, value)?,
            "add_nl_layer" => n.add_nl_layer = parse(key, value)?,
            "input_size_multiplier" => n.input_size_multiplier = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "lr_decay" => t.lr_decay = parse(key, value)?,
            "lr_scheduler_step_size" => t.lr_scheduler_step_size = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "n_iterations" => t.n_iterations = parse(key, value)?,
            "early_stopping_patience" => t.early_stopping_patience = parse(key, value)?,
            "gradient_clipping_threshold" => t.gradient_clipping_threshold = parse(key, value)?,
            "noise_std" => t.noise_std = parse(key, value)?,
            "eval_every" => t.eval_every = parse(key, value)?,
            "sort_quantiles" => n.sort_quantiles = parse(key, value)?,
            "per_series_lr_multip" => n.per_series_lr_multip = parse(key, value)?,
            "rnn_weight_decay" => n.rnn_weight_decay = parse(key, value)?,
            "budget" => self.budget = parse(key, value)?,
            "space_input_size_multiplier" => s.input_size_multiplier = parse_list(key, value)?,
            "space_add_nl_layer" => s.add_nl_layer = parse_list(key, value)?,
            "space_cell_type" => s.cell_type = parse_list::<CellType>(key, value)?,
            "space_dilations" => s.dilations = parse_dilation_sets(key, value)?,
            "space_state_hsize" => s.state_hsize = parse_range(key, value)?,
            "space_learning_rate" => s.learning_rate = parse_range(key, value)?,
            "space_lr_decay" => s.lr_decay = parse_list(key, value)?,
            "space_lr_scheduler_step_size" => s.lr_scheduler_step_size = parse_list(key, value)?,
            "space_batch_size" => s.batch_size = parse_list(key, value)?,
            "space_n_iterations" => s.n_iterations = parse_list(key, value)?,
            "space_early_stopping_patience" => s.early_stopping_patience = parse_list(key, value)?,
            "space_gradient_clipping_threshold" => s.gradient_clipping_threshold = parse_range(key, value)?,
            "space_noise_std" => s.noise_std = parse_list(key, value)?,
            _ => bail!("unknown key '{key}'"),
        }
        Ok(())
    }

    /// Parses config text over the defaults. Blank lines and `#` comments
    /// are ignored; duplicate and unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected 'key = value', found '{line}'", i + 1))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                bail!("line {}: duplicate key '{key}'", i + 1);
            }
            cfg.set(key, value.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# qforecast run configuration\n");
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
