use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::neural::{fit_neural, FitSummary, NeuralFitSpec, NeuralModel};
use super::plan::BacktestPlan;
use super::{ModelKind, ModelOpts};
use crate::baselines::{ets_fit, naive_forecast, seasonal_naive_forecast, EtsFit};
use crate::error::{invalid, Error, Result};
use crate::forecast::{ForecastMatrix, ForecastSet, QuantileSet};
use crate::panel::{day_of_week, Panel, Series, SeriesId};
use crate::qarx::{self, build_design, QarxModel, SolverOptions};
use crate::util::derive_seed;

/// QAR-X models of one series, one per quantile, plus the exogenous columns
/// that survived the constant-column filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QarxSeries {
    pub models: Vec<QarxModel>,
    pub keep_exog: Vec<usize>,
}

#[derive(Clone, Debug)]
pub enum FittedModel {
    Naive,
    SeasonalNaive { m: usize },
    Ets(BTreeMap<SeriesId, EtsFit>),
    Qarx {
        series: BTreeMap<SeriesId, QarxSeries>,
        mode: qarx::ForecastMode,
    },
    Neural(NeuralModel),
}

/// Calendar features of QAR-X: day-of-week one-hot without Monday, then the
/// observation index as a linear trend.
fn qarx_features(dow: u8, t: usize) -> Vec<f64> {
    let mut x = vec![0.0; 7];
    if dow > 0 {
        x[dow as usize - 1] = 1.0;
    }
    x[6] = t as f64;
    x
}

fn select(x: &[f64], keep: &[usize]) -> Vec<f64> {
    keep.iter().map(|&i| x[i]).collect()
}

fn history(series: &Series, origin: NaiveDate) -> &[f64] {
    &series.values()[..series.count_through(origin)]
}

fn fit_qarx_series(series: &Series, n: usize, opts: &ModelOpts, quantiles: &QuantileSet) -> Result<QarxSeries> {
    let start = opts.qarx_max_history.map_or(0, |m| n.saturating_sub(m));
    let y = &series.values()[start..n];
    let exog: Vec<Vec<f64>> = (start..n).map(|t| qarx_features(series.dow()[t], t)).collect();
    let full = build_design(y, &exog, &opts.qarx_lags)?;
    let drop = full.constant_columns();
    let design = full.without_columns(&drop);
    let n_lags = opts.qarx_lags.len();
    let keep_exog = (0..7).filter(|e| !drop.contains(&(1 + n_lags + e))).collect();
    let models = quantiles
        .as_slice()
        .par_iter()
        .map(|&q| {
            qarx::fit(&design, q, &opts.qarx_solver).or_else(|_| {
                let fallback = SolverOptions {
                    polish: false,
                    ..opts.qarx_solver
                };
                qarx::fit(&design, q, &fallback)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QarxSeries { models, keep_exog })
}

fn qarx_forecast(s: &QarxSeries, series: &Series, n: usize, horizon: usize, mode: qarx::ForecastMode) -> Result<ForecastMatrix> {
    let y = &series.values()[..n];
    let exog_history: Vec<Vec<f64>> = (0..n)
        .map(|t| select(&qarx_features(series.dow()[t], t), &s.keep_exog))
        .collect();
    let last = series.date_at(n - 1);
    let exog_future: Vec<Vec<f64>> = (1..=horizon)
        .map(|h| {
            let d = last + Duration::days(h as i64);
            select(&qarx_features(day_of_week(d), n - 1 + h), &s.keep_exog)
        })
        .collect();
    let mut out = ForecastMatrix::zeros(horizon, s.models.len());
    for (qi, m) in s.models.iter().enumerate() {
        let fc = qarx::forecast(m, y, &exog_history, &exog_future, horizon, mode)?;
        for (h, v) in fc.into_iter().enumerate() {
            out.set(h, qi, v);
        }
    }
    Ok(out)
}

impl FittedModel {
    /// `H × |Q|` forecasts for every series, using data through `origin`.
    pub fn forecast(
        &self,
        panel: &Panel,
        origin: NaiveDate,
        quantiles: &QuantileSet,
        horizon: usize,
    ) -> Result<BTreeMap<SeriesId, ForecastMatrix>> {
        if let FittedModel::Neural(m) = self {
            return m.forecast(panel, origin);
        }
        let nq = quantiles.len();
        panel
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|(id, s)| {
                let y = history(s, origin);
                if y.is_empty() {
                    return Err(Error::NotEnoughData(format!("series '{id}' has no data through {origin}")));
                }
                let block = match self {
                    FittedModel::Naive => ForecastMatrix::from_point(&naive_forecast(y, horizon)?, nq),
                    FittedModel::SeasonalNaive { m } => {
                        ForecastMatrix::from_point(&seasonal_naive_forecast(y, *m, horizon)?, nq)
                    }
                    FittedModel::Ets(fits) => {
                        let fit = fits
                            .get(*id)
                            .ok_or_else(|| Error::KeyMismatch(format!("no ETS fit for '{id}'")))?;
                        let advanced = EtsFit {
                            state: fit.run(y)?,
                            ..fit.clone()
                        };
                        ForecastMatrix::from_point(&advanced.forecast(horizon)?, nq)
                    }
                    FittedModel::Qarx { series, mode } => {
                        let fit = series
                            .get(*id)
                            .ok_or_else(|| Error::KeyMismatch(format!("no QAR-X fit for '{id}'")))?;
                        qarx_forecast(fit, s, y.len(), horizon, *mode)?
                    }
                    FittedModel::Neural(_) => unreachable!("handled above"),
                };
                Ok(((*id).clone(), block))
            })
            .collect()
    }
}

/// Fits `kind` on data through `origin`.
pub fn fit_model(
    kind: ModelKind,
    panel: &Panel,
    origin: NaiveDate,
    opts: &ModelOpts,
    plan: &BacktestPlan,
    quantiles: &QuantileSet,
    seed: u64,
) -> Result<(FittedModel, FitSummary)> {
    let per_series = || -> Vec<(&SeriesId, &Series, usize)> {
        panel
            .iter()
            .map(|(id, s)| (id, s, s.count_through(origin)))
            .collect()
    };
    let model = match kind {
        ModelKind::Naive => FittedModel::Naive,
        ModelKind::SeasonalNaive => FittedModel::SeasonalNaive { m: opts.season_length },
        ModelKind::Ets => FittedModel::Ets(
            per_series()
                .par_iter()
                .map(|(id, s, n)| {
                    let fit = ets_fit(&s.values()[..*n], opts.ets_trend, opts.ets_seasonal, opts.season_length)
                        .map_err(|e| invalid("ets", format!("series '{id}': {e}")))?;
                    Ok(((*id).clone(), fit))
                })
                .collect::<Result<_>>()?,
        ),
        ModelKind::Qarx => FittedModel::Qarx {
            series: per_series()
                .par_iter()
                .map(|(id, s, n)| {
                    let fit = fit_qarx_series(s, *n, opts, quantiles)
                        .map_err(|e| invalid("qarx", format!("series '{id}': {e}")))?;
                    Ok(((*id).clone(), fit))
                })
                .collect::<Result<_>>()?,
            mode: opts.qarx_mode,
        },
        ModelKind::MqDrnn | ModelKind::MqDrnnS => {
            let spec = NeuralFitSpec {
                opts: &opts.neural,
                quantiles,
                horizon: plan.horizon,
                stride: plan.stride,
                ensemble_size: plan.ensemble_size,
                shared_seeds: plan.shared_instance_seeds,
                earlystop_windows: plan.earlystop_windows,
                earlystop_length: plan.earlystop_length,
            };
            let (m, summary) = fit_neural(panel, origin, kind == ModelKind::MqDrnnS, &spec, seed)?;
            return Ok((FittedModel::Neural(m), summary));
        }
    };
    Ok((model, FitSummary::default()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub index: usize,
    pub origin: NaiveDate,
    /// Last date of the data the forecasting model was fitted on.
    pub train_end: NaiveDate,
    pub first_target: NaiveDate,
    pub last_target: NaiveDate,
    pub seed: u64,
    pub status: WindowStatus,
    pub error: Option<String>,
    /// Model trainings performed for this window (0 when reusing a fit).
    pub n_trainings: usize,
    pub fit: FitSummary,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub model: ModelKind,
    pub quantiles: QuantileSet,
    pub plan: BacktestPlan,
    pub opts: ModelOpts,
    pub data_fingerprint: String,
    pub n_series: usize,
    pub windows: Vec<WindowRecord>,
    pub n_trainings: usize,
    pub n_failed: usize,
    pub seconds: f64,
}

impl RunManifest {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Every window was fitted on data ending before its first target, and
    /// early-stopping blocks lie inside that data.
    pub fn check_no_leakage(&self) -> Result<()> {
        for w in &self.windows {
            if w.train_end >= w.first_target {
                return Err(invalid(
                    "manifest",
                    format!("window {} trains through {} but forecasts from {}", w.index, w.train_end, w.first_target),
                ));
            }
            if let Some(b) = w.fit.earlystop_blocks.iter().find(|b| b.end > w.train_end) {
                return Err(invalid(
                    "manifest",
                    format!("window {} early-stopping block ends {} after training end {}", w.index, b.end, w.train_end),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BacktestResult {
    pub forecasts: ForecastSet,
    pub manifest: RunManifest,
}

type WindowOutcome = (WindowRecord, Option<BTreeMap<SeriesId, ForecastMatrix>>);

/// Runs every window of `plan`; failed windows are recorded and skipped.
pub fn run_backtest(
    panel: &Panel,
    plan: &BacktestPlan,
    kind: ModelKind,
    opts: &ModelOpts,
    quantiles: &QuantileSet,
) -> Result<BacktestResult> {
    plan.validate()?;
    let started = Instant::now();
    let record = |k: usize, train_end: NaiveDate, n_trainings: usize, fit: FitSummary, t0: Instant| WindowRecord {
        index: k,
        origin: plan.origins[k],
        train_end,
        first_target: plan.first_target(k),
        last_target: plan.last_target(k),
        seed: derive_seed(plan.seed, k as u64),
        status: WindowStatus::Ok,
        error: None,
        n_trainings,
        fit,
        seconds: t0.elapsed().as_secs_f64(),
    };
    let trainings = |kind: ModelKind| if kind.is_neural() { plan.ensemble_size } else { 1 };
    let fail = |mut r: WindowRecord, e: Error| -> WindowOutcome {
        r.status = WindowStatus::Failed;
        r.error = Some(e.to_string());
        (r, None)
    };

    let outcomes: Vec<WindowOutcome> = if plan.retrain {
        (0..plan.n_windows())
            .into_par_iter()
            .map(|k| {
                let t0 = Instant::now();
                let origin = plan.origins[k];
                let seed = derive_seed(plan.seed, k as u64);
                match fit_model(kind, panel, origin, opts, plan, quantiles, seed)
                    .and_then(|(m, fit)| Ok((m.forecast(panel, origin, quantiles, plan.horizon)?, fit)))
                {
                    Ok((fc, fit)) => (record(k, origin, trainings(kind), fit, t0), Some(fc)),
                    Err(e) => fail(record(k, origin, trainings(kind), FitSummary::default(), t0), e),
                }
            })
            .collect()
    } else {
        let t0 = Instant::now();
        let origin0 = plan.origins[0];
        let fitted = fit_model(kind, panel, origin0, opts, plan, quantiles, derive_seed(plan.seed, 0));
        (0..plan.n_windows())
            .into_par_iter()
            .map(|k| {
                let tk = if k == 0 { t0 } else { Instant::now() };
                let n = if k == 0 { trainings(kind) } else { 0 };
                match &fitted {
                    Ok((m, fit)) => {
                        let fit = if k == 0 { fit.clone() } else { FitSummary::default() };
                        match m.forecast(panel, plan.origins[k], quantiles, plan.horizon) {
                            Ok(fc) => (record(k, origin0, n, fit, tk), Some(fc)),
                            Err(e) => fail(record(k, origin0, n, fit, tk), e),
                        }
                    }
                    Err(e) => fail(
                        record(k, origin0, n, FitSummary::default(), tk),
                        invalid("fit", e.to_string()),
                    ),
                }
            })
            .collect()
    };

    let mut forecasts = ForecastSet::new(quantiles.clone(), plan.horizon);
    let mut windows = Vec::with_capacity(outcomes.len());
    for (rec, fc) in outcomes {
        if let Some(fc) = fc {
            for (id, block) in fc {
                forecasts.insert(id, rec.index, rec.origin, block)?;
            }
        }
        windows.push(rec);
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        model: kind,
        quantiles: quantiles.clone(),
        plan: plan.clone(),
        opts: opts.clone(),
        data_fingerprint: panel.fingerprint(),
        n_series: panel.len(),
        n_trainings: windows.iter().map(|w| w.n_trainings).sum(),
        n_failed: windows.iter().filter(|w| w.status == WindowStatus::Failed).count(),
        windows,
        seconds: started.elapsed().as_secs_f64(),
    };
    Ok(BacktestResult { forecasts, manifest })
}
