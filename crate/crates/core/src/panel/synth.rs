//! Synthetic demand panels for desk-scale experiments.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{day_of_week, Panel, Series, SeriesId};
use crate::error::{invalid, Result};
use crate::util::{derive_seed, rng};

/// How observations are generated around each series' level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SynthKind {
    /// `y = max(0, level · drift · weekly[dow] + level · noise_frac · ε)`, then
    /// zeroed with probability `zero_inflation`.
    Demand { noise_frac: f64, zero_inflation: f64 },
    /// `y = level + amplitude · pattern[dow] + noise_std · ε` with a pattern
    /// shared by all series. Quantiles are known in closed form.
    Additive { amplitude: f64, noise_std: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub n_series: usize,
    pub n_days: usize,
    pub seed: u64,
    pub start: NaiveDate,
    /// Levels are drawn log-uniformly from this range.
    pub level_range: (f64, f64),
    pub n_centers: usize,
    pub n_families: usize,
    pub kind: SynthKind,
}

impl SynthOptions {
    pub fn new(n_series: usize, n_days: usize, seed: u64) -> Self {
        Self {
            n_series,
            n_days,
            seed,
            start: NaiveDate::from_ymd_opt(2018, 4, 5).expect("valid date"),
            level_range: (1.0, 1000.0),
            n_centers: 4,
            n_families: 6,
            kind: SynthKind::Demand {
                noise_frac: 0.15,
                zero_inflation: 0.03,
            },
        }
    }

    /// Weekly shape shared by every series of an additive panel; sums to zero.
    pub fn additive_pattern() -> [f64; 7] {
        [-1.0, -0.5, 0.0, 0.25, 0.75, 1.0, -0.5]
    }

    pub fn generate(&self) -> Result<Panel> {
        if self.n_series == 0 {
            return Err(invalid("synthetic panel", "n_series must be at least 1"));
        }
        if self.n_days < 28 {
            return Err(invalid("synthetic panel", "n_days must be at least 28"));
        }
        let (lo, hi) = self.level_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(invalid("synthetic panel", "level range must be positive and ordered"));
        }
        let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
        let width = self.n_series.to_string().len();
        let mut series = BTreeMap::new();
        let mut statics = BTreeMap::new();
        for i in 0..self.n_series {
            let mut r = rng(derive_seed(self.seed, i as u64));
            let level = (lo.ln() + r.random::<f64>() * (hi.ln() - lo.ln())).exp();
            let y: Vec<f64> = match self.kind {
                SynthKind::Demand {
                    noise_frac,
                    zero_inflation,
                } => {
                    let weekly: Vec<f64> = (0..7).map(|_| r.random_range(0.6..1.4)).collect();
                    let norm = weekly.iter().sum::<f64>() / 7.0;
                    let mut drift = 0.0f64;
                    (0..self.n_days)
                        .map(|t| {
                            let d = self.start + Duration::days(t as i64);
                            drift = 0.97 * drift + 0.02 * std_normal.sample(&mut r);
                            let mean = level * drift.exp() * weekly[day_of_week(d) as usize] / norm;
                            let v = mean + level * noise_frac * std_normal.sample(&mut r);
                            if r.random::<f64>() < zero_inflation {
                                0.0
                            } else {
                                v.max(0.0)
                            }
                        })
                        .collect()
                }
                SynthKind::Additive {
                    amplitude,
                    noise_std,
                } => {
                    let pattern = Self::additive_pattern();
                    (0..self.n_days)
                        .map(|t| {
                            let d = self.start + Duration::days(t as i64);
                            let v = level
                                + amplitude * pattern[day_of_week(d) as usize]
                                + noise_std * std_normal.sample(&mut r);
                            v.max(0.0)
                        })
                        .collect()
                }
            };
            let id = SeriesId::new(format!("s{i:0width$}"))?;
            statics.insert(
                id.clone(),
                vec![
                    format!("center{}", i % self.n_centers.max(1)),
                    format!("family{}", (i / self.n_centers.max(1)) % self.n_families.max(1)),
                ],
            );
            series.insert(id, Series::new(self.start, y, None)?);
        }
        Panel::new(series, statics)
    }
}

/// Default synthetic demand panel: log-uniform levels over [1, 1000], weekly
/// multiplicative seasonality, additive noise and zero inflation.
pub fn synth_panel(n_series: usize, n_days: usize, seed: u64) -> Result<Panel> {
    SynthOptions::new(n_series, n_days, seed).generate()
}
