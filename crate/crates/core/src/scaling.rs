//! Median temporal scaling: each series is split into a median level and
//! residuals, the network models residuals, and forecasts add a naive
//! projection of the level back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastMatrix;
use crate::util::median;

/// Level and residuals of one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingState {
    pub level: f64,
    pub residuals: Vec<f64>,
}

impl ScalingState {
    pub fn from_history(history: &[f64]) -> Result<Self> {
        let level = extract_level(history)?;
        Ok(Self {
            level,
            residuals: to_residuals(history, level),
        })
    }

    pub fn restore(&self) -> Vec<f64> {
        self.residuals.iter().map(|z| z + self.level).collect()
    }
}

/// Median of the history (mean of the central pair for even counts).
pub fn extract_level(history: &[f64]) -> Result<f64> {
    median(history).ok_or_else(|| Error::NotEnoughData("level of an empty history".into()))
}

pub fn to_residuals(history: &[f64], level: f64) -> Vec<f64> {
    history.iter().map(|y| y - level).collect()
}

/// Naive projection of the level: flat over the horizon.
pub fn level_forecast(level: f64, horizon: usize) -> Vec<f64> {
    vec![level; horizon]
}

/// Adds the level path to every quantile column of the residual forecast.
pub fn reconstruct(level_fc: &[f64], residual_fc: &ForecastMatrix) -> Result<ForecastMatrix> {
    if level_fc.len() != residual_fc.horizon() {
        return Err(Error::Shape(format!(
            "level path of length {} for a horizon of {}",
            level_fc.len(),
            residual_fc.horizon()
        )));
    }
    let mut out = residual_fc.clone();
    for (h, level) in level_fc.iter().enumerate() {
        for q in 0..out.n_quantiles() {
            out.set(h, q, residual_fc.get(h, q) + level);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn level_examples() {
        assert_eq!(extract_level(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap(), 3.0);
        assert_eq!(extract_level(&[1.0, 3.0]).unwrap(), 2.0);
        assert_eq!(extract_level(&[0.0; 9]).unwrap(), 0.0);
        assert!(extract_level(&[]).is_err());
    }

    #[test]
    fn residual_examples() {
        assert_eq!(to_residuals(&[5.0, 7.0], 6.0), vec![-1.0, 1.0]);
        assert_eq!(to_residuals(&[4.0; 3], 4.0), vec![0.0; 3]);
        let s = ScalingState::from_history(&[0.5, 7.25, 3.0, 1e3]).unwrap();
        assert_eq!(s.level, 5.125);
        assert_eq!(s.restore(), vec![0.5, 7.25, 3.0, 1e3]);
    }

    #[test]
    fn level_forecast_examples() {
        assert_eq!(level_forecast(3.0, 7), vec![3.0; 7]);
        assert_eq!(level_forecast(0.0, 2), vec![0.0; 2]);
    }

    #[test]
    fn reconstruct_examples() {
        let z = ForecastMatrix::from_vec(2, 2, vec![-1.0, 1.0, 0.0, 2.0]).unwrap();
        let y = reconstruct(&[3.0, 3.0], &z).unwrap();
        assert_eq!(y.values(), &[2.0, 4.0, 3.0, 5.0]);
        let flat = reconstruct(&level_forecast(4.0, 3), &ForecastMatrix::zeros(3, 4)).unwrap();
        assert!(flat.values().iter().all(|&v| v == 4.0));
        assert!(reconstruct(&[1.0], &z).is_err());
    }

    #[test]
    fn constant_series_with_zero_residual_model() {
        let history = vec![12.5; 40];
        let level = extract_level(&history).unwrap();
        let fc = reconstruct(&level_forecast(level, 7), &ForecastMatrix::zeros(7, 4)).unwrap();
        assert!(fc.values().iter().all(|&v| v == 12.5));
    }

    proptest! {
        #[test]
        fn shift_moves_level_not_residuals(
            ys in prop::collection::vec(0f64..1000.0, 1..60),
            c in -100f64..100.0,
        ) {
            // dyadic shift keeps the arithmetic exact
            let c = (c * 8.0).round() / 8.0;
            let ys: Vec<f64> = ys.iter().map(|y| (y * 8.0).round() / 8.0).collect();
            let shifted: Vec<f64> = ys.iter().map(|y| y + c).collect();
            let l0 = extract_level(&ys).unwrap();
            let l1 = extract_level(&shifted).unwrap();
            prop_assert_eq!(l1, l0 + c);
            prop_assert_eq!(to_residuals(&shifted, l1), to_residuals(&ys, l0));
        }

        #[test]
        fn level_is_permutation_invariant(mut ys in prop::collection::vec(-1e3f64..1e3, 1..50), seed in 0u64..1000) {
            let before = extract_level(&ys).unwrap();
            use rand::seq::SliceRandom;
            ys.shuffle(&mut crate::util::rng(seed));
            prop_assert_eq!(extract_level(&ys).unwrap(), before);
        }

        #[test]
        fn zero_residual_round_trip_is_flat_median(ys in prop::collection::vec(0f64..1e4, 1..80), h in 1usize..14) {
            let level = extract_level(&ys).unwrap();
            let fc = reconstruct(&level_forecast(level, h), &ForecastMatrix::zeros(h, 3)).unwrap();
            prop_assert!(fc.values().iter().all(|&v| v == level));
        }
    }
}
