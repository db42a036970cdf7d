use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::panel::{Panel, SplitSpec};

/// Rolling-origin schedule over the test span.
///
/// Window `k` is fitted on data up to and including `origins[k]` and
/// forecasts the `horizon` days after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestPlan {
    pub origins: Vec<NaiveDate>,
    pub horizon: usize,
    pub stride: usize,
    pub retrain: bool,
    pub ensemble_size: usize,
    pub earlystop_windows: usize,
    pub earlystop_length: usize,
    pub seed: u64,
    /// Give every ensemble member the same seed (testing aid).
    pub shared_instance_seeds: bool,
}

impl BacktestPlan {
    pub fn n_windows(&self) -> usize {
        self.origins.len()
    }

    pub fn first_target(&self, window: usize) -> NaiveDate {
        self.origins[window] + Duration::days(1)
    }

    pub fn last_target(&self, window: usize) -> NaiveDate {
        self.origins[window] + Duration::days(self.horizon as i64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.origins.is_empty() {
            return Err(invalid("plan", "no windows"));
        }
        if self.horizon == 0 || self.stride == 0 {
            return Err(invalid("plan", "horizon and stride must be at least 1"));
        }
        if self.horizon != self.stride {
            return Err(invalid("plan", "horizon must equal stride"));
        }
        if self.ensemble_size == 0 {
            return Err(invalid("ensemble_size", "must be at least 1"));
        }
        if self.earlystop_windows == 0 || self.earlystop_length < self.horizon {
            return Err(invalid(
                "early stopping",
                "need at least one block at least one horizon long",
            ));
        }
        Ok(())
    }
}

/// Largest window count whose targets all fall inside a span of `span_days`.
pub fn feasible_windows(span_days: i64, horizon: usize, stride: usize) -> usize {
    if span_days < horizon as i64 || stride == 0 {
        return 0;
    }
    ((span_days - horizon as i64) / stride as i64 + 1) as usize
}

/// Origins at `val_end + k·stride` for `k < n_windows`.
pub fn make_plan(panel: &Panel, split: &SplitSpec, horizon: usize, stride: usize, n_windows: usize) -> Result<BacktestPlan> {
    SplitSpec::new(split.train_end, split.val_end, split.test_end)?;
    if split.test_end > panel.end_date() {
        return Err(Error::NotEnoughData(format!(
            "test span ends {} after the panel's last date {}",
            split.test_end,
            panel.end_date()
        )));
    }
    let feasible = feasible_windows(split.test_span_days(), horizon, stride);
    if n_windows == 0 || n_windows > feasible {
        return Err(invalid(
            "n_windows",
            format!(
                "{n_windows} windows do not fit a {}-day test span (maximum feasible: {feasible})",
                split.test_span_days()
            ),
        ));
    }
    let plan = BacktestPlan {
        origins: (0..n_windows)
            .map(|k| split.val_end + Duration::days((k * stride) as i64))
            .collect(),
        horizon,
        stride,
        retrain: true,
        ensemble_size: 1,
        earlystop_windows: 3,
        earlystop_length: 28,
        seed: 0,
        shared_instance_seeds: false,
    };
    plan.validate()?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::synth_panel;

    #[test]
    fn yearly_test_span_has_53_weeks() {
        assert_eq!(feasible_windows(371, 7, 7), 53);
        assert_eq!(feasible_windows(370, 7, 7), 52);
        assert_eq!(feasible_windows(6, 7, 7), 0);
    }

    #[test]
    fn first_window_follows_val_end() {
        let p = synth_panel(2, 120, 0).unwrap();
        let split = SplitSpec::trailing(&p, 28, 28).unwrap();
        let plan = make_plan(&p, &split, 7, 7, 4).unwrap();
        assert_eq!(plan.origins[0], split.val_end);
        assert_eq!(plan.first_target(0), split.val_end + Duration::days(1));
        assert_eq!(plan.last_target(3), split.test_end);
        let err = make_plan(&p, &split, 7, 7, 5).unwrap_err().to_string();
        assert!(err.contains("maximum feasible: 4"), "{err}");
    }
}
