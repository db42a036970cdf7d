//! Pinball loss, multi-quantile loss, calibration and the paired t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};
pub use crate::forecast::{Actuals, ForecastSet, QuantileSet};

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "q",
            value: q,
            reason: "quantile level must lie strictly inside (0, 1)",
        })
    }
}

/// Pinball loss without the domain check; callers guarantee `q ∈ (0, 1)`.
#[inline]
pub(crate) fn pinball(q: f64, y: f64, y_hat: f64) -> f64 {
    let d = y - y_hat;
    if d >= 0.0 {
        q * d
    } else {
        (q - 1.0) * d
    }
}

/// `q·max(0, y−ŷ) + (1−q)·max(0, ŷ−y)`.
pub fn quantile_loss(q: f64, y: f64, y_hat: f64) -> Result<f64> {
    check_q(q)?;
    Ok(pinball(q, y, y_hat))
}

/// Mean pinball loss of the constant forecast `c` over `samples`.
pub fn mean_pinball(samples: &[f64], q: f64, c: f64) -> f64 {
    samples.iter().map(|&y| pinball(q, y, c)).sum::<f64>() / samples.len() as f64
}

/// Pairs every forecast block with its actuals; errors list missing keys.
fn pairs<'a>(
    actuals: &'a Actuals,
    forecasts: &'a ForecastSet,
) -> Result<Vec<(&'a [f64], &'a crate::ForecastMatrix)>> {
    let mut out = Vec::with_capacity(forecasts.len());
    let mut missing = Vec::new();
    for ((id, window), block) in forecasts.blocks() {
        match actuals.get(id, *window) {
            Some(a) if a.len() == block.horizon() => out.push((a, block)),
            Some(a) => {
                return Err(Error::Shape(format!(
                    "actuals for ({id}, {window}) have {} values, forecasts {}",
                    a.len(),
                    block.horizon()
                )))
            }
            None => missing.push(format!("({id}, {window})")),
        }
    }
    if !missing.is_empty() {
        let shown: Vec<_> = missing.iter().take(10).cloned().collect();
        return Err(Error::KeyMismatch(format!(
            "{} forecast blocks lack actuals: {}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > 10 { ", ..." } else { "" }
        )));
    }
    Ok(out)
}

/// Multi-quantile loss: the mean pinball loss over every
/// (series, window, h, q) tuple of `forecasts`.
pub fn mql(actuals: &Actuals, forecasts: &ForecastSet) -> Result<f64> {
    let qs = forecasts.quantiles().as_slice();
    let pairs = pairs(actuals, forecasts)?;
    if pairs.is_empty() {
        return Err(Error::NotEnoughData("no forecasts to score".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (a, block) in pairs {
        for (h, &y) in a.iter().enumerate() {
            for (qi, &q) in qs.iter().enumerate() {
                total += pinball(q, y, block.get(h, qi));
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// Per-observation pinball losses for quantile column `qi`, in key order.
pub fn quantile_losses(actuals: &Actuals, forecasts: &ForecastSet, qi: usize) -> Result<Vec<f64>> {
    let q = *forecasts
        .quantiles()
        .as_slice()
        .get(qi)
        .ok_or_else(|| invalid("quantile index", qi.to_string()))?;
    Ok(pairs(actuals, forecasts)?
        .into_iter()
        .flat_map(|(a, block)| (0..a.len()).map(move |h| pinball(q, a[h], block.get(h, qi))))
        .collect())
}

/// Fraction of actuals at or below the forecast.
pub fn calibration(actuals: &[f64], forecasts: &[f64]) -> Result<f64> {
    if actuals.is_empty() {
        return Err(Error::NotEnoughData("calibration of an empty horizon".into()));
    }
    if actuals.len() != forecasts.len() {
        return Err(Error::Shape(format!(
            "{} actuals vs {} forecasts",
            actuals.len(),
            forecasts.len()
        )));
    }
    let covered = actuals.iter().zip(forecasts).filter(|(y, f)| y <= f).count();
    Ok(covered as f64 / actuals.len() as f64)
}

/// Calibration of quantile column `qi` pooled over every block.
pub fn calibration_of(actuals: &Actuals, forecasts: &ForecastSet, qi: usize) -> Result<f64> {
    let mut ys = Vec::new();
    let mut fs = Vec::new();
    for (a, block) in pairs(actuals, forecasts)? {
        ys.extend_from_slice(a);
        fs.extend(block.column(qi));
    }
    calibration(&ys, &fs)
}

pub fn calibration_gap(cl: f64, q: f64) -> f64 {
    (cl - q).abs()
}

/// Result of a two-sided paired t-test on `a − b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub mean_diff: f64,
    pub sem: f64,
    pub p_value: f64,
    /// Differences had zero variance but a nonzero mean.
    pub degenerate: bool,
}

pub fn paired_ttest(losses_a: &[f64], losses_b: &[f64]) -> Result<PairedTTest> {
    if losses_a.len() != losses_b.len() {
        return Err(Error::Shape(format!(
            "paired samples of length {} and {}",
            losses_a.len(),
            losses_b.len()
        )));
    }
    let n = losses_a.len();
    if n < 2 {
        return Err(Error::NotEnoughData("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = losses_a.iter().zip(losses_b).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sem = (var / n as f64).sqrt();
    if sem == 0.0 {
        let degenerate = mean != 0.0;
        return Ok(PairedTTest {
            mean_diff: mean,
            sem,
            p_value: if degenerate { 0.0 } else { 1.0 },
            degenerate,
        });
    }
    let t = mean / sem;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid t distribution");
    let p_value = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(PairedTTest {
        mean_diff: mean,
        sem,
        p_value,
        degenerate: false,
    })
}

/// The constant minimizing mean pinball loss over `samples`: the lower
/// empirical q-quantile, i.e. the smallest minimizer.
pub fn empirical_pinball_minimizer(samples: &[f64], q: f64) -> Result<f64> {
    check_q(q)?;
    if samples.is_empty() {
        return Err(Error::NotEnoughData("no samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // smallest k with k/n >= q, guarding against q·n landing a hair above an integer
    let mut k = (q * n as f64).ceil() as usize;
    if k > 0 && (k - 1) as f64 >= q * n as f64 - 1e-9 * n as f64 {
        k -= 1;
    }
    Ok(sorted[k.clamp(1, n) - 1])
}
