use crate::error::{invalid, Error, Result};

/// Repeats the last observation over `h_max` steps.
pub fn naive_forecast(series: &[f64], h_max: usize) -> Result<Vec<f64>> {
    let last = *series
        .last()
        .ok_or_else(|| Error::NotEnoughData("naive forecast of an empty series".into()))?;
    if h_max == 0 {
        return Err(invalid("horizon", "must be at least 1"));
    }
    Ok(vec![last; h_max])
}

/// Step `h` takes the most recent observation of the same season,
/// `y[T + h - m·ceil(h/m)]`.
pub fn seasonal_naive_forecast(series: &[f64], m: usize, h_max: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(invalid("season length", "must be at least 1"));
    }
    if series.len() < m {
        return Err(Error::NotEnoughData(format!(
            "series of length {} is shorter than the season {m}",
            series.len()
        )));
    }
    if h_max == 0 {
        return Err(invalid("horizon", "must be at least 1"));
    }
    let n = series.len();
    Ok((1..=h_max)
        .map(|h| {
            let back = m * h.div_ceil(m);
            // index of y_{T+h-back} with y_T at n-1
            series[n - 1 + h - back]
        })
        .collect())
}
