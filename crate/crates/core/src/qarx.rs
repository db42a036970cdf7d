//! Quantile autoregression with exogenous inputs (QAR-X): one linear
//! pinball-loss model per (series, quantile).
//!
//! Fitting runs averaged subgradient descent on standardized features and
//! then finishes with an exact descent over interpolating vertices
//! (Barrodale–Roberts style edge moves with a weighted-median line search),
//! so the returned coefficients are a true pinball-loss minimizer.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::pinball;

/// Regression rows `[1, y[t-l] for l in lags, exog[t]]` with targets `y[t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub lags: Vec<usize>,
    pub exog_width: usize,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Design {
    pub fn n_cols(&self) -> usize {
        1 + self.lags.len() + self.exog_width
    }

    pub fn column_name(&self, j: usize) -> String {
        if j == 0 {
            "intercept".into()
        } else if j <= self.lags.len() {
            format!("lag{}", self.lags[j - 1])
        } else {
            format!("exog{}", j - 1 - self.lags.len())
        }
    }

    /// Drops the given non-intercept columns (by design index).
    pub fn without_columns(&self, drop: &[usize]) -> Design {
        let keep = |j: usize| !drop.contains(&j);
        let lags = self
            .lags
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(i + 1))
            .map(|(_, &l)| l)
            .collect::<Vec<_>>();
        let exog_width = (0..self.exog_width).filter(|e| keep(1 + self.lags.len() + e)).count();
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(j, _)| keep(*j)).map(|(_, v)| *v).collect())
            .collect();
        Design {
            lags,
            exog_width,
            rows,
            targets: self.targets.clone(),
        }
    }

    /// Non-intercept columns with zero spread.
    pub fn constant_columns(&self) -> Vec<usize> {
        (1..self.n_cols())
            .filter(|&j| {
                let first = self.rows[0][j];
                self.rows.iter().all(|r| r[j] == first)
            })
            .collect()
    }
}

fn validate_lags(lags: &[usize]) -> Result<()> {
    if lags.is_empty() {
        return Ok(());
    }
    if lags.contains(&0) {
        return Err(invalid("lags", "lags must be positive"));
    }
    let mut sorted = lags.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != lags.len() {
        return Err(invalid("lags", "lags must be distinct"));
    }
    Ok(())
}

/// Builds the lagged design. `exog` is either empty or has one feature
/// vector per observation.
pub fn build_design(series: &[f64], exog: &[Vec<f64>], lags: &[usize]) -> Result<Design> {
    validate_lags(lags)?;
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if series.len() <= max_lag {
        return Err(Error::NotEnoughData(format!(
            "series of length {} with maximum lag {max_lag}",
            series.len()
        )));
    }
    if !exog.is_empty() && exog.len() != series.len() {
        return Err(Error::Shape(format!(
            "{} exog rows for {} observations",
            exog.len(),
            series.len()
        )));
    }
    let exog_width = exog.first().map_or(0, Vec::len);
    if exog.iter().any(|x| x.len() != exog_width) {
        return Err(Error::Shape("exog rows differ in width".into()));
    }
    let mut rows = Vec::with_capacity(series.len() - max_lag);
    let mut targets = Vec::with_capacity(series.len() - max_lag);
    for t in max_lag..series.len() {
        let mut row = Vec::with_capacity(1 + lags.len() + exog_width);
        row.push(1.0);
        row.extend(lags.iter().map(|&l| series[t - l]));
        if !exog.is_empty() {
            row.extend_from_slice(&exog[t]);
        }
        rows.push(row);
        targets.push(series[t]);
    }
    Ok(Design {
        lags: lags.to_vec(),
        exog_width,
        rows,
        targets,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub iterations: usize,
    /// `c` in the step size `c / sqrt(k)`, in standardized units.
    pub step_scale: f64,
    /// Finish with the exact vertex descent.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            iterations: 5000,
            step_scale: 1.0,
            polish: true,
        }
    }
}

/// Per-feature standardization `(x - mean) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub mean: f64,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QarxModel {
    pub q: f64,
    pub lags: Vec<usize>,
    pub beta0: f64,
    pub beta_lags: Vec<f64>,
    pub exog_coefs: Vec<f64>,
    /// Scaling of each non-intercept feature used during the fit.
    pub feature_scaling: Vec<Scale>,
    /// Target scaling used during the fit.
    pub target_scaling: Scale,
    /// Coefficients in standardized space, intercept first.
    pub std_coefs: Vec<f64>,
}

impl QarxModel {
    /// Model from raw coefficients, with identity scaling.
    pub fn from_raw(q: f64, lags: Vec<usize>, beta0: f64, beta_lags: Vec<f64>, exog_coefs: Vec<f64>) -> Result<Self> {
        validate_lags(&lags)?;
        if beta_lags.len() != lags.len() {
            return Err(Error::Shape(format!("{} lag coefficients for {} lags", beta_lags.len(), lags.len())));
        }
        let p = beta_lags.len() + exog_coefs.len();
        let mut std_coefs = vec![beta0];
        std_coefs.extend_from_slice(&beta_lags);
        std_coefs.extend_from_slice(&exog_coefs);
        Ok(Self {
            q,
            lags,
            beta0,
            beta_lags,
            exog_coefs,
            feature_scaling: vec![Scale { mean: 0.0, scale: 1.0 }; p],
            target_scaling: Scale { mean: 0.0, scale: 1.0 },
            std_coefs,
        })
    }

    pub fn max_lag(&self) -> usize {
        self.lags.iter().copied().max().unwrap_or(0)
    }

    /// Prediction for a raw feature row without the leading 1, through the
    /// stored standardization.
    pub fn predict_features(&self, features: &[f64]) -> f64 {
        let z: f64 = self.std_coefs[0]
            + features
                .iter()
                .zip(&self.feature_scaling)
                .zip(&self.std_coefs[1..])
                .map(|((x, s), c)| c * (x - s.mean) / s.scale)
                .sum::<f64>();
        self.target_scaling.mean + self.target_scaling.scale * z
    }

    /// Prediction from the raw coefficients.
    pub fn predict_raw(&self, features: &[f64]) -> f64 {
        let coefs = self.beta_lags.iter().chain(&self.exog_coefs);
        self.beta0 + features.iter().zip(coefs).map(|(x, c)| x * c).sum::<f64>()
    }

    fn features_at(&self, y: &[f64], t: usize, exog: &[f64]) -> Vec<f64> {
        let mut f: Vec<f64> = self.lags.iter().map(|&l| y[t - l]).collect();
        f.extend_from_slice(exog);
        f
    }
}

/// Mean pinball loss of raw coefficients (intercept first) on a design.
pub fn design_loss(design: &Design, coefs: &[f64], q: f64) -> f64 {
    design
        .rows
        .iter()
        .zip(&design.targets)
        .map(|(row, &y)| pinball(q, y, dot(row, coefs)))
        .sum::<f64>()
        / design.rows.len() as f64
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the q-th quantile regression.
pub fn fit(design: &Design, q: f64, opts: &SolverOptions) -> Result<QarxModel> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain {
            name: "q",
            value: q,
            reason: "quantile level must lie strictly inside (0, 1)",
        });
    }
    let n = design.rows.len();
    let p = design.n_cols();
    if n < p {
        return Err(Error::NotEnoughData(format!("{n} rows for {p} columns")));
    }
    if design.rows.iter().any(|r| r.len() != p) {
        return Err(Error::Shape("design rows differ in width".into()));
    }

    let mut scaling = Vec::with_capacity(p - 1);
    for j in 1..p {
        let mean = design.rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = design.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        let spread = design.rows.iter().map(|r| r[j].abs()).fold(0.0, f64::max);
        let sd = var.sqrt();
        if sd <= 1e-12 * spread.max(f64::MIN_POSITIVE) || sd == 0.0 {
            return Err(Error::DegenerateDesign {
                column: j,
                name: design.column_name(j),
            });
        }
        scaling.push(Scale { mean, scale: sd });
    }
    let y_mean = design.targets.iter().sum::<f64>() / n as f64;
    let y_sd = (design.targets.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let target = Scale {
        mean: y_mean,
        scale: if y_sd > 0.0 { y_sd } else { 1.0 },
    };

    let z: Vec<Vec<f64>> = design
        .rows
        .iter()
        .map(|r| {
            let mut row = Vec::with_capacity(p);
            row.push(1.0);
            row.extend(r[1..].iter().zip(&scaling).map(|(x, s)| (x - s.mean) / s.scale));
            row
        })
        .collect();
    let ys: Vec<f64> = design.targets.iter().map(|y| (y - target.mean) / target.scale).collect();

    let mut coefs = subgradient(&z, &ys, q, opts);
    if opts.polish {
        coefs = vertex_descent(&z, &ys, q, &coefs)?;
    }

    // back to raw units
    let mut beta0 = target.mean + target.scale * coefs[0];
    let mut raw = Vec::with_capacity(p - 1);
    for (c, s) in coefs[1..].iter().zip(&scaling) {
        let b = target.scale * c / s.scale;
        beta0 -= b * s.mean;
        raw.push(b);
    }
    let n_lags = design.lags.len();
    Ok(QarxModel {
        q,
        lags: design.lags.clone(),
        beta0,
        beta_lags: raw[..n_lags].to_vec(),
        exog_coefs: raw[n_lags..].to_vec(),
        feature_scaling: scaling,
        target_scaling: target,
        std_coefs: coefs,
    })
}

/// Averaged subgradient descent with step `c / sqrt(k)`.
fn subgradient(z: &[Vec<f64>], ys: &[f64], q: f64, opts: &SolverOptions) -> Vec<f64> {
    let n = z.len() as f64;
    let p = z[0].len();
    let mut beta = vec![0.0; p];
    let mut avg = vec![0.0; p];
    let mut g = vec![0.0; p];
    for k in 1..=opts.iterations {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (row, &y) in z.iter().zip(ys) {
            let r = y - dot(row, &beta);
            let w = if r > 0.0 {
                -q
            } else if r < 0.0 {
                1.0 - q
            } else {
                0.0
            };
            if w != 0.0 {
                for (gj, xj) in g.iter_mut().zip(row) {
                    *gj += w * xj;
                }
            }
        }
        let eta = opts.step_scale / (k as f64).sqrt();
        for (b, gj) in beta.iter_mut().zip(&g) {
            *b -= eta * gj / n;
        }
        let w = 1.0 / k as f64;
        for (a, b) in avg.iter_mut().zip(&beta) {
            *a += w * (b - *a);
        }
    }
    avg
}

/// Gauss–Jordan inverse with partial pivoting; `None` when singular.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let p = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-13 {
            return None;
        }
        m.swap(col, piv);
        let d = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= d);
        for i in 0..p {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (v, pv) in m[i].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[p..].to_vec()).collect())
}

/// Greedy choice of `p` linearly independent rows, smallest |residual| first.
fn initial_basis(z: &[Vec<f64>], residuals: &[f64]) -> Option<Vec<usize>> {
    let p = z[0].len();
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| residuals[a].abs().total_cmp(&residuals[b].abs()).then(a.cmp(&b)));
    let mut basis = Vec::with_capacity(p);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    for i in order {
        let mut v = z[i].clone();
        for u in &ortho {
            let c = dot(&v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let norm = dot(&v, &v).sqrt();
        let scale = dot(&z[i], &z[i]).sqrt();
        if norm > 1e-8 * scale.max(1.0) {
            v.iter_mut().for_each(|a| *a /= norm);
            ortho.push(v);
            basis.push(i);
            if basis.len() == p {
                return Some(basis);
            }
        }
    }
    None
}

/// Exact minimization of the pinball objective by moving between vertices
/// where `p` rows are interpolated.
fn vertex_descent(z: &[Vec<f64>], ys: &[f64], q: f64, start: &[f64]) -> Result<Vec<f64>> {
    let n = z.len();
    let p = z[0].len();
    let residuals: Vec<f64> = z.iter().zip(ys).map(|(r, y)| y - dot(r, start)).collect();
    let mut basis = initial_basis(z, &residuals)
        .ok_or_else(|| invalid("design", "columns are linearly dependent"))?;
    let y_scale = ys.iter().map(|y| y.abs()).fold(1.0, f64::max);
    let zero_tol = 1e-11 * y_scale;
    let mut in_basis = vec![false; n];
    let mut best: Option<(f64, Vec<f64>)> = None;

    for _ in 0..(50 * n + 100) {
        let zb: Vec<Vec<f64>> = basis.iter().map(|&i| z[i].clone()).collect();
        let binv = invert(&zb).ok_or_else(|| invalid("design", "singular interpolation basis"))?;
        let beta: Vec<f64> = (0..p)
            .map(|k| basis.iter().enumerate().map(|(j, &i)| binv[k][j] * ys[i]).sum())
            .collect();
        let r: Vec<f64> = z.iter().zip(ys).map(|(row, y)| y - dot(row, &beta)).collect();
        let loss: f64 = r.iter().map(|&v| pinball(q, v, 0.0)).sum();
        if best.as_ref().is_none_or(|(l, _)| loss < *l) {
            best = Some((loss, beta.clone()));
        }
        in_basis.iter_mut().for_each(|v| *v = false);
        basis.iter().for_each(|&i| in_basis[i] = true);

        // w[i][j] = z_i · (column j of B^-1): change of z_i·beta along edge j
        let w: Vec<Vec<f64>> = z
            .iter()
            .map(|row| (0..p).map(|j| (0..p).map(|k| row[k] * binv[k][j]).sum()).collect())
            .collect();

        let mut best_dir: Option<(usize, f64, f64)> = None;
        for j in 0..p {
            for sigma in [1.0, -1.0] {
                // leaving row residual goes from 0 at rate -sigma
                let mut slope = pinball(q, -sigma, 0.0);
                for i in 0..n {
                    if in_basis[i] {
                        continue;
                    }
                    let a = -sigma * w[i][j];
                    slope += if r[i] > zero_tol {
                        q * a
                    } else if r[i] < -zero_tol {
                        (q - 1.0) * a
                    } else {
                        pinball(q, a, 0.0)
                    };
                }
                if slope < -1e-12 && best_dir.is_none_or(|(_, _, s)| slope < s) {
                    best_dir = Some((j, sigma, slope));
                }
            }
        }
        let Some((j, sigma, mut slope)) = best_dir else {
            return Ok(beta);
        };

        // weighted-median line search over the kinks along the edge
        let mut kinks: Vec<(f64, usize, f64)> = (0..n)
            .filter(|&i| !in_basis[i])
            .filter_map(|i| {
                let a = -sigma * w[i][j];
                if a == 0.0 || r[i].abs() <= zero_tol {
                    return None;
                }
                let t = -r[i] / a;
                (t > 0.0).then_some((t, i, a.abs()))
            })
            .collect();
        kinks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut entering = None;
        for (_, i, weight) in kinks {
            slope += weight;
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        match entering {
            Some(i) => basis[j] = i,
            None => break,
        }
    }
    Ok(best.map(|(_, b)| b).expect("at least one vertex visited"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForecastMode {
    /// Feed each prediction back as a pseudo-observation.
    Recursive,
    /// Seasonal Naive (m = 7) over the in-sample fitted values.
    FittedSeasonalNaive,
}

impl std::str::FromStr for ForecastMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recursive" => Ok(Self::Recursive),
            "fitted_seasonal_naive" => Ok(Self::FittedSeasonalNaive),
            _ => Err(invalid("qarx mode", format!("'{s}' (expected recursive or fitted_seasonal_naive)"))),
        }
    }
}

impl std::fmt::Display for ForecastMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Recursive => "recursive",
            Self::FittedSeasonalNaive => "fitted_seasonal_naive",
        })
    }
}

/// Forecasts `h_max` steps past the end of `history`.
///
/// `exog_history` (one row per history point) is only read in
/// fitted-seasonal-naive mode; `exog_future` must cover `h_max` steps.
pub fn forecast(
    model: &QarxModel,
    history: &[f64],
    exog_history: &[Vec<f64>],
    exog_future: &[Vec<f64>],
    h_max: usize,
    mode: ForecastMode,
) -> Result<Vec<f64>> {
    let max_lag = model.max_lag();
    if history.len() < max_lag {
        return Err(Error::NotEnoughData(format!(
            "history of length {} for maximum lag {max_lag}",
            history.len()
        )));
    }
    let width = model.exog_coefs.len();
    match mode {
        ForecastMode::Recursive => {
            if width > 0 && exog_future.len() < h_max {
                return Err(Error::NotEnoughData(format!(
                    "{} future exog rows for a horizon of {h_max}",
                    exog_future.len()
                )));
            }
            let mut y = history.to_vec();
            let empty = Vec::new();
            for step in 0..h_max {
                let x = if width > 0 { &exog_future[step] } else { &empty };
                let t = y.len();
                let f = model.predict_features(&model.features_at(&y, t, x));
                y.push(f);
            }
            Ok(y[history.len()..].to_vec())
        }
        ForecastMode::FittedSeasonalNaive => {
            const M: usize = 7;
            if width > 0 && exog_history.len() != history.len() {
                return Err(Error::Shape("exog history must match the history length".into()));
            }
            if history.len() < max_lag + M {
                return Err(Error::NotEnoughData("too few fitted values for a weekly projection".into()));
            }
            let empty = Vec::new();
            let fitted: Vec<f64> = (max_lag..history.len())
                .map(|t| {
                    let x = if width > 0 { &exog_history[t] } else { &empty };
                    model.predict_features(&model.features_at(history, t, x))
                })
                .collect();
            crate::baselines::seasonal_naive_forecast(&fitted, M, h_max)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_examples() {
        let d = build_design(&[1.0, 2.0, 3.0, 4.0], &[], &[1]).unwrap();
        assert_eq!(d.rows, vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]);
        assert_eq!(d.targets, vec![2.0, 3.0, 4.0]);
        let y: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(build_design(&y, &[], &[1, 7]).unwrap().rows.len(), 3);
        let exog: Vec<Vec<f64>> = (0..10).map(|t| (0..6).map(|k| ((t % 7) == k + 1) as u8 as f64).collect()).collect();
        let d = build_design(&y, &exog, &[1, 7]).unwrap();
        assert_eq!(d.rows[0].len(), 9);
        assert!(build_design(&y[..7], &[], &[1, 7]).is_err());
        assert!(build_design(&y, &[], &[0]).is_err());
    }

    #[test]
    fn noiseless_ar1_is_recovered() {
        let mut y = vec![0.0];
        for _ in 0..30 {
            let last = *y.last().unwrap();
            y.push(3.0 + 0.5 * last);
        }
        let d = build_design(&y, &[], &[1]).unwrap();
        for q in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let m = fit(&d, q, &SolverOptions::default()).unwrap();
            assert!((m.beta0 - 3.0).abs() < 1e-6, "q {q}: {}", m.beta0);
            assert!((m.beta_lags[0] - 0.5).abs() < 1e-6, "q {q}: {}", m.beta_lags[0]);
            let mut raw = vec![m.beta0];
            raw.extend(&m.beta_lags);
            assert!(design_loss(&d, &raw, q) < 1e-6);
        }
    }

    #[test]
    fn constant_lag_column_is_rejected() {
        let d = build_design(&[2.0; 20], &[], &[1]).unwrap();
        match fit(&d, 0.5, &SolverOptions::default()) {
            Err(Error::DegenerateDesign { column, name }) => {
                assert_eq!(column, 1);
                assert_eq!(name, "lag1");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(d.constant_columns(), vec![1]);
    }

    #[test]
    fn intercept_only_recovers_normal_quantile() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let dist = Normal::new(0.0, 1.0).unwrap();
        let targets: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut r)).collect();
        let d = Design {
            lags: vec![],
            exog_width: 0,
            rows: vec![vec![1.0]; targets.len()],
            targets: targets.clone(),
        };
        let m = fit(&d, 0.9, &SolverOptions { iterations: 200, ..Default::default() }).unwrap();
        assert!((m.beta0 - 1.2816).abs() < 0.05, "{}", m.beta0);
        // exact solver: the empirical quantile itself
        let emp = crate::metrics::empirical_pinball_minimizer(&targets, 0.9).unwrap();
        let gap = design_loss(&d, &[m.beta0], 0.9) - design_loss(&d, &[emp], 0.9);
        assert!(gap.abs() < 1e-9, "{gap}");
    }

    #[test]
    fn standardized_and_raw_predictions_agree() {
        let mut y = vec![1.0];
        for t in 1..50 {
            let last = *y.last().unwrap();
            y.push(2.0 + 0.3 * last + 0.1 * t as f64);
        }
        let exog: Vec<Vec<f64>> = (0..50).map(|t| vec![t as f64]).collect();
        let d = build_design(&y, &exog, &[1]).unwrap();
        let m = fit(&d, 0.5, &SolverOptions::default()).unwrap();
        for row in &d.rows {
            let a = m.predict_features(&row[1..]);
            let b = m.predict_raw(&row[1..]);
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
        assert!((m.beta0 - 2.0).abs() < 1e-6 && (m.beta_lags[0] - 0.3).abs() < 1e-6);
        assert!((m.exog_coefs[0] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn recursive_forecast_examples() {
        let m = QarxModel::from_raw(0.5, vec![1], 0.0, vec![1.0], vec![]).unwrap();
        let fc = forecast(&m, &[1.0, 2.0, 5.0], &[], &[], 3, ForecastMode::Recursive).unwrap();
        assert_eq!(fc, vec![5.0; 3]);
        let m = QarxModel::from_raw(0.5, vec![1], 1.0, vec![0.0], vec![]).unwrap();
        assert_eq!(forecast(&m, &[9.0], &[], &[], 4, ForecastMode::Recursive).unwrap(), vec![1.0; 4]);
        let m = QarxModel::from_raw(0.5, vec![1], 1.0, vec![0.0], vec![2.0]).unwrap();
        assert!(forecast(&m, &[9.0], &[], &[vec![1.0]], 4, ForecastMode::Recursive).is_err());
    }

    #[test]
    fn fitted_seasonal_naive_on_periodic_series() {
        let week = [3.0, 5.0, 4.0, 8.0, 9.0, 1.0, 2.0];
        let y: Vec<f64> = (0..35).map(|t| week[t % 7]).collect();
        let m = QarxModel::from_raw(0.5, vec![7], 0.0, vec![1.0], vec![]).unwrap();
        let fc = forecast(&m, &y, &[], &[], 7, ForecastMode::FittedSeasonalNaive).unwrap();
        let next: Vec<f64> = (35..42).map(|t| week[t % 7]).collect();
        assert_eq!(fc, next);
    }
}
