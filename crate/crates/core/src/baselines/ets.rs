//! Exponential smoothing state recursions: trend ∈ {none, additive, damped}
//! × seasonal ∈ {none, additive, multiplicative}, additive errors.
//!
//! The seasonal ring holds the last `m` seasonal states oldest first, so
//! `ring[0]` is `s[t-m+1]`, the state consumed by the next update. Forecast
//! step `h` reads `ring[(h-1) % m]`, i.e. `s[t+h-m(k+1)]` with
//! `k = (h-1) / m`: the most recent estimate for the target season.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    None,
    Additive,
    Damped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Seasonal {
    None,
    Additive,
    Multiplicative,
}

impl std::str::FromStr for Trend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "none" => Ok(Trend::None),
            "a" | "additive" => Ok(Trend::Additive),
            "ad" | "damped" => Ok(Trend::Damped),
            _ => Err(invalid("ets trend", format!("'{s}' (expected none, additive or damped)"))),
        }
    }
}

impl std::str::FromStr for Seasonal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "none" => Ok(Seasonal::None),
            "a" | "additive" => Ok(Seasonal::Additive),
            "m" | "multiplicative" => Ok(Seasonal::Multiplicative),
            _ => Err(invalid(
                "ets seasonal",
                format!("'{s}' (expected none, additive or multiplicative)"),
            )),
        }
    }
}

impl std::fmt::Display for Trend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Trend::None => "none",
            Trend::Additive => "additive",
            Trend::Damped => "damped",
        })
    }
}

impl std::fmt::Display for Seasonal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Seasonal::None => "none",
            Seasonal::Additive => "additive",
            Seasonal::Multiplicative => "multiplicative",
        })
    }
}

/// Model shape plus smoothing parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtsSpec {
    pub trend: Trend,
    pub seasonal: Seasonal,
    pub m: usize,
    pub alpha: f64,
    pub beta_star: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl EtsSpec {
    pub fn new(
        trend: Trend,
        seasonal: Seasonal,
        m: usize,
        alpha: f64,
        beta_star: f64,
        gamma: f64,
        phi: f64,
    ) -> Result<Self> {
        let unit = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Domain {
                    name,
                    value: v,
                    reason: "smoothing parameters lie in [0, 1]",
                })
            }
        };
        unit("alpha", alpha)?;
        unit("beta_star", beta_star)?;
        unit("gamma", gamma)?;
        if !(phi > 0.0 && phi <= 1.0) {
            return Err(Error::Domain {
                name: "phi",
                value: phi,
                reason: "damping lies in (0, 1]",
            });
        }
        if m == 0 || (seasonal != Seasonal::None && m < 2) {
            return Err(invalid("season length", format!("m = {m} is too small for {seasonal} seasonality")));
        }
        Ok(Self {
            trend,
            seasonal,
            m,
            alpha,
            beta_star,
            gamma,
            phi,
        })
    }
}

/// Level, optional slope and optional seasonal ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtsState {
    pub level: f64,
    pub slope: Option<f64>,
    pub seasonal_ring: Option<Vec<f64>>,
}

impl EtsState {
    fn check(&self, spec: &EtsSpec) -> Result<()> {
        if (spec.trend == Trend::None) != self.slope.is_none() {
            return Err(invalid("ets state", "slope must be present exactly when the model has a trend"));
        }
        match (&self.seasonal_ring, spec.seasonal) {
            (None, Seasonal::None) => Ok(()),
            (Some(r), s) if s != Seasonal::None && r.len() == spec.m => Ok(()),
            _ => Err(invalid(
                "ets state",
                format!("seasonal ring must hold exactly m = {} values when seasonal", spec.m),
            )),
        }
    }
}

/// One step of the recursion on unpacked components. Returns
/// `(level, slope, new seasonal)`.
#[inline]
fn step(spec: &EtsSpec, l0: f64, b0: f64, s_old: f64, y: f64) -> Result<(f64, f64, f64)> {
    let (alpha, beta, gamma, phi) = (spec.alpha, spec.beta_star, spec.gamma, spec.phi);
    // the level projected one step ahead, per trend type
    let projected = match spec.trend {
        Trend::None => l0,
        Trend::Additive => l0 + b0,
        Trend::Damped => l0 + phi * b0,
    };
    let l = match spec.seasonal {
        Seasonal::None => alpha * y + (1.0 - alpha) * projected,
        Seasonal::Additive => alpha * (y - s_old) + (1.0 - alpha) * projected,
        Seasonal::Multiplicative => {
            if s_old <= 0.0 {
                return Err(Error::NonPositiveDivisor {
                    component: "seasonal state s[t-m]",
                    value: s_old,
                });
            }
            alpha * (y / s_old) + (1.0 - alpha) * projected
        }
    };
    let b = match spec.trend {
        Trend::None => 0.0,
        Trend::Additive => beta * (l - l0) + (1.0 - beta) * b0,
        Trend::Damped => beta * (l - l0) + (1.0 - beta) * phi * b0,
    };
    let s = match spec.seasonal {
        Seasonal::None => 0.0,
        Seasonal::Additive => {
            let detrended = match spec.trend {
                Trend::None => y - l0,
                Trend::Additive => y - l0 - b0,
                Trend::Damped => y - l0 - phi * b0,
            };
            gamma * detrended + (1.0 - gamma) * s_old
        }
        Seasonal::Multiplicative => {
            if projected <= 0.0 {
                return Err(Error::NonPositiveDivisor {
                    component: match spec.trend {
                        Trend::None => "level l[t-1]",
                        _ => "projected level l[t-1] + b[t-1]",
                    },
                    value: projected,
                });
            }
            gamma * (y / projected) + (1.0 - gamma) * s_old
        }
    };
    Ok((l, b, s))
}

#[inline]
fn forecast_with(spec: &EtsSpec, l: f64, b: f64, s_target: f64, h: usize) -> f64 {
    let trend = match spec.trend {
        Trend::None => l,
        Trend::Additive => l + h as f64 * b,
        Trend::Damped => {
            // phi_h = phi + phi^2 + ... + phi^h
            let mut phi_h = 0.0;
            let mut p = 1.0;
            for _ in 0..h {
                p *= spec.phi;
                phi_h += p;
            }
            l + phi_h * b
        }
    };
    match spec.seasonal {
        Seasonal::None => trend,
        Seasonal::Additive => trend + s_target,
        Seasonal::Multiplicative => trend * s_target,
    }
}

/// Advances the state by one observation.
pub fn ets_update(spec: &EtsSpec, state: &EtsState, y: f64) -> Result<EtsState> {
    state.check(spec)?;
    let b0 = state.slope.unwrap_or(0.0);
    let s_old = state.seasonal_ring.as_ref().map_or(0.0, |r| r[0]);
    let (l, b, s) = step(spec, state.level, b0, s_old, y)?;
    Ok(EtsState {
        level: l,
        slope: state.slope.map(|_| b),
        seasonal_ring: state.seasonal_ring.as_ref().map(|r| {
            let mut next = Vec::with_capacity(r.len());
            next.extend_from_slice(&r[1..]);
            next.push(s);
            next
        }),
    })
}

/// Point forecast `h ≥ 1` steps ahead of the state.
pub fn ets_point_forecast(spec: &EtsSpec, state: &EtsState, h: usize) -> Result<f64> {
    state.check(spec)?;
    if h == 0 {
        return Err(invalid("horizon", "forecast step must be at least 1"));
    }
    let s = state
        .seasonal_ring
        .as_ref()
        .map_or(0.0, |r| r[(h - 1) % spec.m]);
    Ok(forecast_with(spec, state.level, state.slope.unwrap_or(0.0), s, h))
}

/// A fitted model: parameters, the initial state the recursion starts from,
/// and the state after consuming the fitting series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtsFit {
    pub spec: EtsSpec,
    pub initial: EtsState,
    pub state: EtsState,
    /// In-sample one-step squared error.
    pub sse: f64,
}

impl EtsFit {
    pub fn forecast(&self, h_max: usize) -> Result<Vec<f64>> {
        (1..=h_max)
            .map(|h| ets_point_forecast(&self.spec, &self.state, h))
            .collect()
    }

    /// Runs the fitted recursion from the initial state over `series`.
    pub fn run(&self, series: &[f64]) -> Result<EtsState> {
        series
            .iter()
            .try_fold(self.initial.clone(), |s, &y| ets_update(&self.spec, &s, y))
    }
}

fn initial_state(series: &[f64], trend: Trend, seasonal: Seasonal, m: usize) -> Result<EtsState> {
    let span = if seasonal == Seasonal::None { 10 } else { m };
    let head = &series[..span];
    let level = head.iter().sum::<f64>() / span as f64;
    let slope = (trend != Trend::None).then(|| (head[span - 1] - head[0]) / (span - 1).max(1) as f64);
    let seasonal_ring = match seasonal {
        Seasonal::None => None,
        _ => {
            let seasons = 3.min(series.len() / m);
            let avg: Vec<f64> = (0..m)
                .map(|j| (0..seasons).map(|i| series[j + i * m]).sum::<f64>() / seasons as f64)
                .collect();
            Some(if seasonal == Seasonal::Additive {
                let raw: Vec<f64> = avg.iter().map(|a| a - level).collect();
                let mean = raw.iter().sum::<f64>() / m as f64;
                raw.iter().map(|s| s - mean).collect()
            } else {
                if level <= 0.0 {
                    return Err(Error::NonPositiveDivisor {
                        component: "initial level",
                        value: level,
                    });
                }
                let raw: Vec<f64> = avg.iter().map(|a| a / level).collect();
                let mean = raw.iter().sum::<f64>() / m as f64;
                let ring: Vec<f64> = raw.iter().map(|s| s / mean).collect();
                if let Some(&bad) = ring.iter().find(|s| **s <= 0.0) {
                    return Err(Error::NonPositiveDivisor {
                        component: "initial seasonal state",
                        value: bad,
                    });
                }
                ring
            })
        }
    };
    Ok(EtsState {
        level,
        slope,
        seasonal_ring,
    })
}

/// In-sample one-step SSE from `init`, or `None` if the recursion hits a
/// nonpositive divisor. Uses a circular buffer in place of [`ets_update`]'s
/// ring copy; both go through the same step function.
fn one_step_sse(spec: &EtsSpec, init: &EtsState, series: &[f64], ring: &mut Vec<f64>) -> Option<f64> {
    ring.clear();
    if let Some(r) = &init.seasonal_ring {
        ring.extend_from_slice(r);
    }
    let mut head = 0usize;
    let (mut l, mut b) = (init.level, init.slope.unwrap_or(0.0));
    let mut sse = 0.0;
    for &y in series {
        let s_old = if ring.is_empty() { 0.0 } else { ring[head] };
        let e = y - forecast_with(spec, l, b, s_old, 1);
        sse += e * e;
        let (nl, nb, ns) = step(spec, l, b, s_old, y).ok()?;
        l = nl;
        b = nb;
        if !ring.is_empty() {
            ring[head] = ns;
            head = (head + 1) % ring.len();
        }
    }
    sse.is_finite().then_some(sse)
}

fn grid(step: f64, lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Fits smoothing parameters by grid search on in-sample one-step squared
/// error. α, β*, γ step 0.05 over [0, 1]; φ step 0.02 over [0.8, 1].
/// Ties keep the earliest grid point, so the smallest α wins.
pub fn ets_fit(series: &[f64], trend: Trend, seasonal: Seasonal, m: usize) -> Result<EtsFit> {
    let m = if seasonal == Seasonal::None { 1 } else { m };
    let needed = 10.max(3 * m);
    if series.len() < needed {
        return Err(Error::NotEnoughData(format!(
            "ETS fit needs at least {needed} observations, got {}",
            series.len()
        )));
    }
    if seasonal == Seasonal::Multiplicative && series.iter().all(|&y| y == 0.0) {
        return Err(invalid("ets fit", "multiplicative seasonality on an all-zero series"));
    }
    let init = initial_state(series, trend, seasonal, m)?;
    let unit = grid(0.05, 0.0, 1.0);
    let alphas = unit.clone();
    let betas = if trend == Trend::None { vec![0.0] } else { unit.clone() };
    let gammas = if seasonal == Seasonal::None { vec![0.0] } else { unit };
    let phis = if trend == Trend::Damped { grid(0.02, 0.8, 1.0) } else { vec![1.0] };

    let mut best: Option<(f64, EtsSpec)> = None;
    let mut ring = Vec::with_capacity(m);
    for &alpha in &alphas {
        for &beta in &betas {
            for &gamma in &gammas {
                for &phi in &phis {
                    let spec = EtsSpec::new(trend, seasonal, m, alpha, beta, gamma, phi)?;
                    if let Some(sse) = one_step_sse(&spec, &init, series, &mut ring) {
                        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                            best = Some((sse, spec));
                        }
                    }
                }
            }
        }
    }
    let (sse, spec) = best.ok_or_else(|| invalid("ets fit", "every parameter combination hit a nonpositive divisor"))?;
    let fit = EtsFit {
        spec,
        initial: init.clone(),
        state: init,
        sse,
    };
    let state = fit.run(series)?;
    Ok(EtsFit { state, ..fit })
}
