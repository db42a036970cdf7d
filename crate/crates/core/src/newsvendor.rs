//! Single-period newsvendor: profit, the critical fractile, and a numeric
//! check that the fractile's demand quantile maximizes expected profit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

use crate::error::{invalid, Error, Result};

/// Unit price `p`, cost `v`, salvage `g` and shortage penalty `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewsvendorSpec {
    p: f64,
    v: f64,
    g: f64,
    b: f64,
}

impl NewsvendorSpec {
    pub fn new(p: f64, v: f64, g: f64, b: f64) -> Result<Self> {
        if ![p, v, g, b].iter().all(|x| x.is_finite()) {
            return Err(invalid("newsvendor spec", "all prices must be finite"));
        }
        if !(p > v) {
            return Err(invalid("newsvendor spec", format!("price p={p} must exceed cost v={v}")));
        }
        if !(v > g) {
            return Err(invalid("newsvendor spec", format!("cost v={v} must exceed salvage g={g}")));
        }
        if g < 0.0 {
            return Err(invalid("newsvendor spec", format!("salvage g={g} must be non-negative")));
        }
        if b < 0.0 {
            return Err(invalid("newsvendor spec", format!("shortage penalty B={b} must be non-negative")));
        }
        Ok(Self { p, v, g, b })
    }

    pub fn price(&self) -> f64 {
        self.p
    }
    pub fn cost(&self) -> f64 {
        self.v
    }
    pub fn salvage(&self) -> f64 {
        self.g
    }
    pub fn shortage_penalty(&self) -> f64 {
        self.b
    }

    /// Realized profit for a stock level and a realized demand.
    pub fn profit(&self, stocked: f64, demanded: f64) -> f64 {
        let Self { p, v, g, b } = *self;
        if demanded <= stocked {
            p * demanded - v * stocked + g * (stocked - demanded)
        } else {
            p * stocked - v * stocked - b * (demanded - stocked)
        }
    }

    /// Critical fractile `(p - v + B) / (p - g + B)`.
    pub fn optimal_quantile(&self) -> f64 {
        (self.p - self.v + self.b) / (self.p - self.g + self.b)
    }
}

/// A demand distribution with a cdf and its inverse on a bounded support.
pub trait Demand {
    fn cdf(&self, x: f64) -> f64;
    fn inverse_cdf(&self, q: f64) -> f64;
    /// Interval carrying (numerically) all the mass.
    fn support(&self) -> (f64, f64);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniform {
    pub lo: f64,
    pub hi: f64,
}

impl Demand for Uniform {
    fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
    fn inverse_cdf(&self, q: f64) -> f64 {
        self.lo + q * (self.hi - self.lo)
    }
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Normal demand truncated numerically to `mean ± 8 sd`.
#[derive(Clone, Copy, Debug)]
pub struct Normal {
    pub mean: f64,
    pub sd: f64,
    dist: NormalDist,
}

impl Normal {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        let dist = NormalDist::new(mean, sd).map_err(|e| invalid("normal demand", e.to_string()))?;
        Ok(Self { mean, sd, dist })
    }
}

impl Demand for Normal {
    fn cdf(&self, x: f64) -> f64 {
        self.dist.cdf(x)
    }
    fn inverse_cdf(&self, q: f64) -> f64 {
        self.dist.inverse_cdf(q)
    }
    fn support(&self) -> (f64, f64) {
        (self.mean - 8.0 * self.sd, self.mean + 8.0 * self.sd)
    }
}

/// Deterministic demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointMass(pub f64);

impl Demand for PointMass {
    fn cdf(&self, x: f64) -> f64 {
        if x >= self.0 {
            1.0
        } else {
            0.0
        }
    }
    fn inverse_cdf(&self, _q: f64) -> f64 {
        self.0
    }
    fn support(&self) -> (f64, f64) {
        (0.0, 2.0 * self.0.max(0.5))
    }
}

/// Expected profit on an evenly spaced stock grid over the demand support.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfitCurve {
    pub stocks: Vec<f64>,
    pub expected: Vec<f64>,
}

impl ProfitCurve {
    pub fn step(&self) -> f64 {
        self.stocks[1] - self.stocks[0]
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.expected.iter().enumerate() {
            if *e > self.expected[best] {
                best = i;
            }
        }
        best
    }
}

/// `E[Π(s)] = p·E[min(s, D)] − v·s + g·E[(s − D)+] − B·E[(D − s)+]`, each
/// expectation written as an integral of the cdf and evaluated with the
/// trapezoid rule on the grid.
pub fn expected_profit_curve(spec: &NewsvendorSpec, demand: &dyn Demand, grid: usize) -> Result<ProfitCurve> {
    if grid < 100 {
        return Err(invalid("grid", format!("{grid} points (need at least 100)")));
    }
    let (lo, hi) = demand.support();
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(invalid("demand support", format!("[{lo}, {hi}]")));
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let stocks: Vec<f64> = (0..grid).map(|i| lo + step * i as f64).collect();
    let f: Vec<f64> = stocks.iter().map(|&x| demand.cdf(x)).collect();
    // cumulative ∫_lo^s F and ∫_lo^s (1 − F)
    let mut int_f = vec![0.0; grid];
    for i in 1..grid {
        int_f[i] = int_f[i - 1] + 0.5 * step * (f[i] + f[i - 1]);
    }
    let int_sf = |i: usize| (stocks[i] - lo) - int_f[i];
    let total_sf = int_sf(grid - 1);
    let NewsvendorSpec { p, v, g, b } = *spec;
    let expected: Vec<f64> = (0..grid)
        .map(|i| {
            let sold = lo + int_sf(i);
            let leftover = int_f[i];
            let short = total_sf - int_sf(i);
            p * sold - v * stocks[i] + g * leftover - b * short
        })
        .collect();
    if expected.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite {
            iteration: 0,
            what: "expected profit".into(),
        });
    }
    Ok(ProfitCurve { stocks, expected })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub argmax_stock: f64,
    pub closed_form_stock: f64,
    pub gap: f64,
    pub grid_step: f64,
}

/// Grid argmax of expected profit against `F⁻¹(q*)`.
pub fn verify_optimum(spec: &NewsvendorSpec, demand: &dyn Demand, grid: usize) -> Result<Verification> {
    let curve = expected_profit_curve(spec, demand, grid)?;
    let argmax_stock = curve.stocks[curve.argmax()];
    let closed_form_stock = demand.inverse_cdf(spec.optimal_quantile());
    Ok(Verification {
        argmax_stock,
        closed_form_stock,
        gap: (argmax_stock - closed_form_stock).abs(),
        grid_step: curve.step(),
    })
}
