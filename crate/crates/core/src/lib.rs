//! Quantile time-series forecasting.
//!
//! The centrepiece is a dilated recurrent network with a direct
//! multi-horizon, multi-quantile output head, trained on median-scaled
//! residuals (`mq_drnn_s`). Around it sit the statistical benchmarks it is
//! measured against (Naive, Seasonal Naive, the ETS family and quantile
//! autoregression), the evaluation machinery (pinball loss, calibration,
//! paired t-tests), a rolling-origin backtesting harness, and the
//! newsvendor calculation that says which quantile an inventory decision
//! should target.
//!
//! ```
//! use qforecast::metrics::quantile_loss;
//! use qforecast::newsvendor::NewsvendorSpec;
//!
//! let spec = NewsvendorSpec::new(10.0, 4.0, 1.0, 2.0).unwrap();
//! assert!((spec.optimal_quantile() - 8.0 / 11.0).abs() < 1e-15);
//! assert_eq!(quantile_loss(0.5, 2.0, 0.0).unwrap(), 1.0);
//! ```

pub mod baselines;
pub mod drnn;
mod error;
pub mod forecast;
pub mod harness;
pub mod metrics;
pub mod newsvendor;
pub mod panel;
pub mod qarx;
pub mod scaling;
pub(crate) mod util;

pub use error::{Error, Result};
pub use forecast::{Actuals, ForecastMatrix, ForecastSet, QuantileSet};
pub use panel::{Panel, SeriesId, SplitSpec};
