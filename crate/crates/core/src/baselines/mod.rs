//! Statistical point-forecast baselines: Naive, Seasonal Naive and the ETS family.

mod ets;
mod naive;

pub use ets::{ets_fit, ets_point_forecast, ets_update, EtsFit, EtsSpec, EtsState, Seasonal, Trend};
pub use naive::{naive_forecast, seasonal_naive_forecast};
