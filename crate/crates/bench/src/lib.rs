//! Shared fixtures for the benchmarks.

use qforecast::drnn::{CellType, Drnn, DrnnConfig, Window};
use qforecast::QuantileSet;

/// Deterministic weekly-seasonal series with a mild trend.
pub fn weekly_series(n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| 50.0 + 0.05 * t as f64 + 10.0 * ((t % 7) as f64 - 3.0) + ((t * 37) % 11) as f64)
        .collect()
}

/// Network shaped like the selected configuration at a reduced width.
pub fn network(cell: CellType, hsize: usize) -> Drnn {
    Drnn::new(DrnnConfig {
        cell_type: cell,
        dilations: vec![vec![1, 2], vec![4, 8]],
        state_hsize: hsize,
        add_nl_layer: false,
        input_size_multiplier: 4,
        output_size: 7,
        quantiles: QuantileSet::demand_default(),
        static_vocab: vec![4, 6],
        exog_width: 7,
    })
    .expect("valid configuration")
}

pub fn window(net: &Drnn) -> Window {
    let n = net.config().input_size();
    Window {
        z: weekly_series(n).iter().map(|v| v - 50.0).collect(),
        exog: (0..n * 7).map(|i| if i % 8 == 0 { 1.0 } else { 0.0 }).collect(),
        statics: vec![1, 2],
    }
}
