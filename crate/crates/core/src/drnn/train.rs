use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{Drnn, DrnnParams, Window};
use super::TrainOpts;
use crate::error::{invalid, Error, Result};
use crate::util::rng;

/// A window with its `H` residual targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainWindow {
    pub input: Window,
    pub target: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub train_mql: f64,
    pub earlystop_mql: Option<f64>,
    pub lr: f64,
    /// Gradient norm before and after clipping.
    pub grad_norm: f64,
    pub clipped_norm: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    /// Parameters with the best early-stopping loss.
    pub params: DrnnParams,
    pub trace: Vec<TraceRow>,
    pub best_iteration: usize,
    pub stopped_early: bool,
}

/// Mean pinball loss of a head output against `H` targets and the gradient
/// with respect to each output.
pub fn mql_loss_grad(output: &[f64], target: &[f64], quantiles: &[f64]) -> (f64, Vec<f64>) {
    let nq = quantiles.len();
    let n = output.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; output.len()];
    for (h, &y) in target.iter().enumerate() {
        for (qi, &q) in quantiles.iter().enumerate() {
            let k = h * nq + qi;
            let u = y - output[k];
            if u < 0.0 {
                loss += (q - 1.0) * u;
                grad[k] = (1.0 - q) / n;
            } else {
                loss += q * u;
                grad[k] = -q / n;
            }
        }
    }
    (loss / n, grad)
}

fn check_windows(net: &Drnn, windows: &[TrainWindow], what: &'static str) -> Result<()> {
    if windows.is_empty() {
        return Err(invalid(what, "no windows"));
    }
    let h = net.config().output_size;
    if let Some(w) = windows.iter().find(|w| w.target.len() != h) {
        return Err(Error::Shape(format!("{what}: target of length {} for horizon {h}", w.target.len())));
    }
    Ok(())
}

fn window_loss(net: &Drnn, params: &DrnnParams, w: &TrainWindow) -> Result<f64> {
    let trace = net.forward_trace(params, &w.input)?;
    Ok(mql_loss_grad(trace.output(), &w.target, net.config().quantiles.as_slice()).0)
}

fn mean_loss(net: &Drnn, params: &DrnnParams, windows: &[TrainWindow]) -> Result<f64> {
    let losses: Vec<f64> = windows
        .par_iter()
        .map(|w| window_loss(net, params, w))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Minimizes the multi-quantile loss with Adam, input noise, gradient
/// clipping, step learning-rate decay and early stopping.
pub fn train(
    net: &Drnn,
    init: DrnnParams,
    opts: &TrainOpts,
    train_windows: &[TrainWindow],
    early_stop_windows: &[TrainWindow],
) -> Result<TrainResult> {
    opts.validate()?;
    net.check_params(&init)?;
    check_windows(net, train_windows, "training windows")?;
    check_windows(net, early_stop_windows, "early-stopping windows")?;
    let quantiles = net.config().quantiles.as_slice();
    let n_in = net.config().input_size();
    let mut r = rng(opts.seed);
    let noise = Normal::new(0.0, opts.noise_std.max(0.0)).map_err(|e| invalid("noise_std", e.to_string()))?;
    let mut params = init;
    let mut adam = Adam::new(net.n_params());
    let mut trace = Vec::new();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut bad_evals = 0;
    let mut stopped_early = false;

    for it in 1..=opts.n_iterations {
        let lr = opts.lr_at(it);
        // sampling and noise drawn sequentially for determinism
        let batch: Vec<(usize, Vec<f64>)> = (0..opts.batch_size)
            .map(|_| {
                let i = r.random_range(0..train_windows.len());
                let eps = if opts.noise_std > 0.0 {
                    (0..n_in).map(|_| noise.sample(&mut r)).collect()
                } else {
                    Vec::new()
                };
                (i, eps)
            })
            .collect();
        let results: Vec<(f64, Vec<f64>)> = batch
            .par_iter()
            .map(|(i, eps)| {
                let mut w = train_windows[*i].input.clone();
                for (z, e) in w.z.iter_mut().zip(eps) {
                    *z += e;
                }
                let t = net.forward_trace(&params, &w)?;
                let (loss, d_out) = mql_loss_grad(t.output(), &train_windows[*i].target, quantiles);
                let mut g = vec![0.0; net.n_params()];
                net.backward(&params, &t, &d_out, &mut g)?;
                Ok((loss, g))
            })
            .collect::<Result<_>>()?;
        let scale = 1.0 / results.len() as f64;
        let mut grad = vec![0.0; net.n_params()];
        let mut loss = 0.0;
        for (l, g) in &results {
            loss += l * scale;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b * scale;
            }
        }
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                iteration: it,
                what: format!("training loss {loss}"),
            });
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let mut clipped = norm;
        if norm > opts.gradient_clipping_threshold {
            let s = opts.gradient_clipping_threshold / norm;
            grad.iter_mut().for_each(|g| *g *= s);
            clipped = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        }
        adam.step(&mut params.values, &grad, lr);

        let mut row = TraceRow {
            iteration: it,
            train_mql: loss,
            earlystop_mql: None,
            lr,
            grad_norm: norm,
            clipped_norm: clipped,
        };
        if it % opts.eval_every == 0 || it == opts.n_iterations {
            let es = mean_loss(net, &params, early_stop_windows)?;
            row.earlystop_mql = Some(es);
            if es < best.0 {
                best = (es, params.clone(), it);
                bad_evals = 0;
            } else {
                bad_evals += 1;
            }
            trace.push(row);
            if bad_evals >= opts.early_stopping_patience.max(1) && it < opts.n_iterations {
                stopped_early = true;
                break;
            }
        } else {
            trace.push(row);
        }
    }
    let (best_iteration, params) = if best.0.is_finite() {
        (best.2, best.1)
    } else {
        (opts.n_iterations, params)
    };
    Ok(TrainResult {
        params,
        trace,
        best_iteration,
        stopped_early,
    })
}

/// Writes `iteration,train_mql,earlystop_mql,lr`; the early-stopping column
/// is empty on iterations without an evaluation.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "train_mql", "earlystop_mql", "lr"])?;
    for row in trace {
        w.write_record([
            row.iteration.to_string(),
            row.train_mql.to_string(),
            row.earlystop_mql.map(|v| v.to_string()).unwrap_or_default(),
            row.lr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drnn::{CellType, DrnnConfig};
    use crate::forecast::QuantileSet;

    fn small_net(cell: CellType) -> Drnn {
        Drnn::new(DrnnConfig {
            cell_type: cell,
            dilations: vec![vec![1, 2]],
            state_hsize: 8,
            add_nl_layer: false,
            input_size_multiplier: 2,
            output_size: 3,
            quantiles: QuantileSet::demand_default(),
            static_vocab: vec![],
            exog_width: 0,
        })
        .unwrap()
    }

    fn constant_window(v: f64) -> TrainWindow {
        TrainWindow {
            input: Window {
                z: vec![v; 6],
                exog: vec![],
                statics: vec![],
            },
            target: vec![v; 3],
        }
    }

    #[test]
    fn loss_grad_examples() {
        let (l, g) = mql_loss_grad(&[0.0, 0.0], &[1.0], &[0.3, 0.9]);
        assert!((l - 0.6).abs() < 1e-15);
        assert_eq!(g, vec![-0.15, -0.45]);
        let (l, g) = mql_loss_grad(&[2.0], &[1.0], &[0.3]);
        assert!((l - 0.7).abs() < 1e-15);
        assert!((g[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn memorizes_a_constant_window() {
        let net = small_net(CellType::Lstm);
        let opts = TrainOpts {
            learning_rate: 1e-2,
            n_iterations: 500,
            batch_size: 4,
            noise_std: 0.0,
            early_stopping_patience: 100,
            seed: 3,
            ..Default::default()
        };
        let w = vec![constant_window(2.0)];
        let res = train(&net, net.init_params(1), &opts, &w, &w).unwrap();
        let first = res.trace[0].train_mql;
        let last = res.trace.last().unwrap().train_mql;
        assert!(last < 0.1 * first, "{first} -> {last}");
        assert!(res.trace.iter().all(|r| r.train_mql.is_finite()));
    }

    #[test]
    fn deterministic_in_seed() {
        let net = small_net(CellType::Gru);
        let opts = TrainOpts {
            n_iterations: 60,
            batch_size: 5,
            eval_every: 20,
            seed: 9,
            ..Default::default()
        };
        let ws: Vec<TrainWindow> = (0..7).map(|i| constant_window(i as f64 * 0.3)).collect();
        let a = train(&net, net.init_params(2), &opts, &ws, &ws[..2]).unwrap();
        let b = train(&net, net.init_params(2), &opts, &ws, &ws[..2]).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn clipping_bounds_the_step_norm() {
        let net = small_net(CellType::Vanilla);
        let opts = TrainOpts {
            n_iterations: 30,
            batch_size: 2,
            gradient_clipping_threshold: 0.05,
            ..Default::default()
        };
        let ws = vec![constant_window(50.0), constant_window(-30.0)];
        let res = train(&net, net.init_params(0), &opts, &ws, &ws).unwrap();
        assert!(res.trace.iter().any(|r| r.grad_norm > 0.05));
        assert!(res.trace.iter().all(|r| r.clipped_norm <= 0.05 * (1.0 + 1e-12)));
    }

    #[test]
    fn empty_windows_are_rejected() {
        let net = small_net(CellType::Lstm);
        let w = vec![constant_window(1.0)];
        assert!(train(&net, net.init_params(0), &TrainOpts::default(), &[], &w).is_err());
        assert!(train(&net, net.init_params(0), &TrainOpts::default(), &w, &[]).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let rows = vec![
            TraceRow {
                iteration: 1,
                train_mql: 0.5,
                earlystop_mql: None,
                lr: 0.001,
                grad_norm: 1.0,
                clipped_norm: 1.0,
            },
            TraceRow {
                iteration: 2,
                train_mql: 0.25,
                earlystop_mql: Some(0.3),
                lr: 0.001,
                grad_norm: 1.0,
                clipped_norm: 1.0,
            },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "iteration,train_mql,earlystop_mql,lr\n1,0.5,,0.001\n2,0.25,0.3,0.001\n"
        );
    }
}
