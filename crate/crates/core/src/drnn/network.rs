use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cell::{cell_backward, cell_forward, gemv, gemv_t, ger, CellState, StepCache};
use super::{CellType, DrnnConfig};
use crate::error::{Error, Result};
use crate::forecast::ForecastMatrix;
use crate::util::rng;

/// A named row-major block of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerLayout {
    pub dilation: usize,
    pub d_in: usize,
    pub hs: usize,
    pub w: TensorSpec,
    pub u: TensorSpec,
    pub b: TensorSpec,
    /// Input projection of the residual LSTM.
    pub p: Option<TensorSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    pub tensors: Vec<TensorSpec>,
    pub embeddings: Vec<TensorSpec>,
    pub layers: Vec<LayerLayout>,
    pub nl: Option<(TensorSpec, TensorSpec)>,
    pub head_w: TensorSpec,
    pub head_b: TensorSpec,
    pub n_params: usize,
}

struct LayoutBuilder {
    tensors: Vec<TensorSpec>,
    offset: usize,
}

impl LayoutBuilder {
    fn push(&mut self, name: String, rows: usize, cols: usize) -> TensorSpec {
        let t = TensorSpec {
            name,
            offset: self.offset,
            rows,
            cols,
        };
        self.offset += t.len();
        self.tensors.push(t.clone());
        t
    }
}

impl ParamLayout {
    fn new(config: &DrnnConfig) -> Self {
        let mut b = LayoutBuilder {
            tensors: Vec::new(),
            offset: 0,
        };
        let widths = config.embedding_widths();
        let embeddings = config
            .static_vocab
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (&v, &w))| b.push(format!("emb{k}"), v, w))
            .collect();
        let hs = config.state_hsize;
        let gates = config.cell_type.gates();
        let mut d_in = 1 + config.exog_width + widths.iter().sum::<usize>();
        let mut layers = Vec::new();
        for (ci, chunk) in config.dilations.iter().enumerate() {
            for (li, &dilation) in chunk.iter().enumerate() {
                let tag = format!("c{ci}l{li}");
                let w = b.push(format!("{tag}.w"), gates * hs, d_in);
                let u = b.push(format!("{tag}.u"), gates * hs, hs);
                let bias = b.push(format!("{tag}.b"), gates * hs, 1);
                let p = (config.cell_type == CellType::ResLstm).then(|| b.push(format!("{tag}.p"), hs, d_in));
                layers.push(LayerLayout {
                    dilation,
                    d_in,
                    hs,
                    w,
                    u,
                    b: bias,
                    p,
                });
                d_in = hs;
            }
        }
        let nl = config
            .add_nl_layer
            .then(|| (b.push("nl.w".into(), hs, hs), b.push("nl.b".into(), hs, 1)));
        let n_out = config.output_size * config.quantiles.len();
        let head_w = b.push("head.w".into(), n_out, hs);
        let head_b = b.push("head.b".into(), n_out, 1);
        Self {
            n_params: b.offset,
            tensors: b.tensors,
            embeddings,
            layers,
            nl,
            head_w,
            head_b,
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// Flat parameter vector laid out by [`ParamLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct DrnnParams {
    pub values: Vec<f64>,
}

impl DrnnParams {
    pub fn slice<'a>(&'a self, t: &TensorSpec) -> &'a [f64] {
        &self.values[t.range()]
    }

    pub fn slice_mut<'a>(&'a mut self, t: &TensorSpec) -> &'a mut [f64] {
        &mut self.values[t.range()]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// One input window: `input_size` residuals, per-step exogenous encodings
/// (row-major, `input_size × exog_width`) and static category ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub z: Vec<f64>,
    pub exog: Vec<f64>,
    pub statics: Vec<usize>,
}

/// Forward pass record consumed by [`Drnn::backward`].
#[derive(Clone, Debug)]
pub struct Trace {
    inputs: Vec<Vec<f64>>,
    statics: Vec<usize>,
    layers: Vec<Vec<StepCache>>,
    nl: Option<Vec<f64>>,
    output: Vec<f64>,
}

impl Trace {
    /// Raw head output, `H · |Q|` values ordered `(h, q)`.
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// A network shape: configuration plus its parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Drnn {
    config: DrnnConfig,
    layout: ParamLayout,
}

impl Drnn {
    pub fn new(config: DrnnConfig) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        Ok(Self { config, layout })
    }

    pub fn config(&self) -> &DrnnConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params
    }

    pub fn input_dim(&self) -> usize {
        self.layout.layers[0].d_in
    }

    pub fn zero_params(&self) -> DrnnParams {
        DrnnParams {
            values: vec![0.0; self.layout.n_params],
        }
    }

    /// Weights uniform in `±1/sqrt(hsize)`, embeddings uniform in `±1`,
    /// biases zero.
    pub fn init_params(&self, seed: u64) -> DrnnParams {
        let mut r = rng(seed);
        let mut p = self.zero_params();
        let bound = 1.0 / (self.config.state_hsize as f64).sqrt();
        for t in &self.layout.tensors {
            let is_bias = t.cols == 1 && t.name.ends_with(".b");
            if is_bias {
                continue;
            }
            let b = if t.name.starts_with("emb") { 1.0 } else { bound };
            for v in p.slice_mut(t) {
                *v = r.random_range(-b..b);
            }
        }
        p
    }

    pub fn check_params(&self, params: &DrnnParams) -> Result<()> {
        if params.values.len() != self.layout.n_params {
            return Err(Error::Shape(format!(
                "{} parameters for a layout of {}",
                params.values.len(),
                self.layout.n_params
            )));
        }
        Ok(())
    }

    /// Per-step inputs `[z_t, exog_t, embeddings]` of a window.
    pub fn step_inputs(&self, params: &DrnnParams, window: &Window) -> Result<Vec<Vec<f64>>> {
        let c = &self.config;
        let n = c.input_size();
        if window.z.len() != n {
            return Err(Error::Shape(format!("window of {} residuals, expected {n}", window.z.len())));
        }
        if window.exog.len() != n * c.exog_width {
            return Err(Error::Shape(format!(
                "{} exog values, expected {}",
                window.exog.len(),
                n * c.exog_width
            )));
        }
        if window.statics.len() != c.static_vocab.len() {
            return Err(Error::Shape(format!(
                "{} static ids, expected {}",
                window.statics.len(),
                c.static_vocab.len()
            )));
        }
        for (k, (&id, &v)) in window.statics.iter().zip(&c.static_vocab).enumerate() {
            if id >= v {
                return Err(Error::Shape(format!("static feature {k} id {id} outside vocabulary of {v}")));
            }
        }
        let mut emb = Vec::new();
        for (t, &id) in self.layout.embeddings.iter().zip(&window.statics) {
            emb.extend_from_slice(&params.slice(t)[id * t.cols..(id + 1) * t.cols]);
        }
        Ok((0..n)
            .map(|t| {
                let mut x = Vec::with_capacity(self.input_dim());
                x.push(window.z[t]);
                x.extend_from_slice(&window.exog[t * c.exog_width..(t + 1) * c.exog_width]);
                x.extend_from_slice(&emb);
                x
            })
            .collect())
    }

    fn run_layers(&self, params: &DrnnParams, inputs: &[Vec<f64>]) -> Result<Vec<Vec<StepCache>>> {
        self.check_params(params)?;
        let max_d = self.config.max_dilation();
        if inputs.len() < max_d {
            return Err(Error::NotEnoughData(format!(
                "sequence of length {} for dilation {max_d}",
                inputs.len()
            )));
        }
        if inputs.iter().any(|x| x.len() != self.input_dim()) {
            return Err(Error::Shape(format!("step inputs must have width {}", self.input_dim())));
        }
        let cell = self.config.cell_type;
        let hs = self.config.state_hsize;
        let zeros = vec![0.0; hs];
        let zero_c = if cell.has_cell_state() { zeros.clone() } else { Vec::new() };
        let mut layers: Vec<Vec<StepCache>> = Vec::with_capacity(self.layout.layers.len());
        for (li, layer) in self.layout.layers.iter().enumerate() {
            let mut steps: Vec<StepCache> = Vec::with_capacity(inputs.len());
            for t in 0..inputs.len() {
                let x = if li == 0 { &inputs[t] } else { &layers[li - 1][t].h };
                let (h_prev, c_prev) = if t >= layer.dilation {
                    let s = &steps[t - layer.dilation];
                    (&s.h, &s.c)
                } else {
                    (&zeros, &zero_c)
                };
                let cache = cell_forward(cell, &params.values, layer, x, h_prev, c_prev);
                steps.push(cache);
            }
            layers.push(steps);
        }
        Ok(layers)
    }

    /// Dilated unroll over explicit step inputs; returns the top layer's
    /// final hidden state.
    pub fn unroll(&self, params: &DrnnParams, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let layers = self.run_layers(params, inputs)?;
        Ok(layers.last().and_then(|l| l.last()).expect("nonempty unroll").h.clone())
    }

    /// Hidden states of every layer at every step, `[layer][t]`.
    pub fn layer_states(&self, params: &DrnnParams, inputs: &[Vec<f64>]) -> Result<Vec<Vec<CellState>>> {
        Ok(self
            .run_layers(params, inputs)?
            .into_iter()
            .map(|l| {
                l.into_iter()
                    .map(|s| CellState { h: s.h, c: s.c })
                    .collect()
            })
            .collect())
    }

    pub fn forward_trace(&self, params: &DrnnParams, window: &Window) -> Result<Trace> {
        let inputs = self.step_inputs(params, window)?;
        let layers = self.run_layers(params, &inputs)?;
        let top = &layers.last().and_then(|l| l.last()).expect("nonempty unroll").h;
        let hs = self.config.state_hsize;
        let nl = self.layout.nl.as_ref().map(|(w, b)| {
            let mut a = params.slice(b).to_vec();
            gemv(params.slice(w), hs, hs, top, &mut a);
            a.iter_mut().for_each(|v| *v = v.tanh());
            a
        });
        let feat = nl.as_ref().unwrap_or(top);
        let mut output = params.slice(&self.layout.head_b).to_vec();
        gemv(params.slice(&self.layout.head_w), output.len(), hs, feat, &mut output);
        if output.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: 0,
                what: "network output".into(),
            });
        }
        Ok(Trace {
            inputs,
            statics: window.statics.clone(),
            layers,
            nl,
            output,
        })
    }

    /// `H × |Q|` forecast for one window.
    pub fn forward(&self, params: &DrnnParams, window: &Window) -> Result<ForecastMatrix> {
        let trace = self.forward_trace(params, window)?;
        ForecastMatrix::from_vec(self.config.output_size, self.config.quantiles.len(), trace.output)
    }

    /// Accumulates `∂(d_out · output)/∂params` into `grads`.
    pub fn backward(&self, params: &DrnnParams, trace: &Trace, d_out: &[f64], grads: &mut [f64]) -> Result<()> {
        if d_out.len() != trace.output.len() || grads.len() != self.layout.n_params {
            return Err(Error::Shape("gradient buffers do not match the network".into()));
        }
        let hs = self.config.state_hsize;
        let cell = self.config.cell_type;
        let n_out = d_out.len();
        let top = &trace.layers.last().and_then(|l| l.last()).expect("nonempty unroll").h;
        let feat = trace.nl.as_ref().unwrap_or(top);

        ger(&mut grads[self.layout.head_w.range()], n_out, hs, d_out, feat);
        for (g, d) in grads[self.layout.head_b.range()].iter_mut().zip(d_out) {
            *g += d;
        }
        let mut dfeat = vec![0.0; hs];
        gemv_t(params.slice(&self.layout.head_w), n_out, hs, d_out, &mut dfeat);
        let dtop = match (&self.layout.nl, &trace.nl) {
            (Some((w, b)), Some(a)) => {
                let dpre: Vec<f64> = dfeat.iter().zip(a).map(|(d, a)| d * (1.0 - a * a)).collect();
                ger(&mut grads[w.range()], hs, hs, &dpre, top);
                for (g, d) in grads[b.range()].iter_mut().zip(&dpre) {
                    *g += d;
                }
                let mut dtop = vec![0.0; hs];
                gemv_t(params.slice(w), hs, hs, &dpre, &mut dtop);
                dtop
            }
            _ => dfeat,
        };

        let n_steps = trace.inputs.len();
        // gradient w.r.t. each step output of the layer currently processed
        let mut dy: Vec<Vec<f64>> = vec![vec![0.0; hs]; n_steps];
        dy[n_steps - 1] = dtop;
        let zeros = vec![0.0; hs];
        let zero_c = if cell.has_cell_state() { zeros.clone() } else { Vec::new() };
        for (li, layer) in self.layout.layers.iter().enumerate().rev() {
            let steps = &trace.layers[li];
            let mut dh_carry = vec![vec![0.0; hs]; n_steps];
            let mut dc_carry = vec![vec![0.0; hs]; n_steps];
            let mut dx_all: Vec<Vec<f64>> = vec![Vec::new(); n_steps];
            for t in (0..n_steps).rev() {
                let x = if li == 0 {
                    &trace.inputs[t]
                } else {
                    &trace.layers[li - 1][t].h
                };
                let (h_prev, c_prev) = if t >= layer.dilation {
                    let s = &steps[t - layer.dilation];
                    (&s.h, &s.c)
                } else {
                    (&zeros, &zero_c)
                };
                let dh: Vec<f64> = dy[t].iter().zip(&dh_carry[t]).map(|(a, b)| a + b).collect();
                let g = cell_backward(
                    cell,
                    &params.values,
                    layer,
                    x,
                    h_prev,
                    c_prev,
                    &steps[t],
                    &dh,
                    &dc_carry[t],
                    grads,
                );
                if t >= layer.dilation {
                    let s = t - layer.dilation;
                    dh_carry[s].iter_mut().zip(&g.dh_prev).for_each(|(a, b)| *a += b);
                    if cell.has_cell_state() {
                        dc_carry[s].iter_mut().zip(&g.dc_prev).for_each(|(a, b)| *a += b);
                    }
                }
                dx_all[t] = g.dx;
            }
            if li > 0 {
                dy = dx_all;
            } else {
                self.embedding_backward(trace, &dx_all, grads);
            }
        }
        Ok(())
    }

    fn embedding_backward(&self, trace: &Trace, dx: &[Vec<f64>], grads: &mut [f64]) {
        let mut col = 1 + self.config.exog_width;
        for (t, &id) in self.layout.embeddings.iter().zip(&trace.statics) {
            let row = t.offset + id * t.cols;
            for d in dx {
                for k in 0..t.cols {
                    grads[row + k] += d[col + k];
                }
            }
            col += t.cols;
        }
    }
}
