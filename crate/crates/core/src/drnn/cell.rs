//! Recurrent cell updates and their reverse-mode derivatives.
//!
//! Weights are packed per layer: `W` is `(gates·hs) × d_in`, `U` is
//! `(gates·hs) × hs` and `b` has `gates·hs` entries, with gate blocks in the
//! order vanilla `[a]`, GRU `[u, r, n]`, LSTM `[i, f, g, o]`.

use super::network::LayerLayout;
use super::CellType;

/// Hidden state and (for LSTM cells) memory cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hs: usize, cell: CellType) -> Self {
        Self {
            h: vec![0.0; hs],
            c: if cell.has_cell_state() { vec![0.0; hs] } else { Vec::new() },
        }
    }
}

/// Forward quantities kept for the backward pass.
#[derive(Clone, Debug)]
pub(super) struct StepCache {
    /// Post-activation gates.
    pub gates: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    /// GRU only: `r ⊙ h_prev`.
    pub rh: Vec<f64>,
}

#[inline]
pub(super) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += W x` for row-major `W` of shape `rows × cols`.
#[inline]
pub(super) fn gemv(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o += dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `out += Wᵀ y`.
#[inline]
pub(super) fn gemv_t(w: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    for (r, &yr) in y.iter().enumerate().take(rows) {
        if yr == 0.0 {
            continue;
        }
        for (o, wv) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o += yr * wv;
        }
    }
}

/// `g += y xᵀ`.
#[inline]
pub(super) fn ger(g: &mut [f64], rows: usize, cols: usize, y: &[f64], x: &[f64]) {
    for (r, &yr) in y.iter().enumerate().take(rows) {
        if yr == 0.0 {
            continue;
        }
        for (gv, xv) in g[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *gv += yr * xv;
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(super) fn cell_forward(
    cell: CellType,
    params: &[f64],
    layer: &LayerLayout,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> StepCache {
    let hs = layer.hs;
    let rows = cell.gates() * hs;
    let w = &params[layer.w.range()];
    let u = &params[layer.u.range()];
    let mut pre = params[layer.b.range()].to_vec();
    gemv(w, rows, layer.d_in, x, &mut pre);
    match cell {
        CellType::Vanilla => {
            gemv(u, hs, hs, h_prev, &mut pre);
            let h: Vec<f64> = pre.iter().map(|a| a.tanh()).collect();
            StepCache {
                gates: h.clone(),
                h,
                c: Vec::new(),
                rh: Vec::new(),
            }
        }
        CellType::Gru => {
            gemv(&u[..2 * hs * hs], 2 * hs, hs, h_prev, &mut pre[..2 * hs]);
            let mut gates = vec![0.0; 3 * hs];
            for k in 0..2 * hs {
                gates[k] = sigmoid(pre[k]);
            }
            let rh: Vec<f64> = (0..hs).map(|k| gates[hs + k] * h_prev[k]).collect();
            gemv(&u[2 * hs * hs..], hs, hs, &rh, &mut pre[2 * hs..]);
            for k in 0..hs {
                gates[2 * hs + k] = pre[2 * hs + k].tanh();
            }
            let h = (0..hs)
                .map(|k| {
                    let z = gates[k];
                    (1.0 - z) * gates[2 * hs + k] + z * h_prev[k]
                })
                .collect();
            StepCache {
                gates,
                h,
                c: Vec::new(),
                rh,
            }
        }
        CellType::Lstm | CellType::ResLstm => {
            gemv(u, rows, hs, h_prev, &mut pre);
            let mut gates = vec![0.0; 4 * hs];
            for k in 0..hs {
                gates[k] = sigmoid(pre[k]);
                gates[hs + k] = sigmoid(pre[hs + k]);
                gates[2 * hs + k] = pre[2 * hs + k].tanh();
                gates[3 * hs + k] = sigmoid(pre[3 * hs + k]);
            }
            let c: Vec<f64> = (0..hs)
                .map(|k| gates[hs + k] * c_prev[k] + gates[k] * gates[2 * hs + k])
                .collect();
            let mut h: Vec<f64> = (0..hs).map(|k| gates[3 * hs + k] * c[k].tanh()).collect();
            if let (CellType::ResLstm, Some(p)) = (cell, &layer.p) {
                gemv(&params[p.range()], hs, layer.d_in, x, &mut h);
            }
            StepCache {
                gates,
                h,
                c,
                rh: Vec::new(),
            }
        }
    }
}

/// Gradients flowing out of one cell step.
pub(super) struct StepGrads {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

/// Accumulates parameter gradients of one step into `grads` and returns the
/// gradients with respect to the step's input and carried state.
#[allow(clippy::too_many_arguments)]
pub(super) fn cell_backward(
    cell: CellType,
    params: &[f64],
    layer: &LayerLayout,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    cache: &StepCache,
    dh: &[f64],
    dc: &[f64],
    grads: &mut [f64],
) -> StepGrads {
    let hs = layer.hs;
    let d_in = layer.d_in;
    let rows = cell.gates() * hs;
    let w = &params[layer.w.range()];
    let u = &params[layer.u.range()];
    let mut dx = vec![0.0; d_in];
    let mut dh_prev = vec![0.0; hs];
    let mut dc_prev = Vec::new();
    let g = &cache.gates;

    let dpre: Vec<f64> = match cell {
        CellType::Vanilla => {
            let dpre: Vec<f64> = (0..hs).map(|k| dh[k] * (1.0 - cache.h[k] * cache.h[k])).collect();
            ger(&mut grads[layer.u.range()], hs, hs, &dpre, h_prev);
            gemv_t(u, hs, hs, &dpre, &mut dh_prev);
            dpre
        }
        CellType::Gru => {
            let mut dpre = vec![0.0; 3 * hs];
            for k in 0..hs {
                let (z, n) = (g[k], g[2 * hs + k]);
                dh_prev[k] += dh[k] * z;
                dpre[k] = dh[k] * (h_prev[k] - n) * z * (1.0 - z);
                dpre[2 * hs + k] = dh[k] * (1.0 - z) * (1.0 - n * n);
            }
            let un = &u[2 * hs * hs..];
            let mut drh = vec![0.0; hs];
            gemv_t(un, hs, hs, &dpre[2 * hs..], &mut drh);
            for k in 0..hs {
                let r = g[hs + k];
                dpre[hs + k] = drh[k] * h_prev[k] * r * (1.0 - r);
                dh_prev[k] += drh[k] * r;
            }
            let du = &mut grads[layer.u.range()];
            ger(&mut du[..2 * hs * hs], 2 * hs, hs, &dpre[..2 * hs], h_prev);
            ger(&mut du[2 * hs * hs..], hs, hs, &dpre[2 * hs..], &cache.rh);
            gemv_t(&u[..2 * hs * hs], 2 * hs, hs, &dpre[..2 * hs], &mut dh_prev);
            dpre
        }
        CellType::Lstm | CellType::ResLstm => {
            let mut dpre = vec![0.0; 4 * hs];
            dc_prev = vec![0.0; hs];
            for k in 0..hs {
                let (i, f, gg, o) = (g[k], g[hs + k], g[2 * hs + k], g[3 * hs + k]);
                let tc = cache.c[k].tanh();
                let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
                dpre[k] = dct * gg * i * (1.0 - i);
                dpre[hs + k] = dct * c_prev[k] * f * (1.0 - f);
                dpre[2 * hs + k] = dct * i * (1.0 - gg * gg);
                dpre[3 * hs + k] = dh[k] * tc * o * (1.0 - o);
                dc_prev[k] = dct * f;
            }
            if let (CellType::ResLstm, Some(p)) = (cell, &layer.p) {
                ger(&mut grads[p.range()], hs, d_in, dh, x);
                gemv_t(&params[p.range()], hs, d_in, dh, &mut dx);
            }
            ger(&mut grads[layer.u.range()], rows, hs, &dpre, h_prev);
            gemv_t(u, rows, hs, &dpre, &mut dh_prev);
            dpre
        }
    };
    ger(&mut grads[layer.w.range()], rows, d_in, &dpre, x);
    for (gb, d) in grads[layer.b.range()].iter_mut().zip(&dpre) {
        *gb += d;
    }
    gemv_t(w, rows, d_in, &dpre, &mut dx);
    StepGrads { dx, dh_prev, dc_prev }
}

/// One recurrent update of `layer` on input `x` from carried `state`.
pub fn cell_step(cell: CellType, params: &[f64], layer: &LayerLayout, x: &[f64], state: &CellState) -> CellState {
    let c_prev = if cell.has_cell_state() {
        state.c.clone()
    } else {
        Vec::new()
    };
    let cache = cell_forward(cell, params, layer, x, &state.h, &c_prev);
    CellState { h: cache.h, c: cache.c }
}
