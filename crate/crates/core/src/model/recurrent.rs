//! GRU and LSTM cells with explicit backward passes, and their
//! bidirectional wrapper.
//!
//! Gate layouts follow the common convention: GRU rows are `[r; z; n]` with
//! `n = tanh(W_n x + b_in + r ⊙ (U_n h + b_hn))` and
//! `h' = (1 - z) ⊙ n + z ⊙ h`; LSTM rows are `[i; f; g; o]`.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::glorot_uniform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encoder {
    #[serde(rename = "BiGRU")]
    BiGru,
    #[serde(rename = "BiLSTM")]
    BiLstm,
}

impl Encoder {
    fn gates(self) -> usize {
        match self {
            Encoder::BiGru => 3,
            Encoder::BiLstm => 4,
        }
    }
}

/// Weights of one recurrent direction.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub b_ih: Array1<f64>,
    pub b_hh: Array1<f64>,
}

impl RnnParams {
    pub(crate) fn init<R: Rng>(kind: Encoder, input: usize, hidden: usize, rng: &mut R) -> Self {
        let rows = kind.gates() * hidden;
        let mut b_ih = Array1::zeros(rows);
        if kind == Encoder::BiLstm {
            b_ih.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        }
        RnnParams {
            w_ih: glorot_uniform(rows, input, rng),
            w_hh: glorot_uniform(rows, hidden, rng),
            b_ih,
            b_hh: Array1::zeros(rows),
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        RnnParams {
            w_ih: Array2::zeros(self.w_ih.raw_dim()),
            w_hh: Array2::zeros(self.w_hh.raw_dim()),
            b_ih: Array1::zeros(self.b_ih.raw_dim()),
            b_hh: Array1::zeros(self.b_hh.raw_dim()),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.ncols()
    }

    pub fn input(&self) -> usize {
        self.w_ih.ncols()
    }

    pub(crate) fn slices(&self) -> [&[f64]; 4] {
        [
            self.w_ih.as_slice().expect("standard layout"),
            self.w_hh.as_slice().expect("standard layout"),
            self.b_ih.as_slice().expect("standard layout"),
            self.b_hh.as_slice().expect("standard layout"),
        ]
    }

    pub(crate) fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w_ih.as_slice_mut().expect("standard layout"),
            self.w_hh.as_slice_mut().expect("standard layout"),
            self.b_ih.as_slice_mut().expect("standard layout"),
            self.b_hh.as_slice_mut().expect("standard layout"),
        ]
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-step activations saved for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct RnnCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    /// GRU: r, z, n, U_n h + b_hn. LSTM: i, f, g, o.
    gates: [Array2<f64>; 4],
    /// LSTM only: previous and new cell state, tanh of the new cell state.
    c_prev: Option<Array2<f64>>,
    tanh_c: Option<Array2<f64>>,
}

pub(crate) fn rnn_forward(kind: Encoder, p: &RnnParams, x: ArrayView2<f64>) -> (Array2<f64>, RnnCache) {
    match kind {
        Encoder::BiGru => gru_forward(p, x),
        Encoder::BiLstm => lstm_forward(p, x),
    }
}

/// Returns parameter gradients and, if requested, the input gradient.
pub(crate) fn rnn_backward(
    kind: Encoder,
    p: &RnnParams,
    cache: &RnnCache,
    d_out: ArrayView2<f64>,
    want_dx: bool,
) -> (RnnParams, Option<Array2<f64>>) {
    match kind {
        Encoder::BiGru => gru_backward(p, cache, d_out, want_dx),
        Encoder::BiLstm => lstm_backward(p, cache, d_out, want_dx),
    }
}

fn gru_forward(p: &RnnParams, x: ArrayView2<f64>) -> (Array2<f64>, RnnCache) {
    let (len, hid) = (x.nrows(), p.hidden());
    let gi = x.dot(&p.w_ih.t()) + &p.b_ih;
    let mut h = Array1::<f64>::zeros(hid);
    let mut out = Array2::zeros((len, hid));
    let mut h_prev = Array2::zeros((len, hid));
    let mut gates: [Array2<f64>; 4] = std::array::from_fn(|_| Array2::zeros((len, hid)));
    for t in 0..len {
        let gh = p.w_hh.dot(&h) + &p.b_hh;
        let gi_t = gi.row(t);
        h_prev.row_mut(t).assign(&h);
        for k in 0..hid {
            let r = sigmoid(gi_t[k] + gh[k]);
            let z = sigmoid(gi_t[hid + k] + gh[hid + k]);
            let ghn = gh[2 * hid + k];
            let n = (gi_t[2 * hid + k] + r * ghn).tanh();
            let h_new = (1.0 - z) * n + z * h[k];
            gates[0][[t, k]] = r;
            gates[1][[t, k]] = z;
            gates[2][[t, k]] = n;
            gates[3][[t, k]] = ghn;
            out[[t, k]] = h_new;
        }
        h.assign(&out.row(t));
    }
    let cache = RnnCache {
        x: x.to_owned(),
        h_prev,
        gates,
        c_prev: None,
        tanh_c: None,
    };
    (out, cache)
}

fn gru_backward(
    p: &RnnParams,
    cache: &RnnCache,
    d_out: ArrayView2<f64>,
    want_dx: bool,
) -> (RnnParams, Option<Array2<f64>>) {
    let (len, hid) = (d_out.nrows(), p.hidden());
    let [r, z, n, ghn] = &cache.gates;
    let mut d_gi = Array2::<f64>::zeros((len, 3 * hid));
    let mut d_gh = Array2::<f64>::zeros((len, 3 * hid));
    let mut dh_next = Array1::<f64>::zeros(hid);
    for t in (0..len).rev() {
        let mut dh_prev = Array1::<f64>::zeros(hid);
        for k in 0..hid {
            let dh = d_out[[t, k]] + dh_next[k];
            let (rt, zt, nt) = (r[[t, k]], z[[t, k]], n[[t, k]]);
            let dn_pre = dh * (1.0 - zt) * (1.0 - nt * nt);
            let dz_pre = dh * (cache.h_prev[[t, k]] - nt) * zt * (1.0 - zt);
            let dr_pre = dn_pre * ghn[[t, k]] * rt * (1.0 - rt);
            dh_prev[k] = dh * zt;
            d_gi[[t, k]] = dr_pre;
            d_gi[[t, hid + k]] = dz_pre;
            d_gi[[t, 2 * hid + k]] = dn_pre;
            d_gh[[t, k]] = dr_pre;
            d_gh[[t, hid + k]] = dz_pre;
            d_gh[[t, 2 * hid + k]] = dn_pre * rt;
        }
        dh_prev += &p.w_hh.t().dot(&d_gh.row(t));
        dh_next = dh_prev;
    }
    finish_backward(p, cache, &d_gi, &d_gh, want_dx)
}

fn lstm_forward(p: &RnnParams, x: ArrayView2<f64>) -> (Array2<f64>, RnnCache) {
    let (len, hid) = (x.nrows(), p.hidden());
    let gi = x.dot(&p.w_ih.t()) + &p.b_ih;
    let mut h = Array1::<f64>::zeros(hid);
    let mut c = Array1::<f64>::zeros(hid);
    let mut out = Array2::zeros((len, hid));
    let mut h_prev = Array2::zeros((len, hid));
    let mut c_prev = Array2::zeros((len, hid));
    let mut tanh_c = Array2::zeros((len, hid));
    let mut gates: [Array2<f64>; 4] = std::array::from_fn(|_| Array2::zeros((len, hid)));
    for t in 0..len {
        let pre = p.w_hh.dot(&h) + &p.b_hh + gi.row(t);
        h_prev.row_mut(t).assign(&h);
        c_prev.row_mut(t).assign(&c);
        for k in 0..hid {
            let i = sigmoid(pre[k]);
            let f = sigmoid(pre[hid + k]);
            let g = pre[2 * hid + k].tanh();
            let o = sigmoid(pre[3 * hid + k]);
            let c_new = f * c[k] + i * g;
            let tc = c_new.tanh();
            gates[0][[t, k]] = i;
            gates[1][[t, k]] = f;
            gates[2][[t, k]] = g;
            gates[3][[t, k]] = o;
            tanh_c[[t, k]] = tc;
            c[k] = c_new;
            out[[t, k]] = o * tc;
        }
        h.assign(&out.row(t));
    }
    let cache = RnnCache {
        x: x.to_owned(),
        h_prev,
        gates,
        c_prev: Some(c_prev),
        tanh_c: Some(tanh_c),
    };
    (out, cache)
}

fn lstm_backward(
    p: &RnnParams,
    cache: &RnnCache,
    d_out: ArrayView2<f64>,
    want_dx: bool,
) -> (RnnParams, Option<Array2<f64>>) {
    let (len, hid) = (d_out.nrows(), p.hidden());
    let [gi, gf, gg, go] = &cache.gates;
    let c_prev = cache.c_prev.as_ref().expect("LSTM cache");
    let tanh_c = cache.tanh_c.as_ref().expect("LSTM cache");
    let mut d_gates = Array2::<f64>::zeros((len, 4 * hid));
    let mut dh_next = Array1::<f64>::zeros(hid);
    let mut dc_next = Array1::<f64>::zeros(hid);
    for t in (0..len).rev() {
        for k in 0..hid {
            let dh = d_out[[t, k]] + dh_next[k];
            let (i, f, g, o, tc) = (gi[[t, k]], gf[[t, k]], gg[[t, k]], go[[t, k]], tanh_c[[t, k]]);
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            d_gates[[t, k]] = dc * g * i * (1.0 - i);
            d_gates[[t, hid + k]] = dc * c_prev[[t, k]] * f * (1.0 - f);
            d_gates[[t, 2 * hid + k]] = dc * i * (1.0 - g * g);
            d_gates[[t, 3 * hid + k]] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        dh_next = p.w_hh.t().dot(&d_gates.row(t));
    }
    finish_backward(p, cache, &d_gates, &d_gates, want_dx)
}

/// Weight gradients from the per-step pre-activation gradients of the input
/// and hidden projections.
fn finish_backward(
    p: &RnnParams,
    cache: &RnnCache,
    d_gi: &Array2<f64>,
    d_gh: &Array2<f64>,
    want_dx: bool,
) -> (RnnParams, Option<Array2<f64>>) {
    let grads = RnnParams {
        w_ih: d_gi.t().dot(&cache.x).as_standard_layout().into_owned(),
        w_hh: d_gh.t().dot(&cache.h_prev).as_standard_layout().into_owned(),
        b_ih: d_gi.sum_axis(Axis(0)),
        b_hh: d_gh.sum_axis(Axis(0)),
    };
    let dx = want_dx.then(|| d_gi.dot(&p.w_ih));
    (grads, dx)
}

/// Forward and backward directions of one bidirectional layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BiRnnParams {
    pub forward: RnnParams,
    pub backward: RnnParams,
}

impl BiRnnParams {
    pub(crate) fn init<R: Rng>(kind: Encoder, input: usize, hidden: usize, rng: &mut R) -> Self {
        BiRnnParams {
            forward: RnnParams::init(kind, input, hidden, rng),
            backward: RnnParams::init(kind, input, hidden, rng),
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        BiRnnParams {
            forward: self.forward.zeros_like(),
            backward: self.backward.zeros_like(),
        }
    }

    pub fn output_width(&self) -> usize {
        self.forward.hidden() + self.backward.hidden()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BiRnnCache {
    forward: RnnCache,
    backward: RnnCache,
}

fn reversed(x: ArrayView2<f64>) -> Array2<f64> {
    x.slice(s![..;-1, ..]).to_owned()
}

/// Output row `t` is `[forward_t, backward_t]`, where the backward pass reads
/// the sequence right to left.
pub(crate) fn birnn_forward(kind: Encoder, p: &BiRnnParams, x: ArrayView2<f64>) -> (Array2<f64>, BiRnnCache) {
    let (fwd, fwd_cache) = rnn_forward(kind, &p.forward, x);
    let (bwd_rev, bwd_cache) = rnn_forward(kind, &p.backward, reversed(x).view());
    let bwd = reversed(bwd_rev.view());
    let out = concatenate(Axis(1), &[fwd.view(), bwd.view()]).expect("same length");
    (
        out,
        BiRnnCache {
            forward: fwd_cache,
            backward: bwd_cache,
        },
    )
}

pub(crate) fn birnn_backward(
    kind: Encoder,
    p: &BiRnnParams,
    cache: &BiRnnCache,
    d_out: ArrayView2<f64>,
    want_dx: bool,
) -> (BiRnnParams, Option<Array2<f64>>) {
    let h = p.forward.hidden();
    let d_fwd = d_out.slice(s![.., ..h]);
    let d_bwd_rev = reversed(d_out.slice(s![.., h..]));
    let (g_fwd, dx_fwd) = rnn_backward(kind, &p.forward, &cache.forward, d_fwd, want_dx);
    let (g_bwd, dx_bwd_rev) = rnn_backward(kind, &p.backward, &cache.backward, d_bwd_rev.view(), want_dx);
    let dx = match (dx_fwd, dx_bwd_rev) {
        (Some(a), Some(b)) => Some(a + reversed(b.view())),
        _ => None,
    };
    (
        BiRnnParams {
            forward: g_fwd,
            backward: g_bwd,
        },
        dx,
    )
}
