//! Single-layer LSTM with a linear head, in plain `f64` with no fused or
//! reordered reductions: identical inputs give bit-identical outputs.
//!
//! Per step, with `[x; h]` the concatenated input and previous hidden state:
//!
//! ```text
//! i = sigmoid(W_i [x; h] + b_i)      f = sigmoid(W_f [x; h] + b_f)
//! g = tanh  (W_g [x; h] + b_g)      o = sigmoid(W_o [x; h] + b_o)
//! c' = f * c + i * g                 h' = o * tanh(c')
//! ```
//!
//! The forecast is `W_out h_T + b_out` on the final hidden state.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::faults::{self, FaultId};

/// Gate weights over `[input + hidden] -> hidden`, gate biases, and the
/// `hidden -> horizon` output projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub horizon: usize,
    pub w_i: Vec<f64>,
    pub w_f: Vec<f64>,
    pub w_g: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_g: Vec<f64>,
    pub b_o: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

impl LstmParams {
    /// All-zero parameters with consistent shapes.
    pub fn zeros(hidden_size: usize, horizon: usize) -> Self {
        let input_size = 1;
        let row = input_size + hidden_size;
        LstmParams {
            input_size,
            hidden_size,
            horizon,
            w_i: vec![0.0; hidden_size * row],
            w_f: vec![0.0; hidden_size * row],
            w_g: vec![0.0; hidden_size * row],
            w_o: vec![0.0; hidden_size * row],
            b_i: vec![0.0; hidden_size],
            b_f: vec![0.0; hidden_size],
            b_g: vec![0.0; hidden_size],
            b_o: vec![0.0; hidden_size],
            w_out: vec![0.0; horizon * hidden_size],
            b_out: vec![0.0; horizon],
        }
    }

    /// Seeded initialization: weights uniform in `+/- 1/sqrt(fan_in)`,
    /// biases zero except the forget gate at 1.
    pub fn init(hidden_size: usize, horizon: usize, seed: u64) -> Self {
        let mut p = Self::zeros(hidden_size, horizon);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gate_scale = 1.0 / ((p.input_size + hidden_size) as f64).sqrt();
        for w in [&mut p.w_i, &mut p.w_f, &mut p.w_g, &mut p.w_o] {
            for v in w.iter_mut() {
                *v = rng.random_range(-gate_scale..gate_scale);
            }
        }
        let head_scale = 1.0 / (hidden_size as f64).sqrt();
        for v in p.w_out.iter_mut() {
            *v = rng.random_range(-head_scale..head_scale);
        }
        let forget_bias = if faults::on(FaultId::ForgetBiasZero) { 0.0 } else { 1.0 };
        p.b_f.iter_mut().for_each(|b| *b = forget_bias);
        p
    }

    /// Every tensor in a fixed order, for elementwise walks (updates,
    /// clipping, finite differences).
    pub fn tensors(&self) -> [&Vec<f64>; 10] {
        [
            &self.w_i, &self.w_f, &self.w_g, &self.w_o, &self.b_i, &self.b_f, &self.b_g,
            &self.b_o, &self.w_out, &self.b_out,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 10] {
        [
            &mut self.w_i, &mut self.w_f, &mut self.w_g, &mut self.w_o, &mut self.b_i,
            &mut self.b_f, &mut self.b_g, &mut self.b_o, &mut self.w_out, &mut self.b_out,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Per-step activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache {
    x: f64,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Cache {
    steps: Vec<StepCache>,
    h_final: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Runs the recurrence over one window and applies the linear head.
/// Pure and deterministic; the cache feeds [`backward`].
pub fn forward(params: &LstmParams, window: &[f64]) -> (Vec<f64>, Cache) {
    assert!(!window.is_empty(), "window must hold at least one value");
    let hidden = params.hidden_size;
    let row = params.input_size + hidden;
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(window.len());

    for &x in window {
        let mut i_gate = vec![0.0; hidden];
        let mut f_gate = vec![0.0; hidden];
        let mut g_gate = vec![0.0; hidden];
        let mut o_gate = vec![0.0; hidden];
        for r in 0..hidden {
            let base = r * row;
            let mut zi = params.b_i[r] + params.w_i[base] * x;
            let mut zf = params.b_f[r] + params.w_f[base] * x;
            let mut zg = params.b_g[r] + params.w_g[base] * x;
            let mut zo = params.b_o[r] + params.w_o[base] * x;
            for (j, &hj) in h.iter().enumerate() {
                let k = base + 1 + j;
                zi += params.w_i[k] * hj;
                zf += params.w_f[k] * hj;
                zg += params.w_g[k] * hj;
                zo += params.w_o[k] * hj;
            }
            i_gate[r] = sigmoid(zi);
            f_gate[r] = sigmoid(zf);
            g_gate[r] = zg.tanh();
            o_gate[r] = sigmoid(zo);
        }
        let mut c_new = vec![0.0; hidden];
        let mut tanh_c = vec![0.0; hidden];
        let mut h_new = vec![0.0; hidden];
        for r in 0..hidden {
            c_new[r] = f_gate[r] * c[r] + i_gate[r] * g_gate[r];
            tanh_c[r] = c_new[r].tanh();
            h_new[r] = o_gate[r] * tanh_c[r];
        }
        steps.push(StepCache {
            x,
            h_prev: h,
            c_prev: c,
            i: i_gate,
            f: f_gate,
            g: g_gate,
            o: o_gate,
            tanh_c,
        });
        h = h_new;
        c = c_new;
    }

    let mut forecast = vec![0.0; params.horizon];
    for (j, out) in forecast.iter_mut().enumerate() {
        let mut acc = params.b_out[j];
        for (k, &hk) in h.iter().enumerate() {
            acc += params.w_out[j * hidden + k] * hk;
        }
        *out = acc;
    }
    (forecast, Cache { steps, h_final: h })
}

/// Backpropagates an arbitrary gradient on the forecast vector through the
/// head and the full recurrence. Returns parameter gradients plus the
/// gradient on the input window (used by the adversarial search).
pub fn backward(params: &LstmParams, cache: &Cache, d_forecast: &[f64]) -> (LstmParams, Vec<f64>) {
    assert_eq!(d_forecast.len(), params.horizon);
    let hidden = params.hidden_size;
    let row = params.input_size + hidden;
    let mut grads = LstmParams::zeros(hidden, params.horizon);
    let mut d_input = vec![0.0; cache.steps.len()];

    let mut dh = vec![0.0; hidden];
    for (j, &dj) in d_forecast.iter().enumerate() {
        grads.b_out[j] += dj;
        for (k, &hk) in cache.h_final.iter().enumerate() {
            grads.w_out[j * hidden + k] += dj * hk;
            dh[k] += params.w_out[j * hidden + k] * dj;
        }
    }

    let mut dc = vec![0.0; hidden];
    for (t, step) in cache.steps.iter().enumerate().rev() {
        let mut dh_prev = vec![0.0; hidden];
        let mut dx = 0.0;
        for r in 0..hidden {
            let do_r = dh[r] * step.tanh_c[r];
            let dc_r = dc[r] + dh[r] * step.o[r] * (1.0 - step.tanh_c[r] * step.tanh_c[r]);
            let di_r = dc_r * step.g[r];
            let dg_r = dc_r * step.i[r];
            let df_r = dc_r * step.c_prev[r];

            let dzi = di_r * step.i[r] * (1.0 - step.i[r]);
            let dzf = df_r * step.f[r] * (1.0 - step.f[r]);
            let dzg = dg_r * (1.0 - step.g[r] * step.g[r]);
            let dzo = do_r * step.o[r] * (1.0 - step.o[r]);

            let base = r * row;
            grads.w_i[base] += dzi * step.x;
            grads.w_f[base] += dzf * step.x;
            grads.w_g[base] += dzg * step.x;
            grads.w_o[base] += dzo * step.x;
            grads.b_i[r] += dzi;
            grads.b_f[r] += dzf;
            grads.b_g[r] += dzg;
            grads.b_o[r] += dzo;
            dx += params.w_i[base] * dzi
                + params.w_f[base] * dzf
                + params.w_g[base] * dzg
                + params.w_o[base] * dzo;
            for (j, dh_prev_j) in dh_prev.iter_mut().enumerate() {
                let k = base + 1 + j;
                grads.w_i[k] += dzi * step.h_prev[j];
                grads.w_f[k] += dzf * step.h_prev[j];
                grads.w_g[k] += dzg * step.h_prev[j];
                grads.w_o[k] += dzo * step.h_prev[j];
                *dh_prev_j += params.w_i[k] * dzi
                    + params.w_f[k] * dzf
                    + params.w_g[k] * dzg
                    + params.w_o[k] * dzo;
            }
            dc[r] = dc_r * step.f[r];
        }
        d_input[t] = dx;
        dh = dh_prev;
    }
    (grads, d_input)
}

/// Squared-error loss averaged over the horizon, with its forecast
/// gradient: the gradient seed `backward` expects.
pub fn mse_loss(forecast: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(forecast.len(), target.len());
    let n = forecast.len() as f64;
    let mut loss = 0.0;
    let mut d = vec![0.0; forecast.len()];
    for (k, (&p, &t)) in forecast.iter().zip(target).enumerate() {
        let e = p - t;
        loss += e * e / n;
        d[k] = 2.0 * e / n;
    }
    (loss, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_forecast_zero() {
        let p = LstmParams::zeros(8, 2);
        let (forecast, _) = forward(&p, &[0.3, -0.7, 1.1]);
        assert_eq!(forecast, vec![0.0, 0.0]);
    }

    #[test]
    fn forward_is_pure() {
        let p = LstmParams::init(6, 2, 11);
        let w = [0.1, 0.5, 0.9, 0.2];
        let (a, _) = forward(&p, &w);
        let (b, _) = forward(&p, &w);
        assert_eq!(a, b);
    }

    #[test]
    fn init_is_seed_deterministic_with_unit_forget_bias() {
        let a = LstmParams::init(16, 2, 7);
        let b = LstmParams::init(16, 2, 7);
        let c = LstmParams::init(16, 2, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.b_f.iter().all(|&v| v == 1.0));
        assert!(a.b_i.iter().all(|&v| v == 0.0));
        assert_eq!(a.w_i.len(), 16 * 17);
        assert_eq!(a.w_out.len(), 2 * 16);
        assert!(a.all_finite());
    }

    /// Step-by-step recurrence written independently from the gate
    /// equations, as a cross-check on the packed-loop implementation.
    fn forward_oracle(p: &LstmParams, window: &[f64]) -> Vec<f64> {
        let hid = p.hidden_size;
        let mut h = vec![0.0; hid];
        let mut c = vec![0.0; hid];
        let gate = |w: &[f64], b: &[f64], x: f64, h: &[f64], r: usize| {
            let row = 1 + hid;
            let mut z = b[r] + w[r * row] * x;
            for j in 0..hid {
                z += w[r * row + 1 + j] * h[j];
            }
            z
        };
        for &x in window {
            let mut h2 = vec![0.0; hid];
            let mut c2 = vec![0.0; hid];
            for r in 0..hid {
                let i = sigmoid(gate(&p.w_i, &p.b_i, x, &h, r));
                let f = sigmoid(gate(&p.w_f, &p.b_f, x, &h, r));
                let g = gate(&p.w_g, &p.b_g, x, &h, r).tanh();
                let o = sigmoid(gate(&p.w_o, &p.b_o, x, &h, r));
                c2[r] = f * c[r] + i * g;
                h2[r] = o * c2[r].tanh();
            }
            h = h2;
            c = c2;
        }
        (0..p.horizon)
            .map(|j| {
                p.b_out[j]
                    + (0..hid).map(|k| p.w_out[j * hid + k] * h[k]).sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn forward_matches_independent_recurrence() {
        for seed in 0..5 {
            let p = LstmParams::init(5, 2, seed);
            let window: Vec<f64> = (0..7).map(|i| ((seed + i) as f64 * 0.37).sin()).collect();
            let (got, _) = forward(&p, &window);
            let want = forward_oracle(&p, &window);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn loss_gradient_scales_linearly() {
        let p = LstmParams::init(4, 2, 3);
        let window = [0.2, 0.4, 0.6];
        let target = [0.5, 0.1];
        let (forecast, cache) = forward(&p, &window);
        let (_, d) = mse_loss(&forecast, &target);
        let (g1, _) = backward(&p, &cache, &d);
        let d2: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
        let (g2, _) = backward(&p, &cache, &d2);
        for (t1, t2) in g1.tensors().iter().zip(g2.tensors().iter()) {
            for (a, b) in t1.iter().zip(t2.iter()) {
                assert!((2.0 * a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn untouched_head_rows_get_zero_gradient() {
        let p = LstmParams::init(4, 3, 5);
        let (forecast, cache) = forward(&p, &[0.1, 0.2]);
        // Only output 0 contributes to the loss seed.
        let mut d = vec![0.0; 3];
        d[0] = 2.0 * (forecast[0] - 1.0);
        let (g, _) = backward(&p, &cache, &d);
        assert!(g.w_out[4..].iter().all(|&v| v == 0.0));
        assert_eq!(g.b_out[1], 0.0);
        assert_eq!(g.b_out[2], 0.0);
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for seed in 0..10 {
            let p = LstmParams::init(4, 2, 100 + seed);
            let window: Vec<f64> = (0..6).map(|i| ((seed * 7 + i) as f64 * 0.21).cos()).collect();
            let target = [0.3, -0.4];
            let (forecast, cache) = forward(&p, &window);
            let (_, d) = mse_loss(&forecast, &target);
            let (analytic, _) = backward(&p, &cache, &d);

            let loss_at = |p: &LstmParams| {
                let (f, _) = forward(p, &window);
                mse_loss(&f, &target).0
            };
            for ti in 0..10 {
                for k in 0..analytic.tensors()[ti].len() {
                    let mut plus = p.clone();
                    plus.tensors_mut()[ti][k] += eps;
                    let mut minus = p.clone();
                    minus.tensors_mut()[ti][k] -= eps;
                    let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * eps);
                    let a = analytic.tensors()[ti][k];
                    if a.abs() < 1e-7 && numeric.abs() < 1e-7 {
                        continue;
                    }
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
                    worst = worst.max(rel);
                }
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let eps = 1e-5;
        let p = LstmParams::init(5, 2, 42);
        let window: Vec<f64> = vec![0.3, 0.8, 0.1, 0.6];
        let target = [0.2, 0.9];
        let (forecast, cache) = forward(&p, &window);
        let (_, d) = mse_loss(&forecast, &target);
        let (_, d_input) = backward(&p, &cache, &d);
        for t in 0..window.len() {
            let mut plus = window.clone();
            plus[t] += eps;
            let mut minus = window.clone();
            minus[t] -= eps;
            let lp = mse_loss(&forward(&p, &plus).0, &target).0;
            let lm = mse_loss(&forward(&p, &minus).0, &target).0;
            let numeric = (lp - lm) / (2.0 * eps);
            let rel = (d_input[t] - numeric).abs() / d_input[t].abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-4, "step {t}: {} vs {numeric}", d_input[t]);
        }
    }
}
