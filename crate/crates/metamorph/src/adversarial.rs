//! Gradient-based search for adversarial input windows: perturb a source
//! window as little as possible while driving its forecast to a chosen
//! multiple (by default, double).
//!
//! The perturbed window is parameterized as `X_p = X_aux^2`, which keeps it
//! non-negative; `X_aux` starts at `sqrt(X_s)` so the search begins at the
//! source window itself. The total loss
//! `w_in * ||X_s - X_p||^2 + w_f * (target_scale * y_s - y_p)^2`
//! is minimized over `X_aux` with per-coordinate adaptive steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{self, LstmParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialOptions {
    /// Optimization steps G; 0 returns the identity result.
    pub steps: usize,
    pub learning_rate: f64,
    /// Weight of the input-distance loss term.
    pub input_weight: f64,
    /// Weight of the forecast loss term.
    pub forecast_weight: f64,
    /// The forecast the search drives toward, as a multiple of the source
    /// forecast.
    pub target_scale: f64,
    /// Success needs relative input distance below this.
    pub distance_threshold: f64,
    /// Success needs `y_p / y_s` inside this band.
    pub ratio_band: (f64, f64),
}

impl Default for AdversarialOptions {
    fn default() -> Self {
        AdversarialOptions {
            steps: 200,
            learning_rate: 0.05,
            input_weight: 1.0,
            forecast_weight: 1.0,
            target_scale: 2.0,
            distance_threshold: 0.1,
            ratio_band: (1.8, 2.2),
        }
    }
}

/// Outcome of one per-window search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialResult {
    pub source: Vec<f64>,
    pub perturbed: Vec<f64>,
    pub y_source: f64,
    pub y_perturbed: f64,
    /// `||X_s - X_p||^2`.
    pub input_distance_sq: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_trace: Vec<f64>,
    pub success: bool,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Runs the search on one normalized, non-negative window.
pub fn attack_window(
    params: &LstmParams,
    window: &[f64],
    opts: &AdversarialOptions,
) -> Result<AdversarialResult> {
    if window.iter().any(|&v| v < 0.0) {
        return Err(Error::NonPositiveWindow);
    }
    let (forecast, _) = lstm::forward(params, window);
    let y_source = forecast[0];
    let target = opts.target_scale * y_source;

    if opts.steps == 0 {
        let loss = opts.forecast_weight * (target - y_source) * (target - y_source);
        return Ok(AdversarialResult {
            source: window.to_vec(),
            perturbed: window.to_vec(),
            y_source,
            y_perturbed: y_source,
            input_distance_sq: 0.0,
            initial_loss: loss,
            final_loss: loss,
            loss_trace: vec![loss],
            success: false,
        });
    }

    let mut aux: Vec<f64> = window.iter().map(|v| v.sqrt()).collect();
    let mut m = vec![0.0; aux.len()];
    let mut v = vec![0.0; aux.len()];
    let mut trace = Vec::with_capacity(opts.steps + 1);
    let mut perturbed: Vec<f64> = aux.iter().map(|a| a * a).collect();
    let mut y_perturbed = y_source;

    for step in 0..=opts.steps {
        perturbed = aux.iter().map(|a| a * a).collect();
        let (pred, cache) = lstm::forward(params, &perturbed);
        y_perturbed = pred[0];

        let dist_sq: f64 = window
            .iter()
            .zip(&perturbed)
            .map(|(s, p)| (s - p) * (s - p))
            .sum();
        let forecast_err = target - y_perturbed;
        let loss = opts.input_weight * dist_sq + opts.forecast_weight * forecast_err * forecast_err;
        trace.push(loss);
        if step == opts.steps {
            break;
        }

        let mut d_forecast = vec![0.0; params.horizon];
        d_forecast[0] = -2.0 * opts.forecast_weight * forecast_err;
        let (_, d_input) = lstm::backward(params, &cache, &d_forecast);

        let t = (step + 1) as f64;
        let bias1 = 1.0 - ADAM_BETA1.powf(t);
        let bias2 = 1.0 - ADAM_BETA2.powf(t);
        for k in 0..aux.len() {
            let d_perturbed = 2.0 * opts.input_weight * (perturbed[k] - window[k]) + d_input[k];
            let grad = d_perturbed * 2.0 * aux[k];
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * grad;
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * grad * grad;
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            aux[k] -= opts.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }

    let input_distance_sq: f64 = window
        .iter()
        .zip(&perturbed)
        .map(|(s, p)| (s - p) * (s - p))
        .sum();
    let source_norm: f64 = window.iter().map(|s| s * s).sum::<f64>().sqrt();
    let rel_distance = if source_norm > 0.0 {
        input_distance_sq.sqrt() / source_norm
    } else {
        f64::INFINITY
    };
    let ratio_ok = y_source.abs() > 1e-9 && {
        let ratio = y_perturbed / y_source;
        opts.ratio_band.0 <= ratio && ratio <= opts.ratio_band.1
    };
    let success = rel_distance < opts.distance_threshold && ratio_ok;

    Ok(AdversarialResult {
        source: window.to_vec(),
        perturbed,
        y_source,
        y_perturbed,
        input_distance_sq,
        initial_loss: trace[0],
        final_loss: *trace.last().unwrap(),
        loss_trace: trace,
        success,
    })
}

/// Runs the search over a set of windows.
pub fn attack_set(
    params: &LstmParams,
    windows: &[Vec<f64>],
    opts: &AdversarialOptions,
) -> Result<Vec<AdversarialResult>> {
    windows.iter().map(|w| attack_window(params, w, opts)).collect()
}

/// Fraction of successful searches.
pub fn success_fraction(results: &[AdversarialResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.success).count() as f64 / results.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> LstmParams {
        LstmParams::init(8, 2, seed)
    }

    #[test]
    fn zero_steps_is_the_identity() {
        let p = params(3);
        let window = vec![0.2, 0.5, 0.9, 0.4, 0.1];
        let r = attack_window(&p, &window, &AdversarialOptions { steps: 0, ..Default::default() })
            .unwrap();
        assert_eq!(r.perturbed, window);
        assert_eq!(r.y_perturbed, r.y_source);
        assert_eq!(r.input_distance_sq, 0.0);
        assert_eq!(r.loss_trace.len(), 1);
    }

    #[test]
    fn negative_input_is_rejected() {
        let p = params(3);
        assert!(matches!(
            attack_window(&p, &[0.2, -0.1, 0.5], &AdversarialOptions::default()),
            Err(Error::NonPositiveWindow)
        ));
    }

    #[test]
    fn optimization_reduces_the_loss() {
        let p = params(7);
        let window = vec![0.3, 0.6, 0.2, 0.8, 0.5, 0.4];
        let r = attack_window(&p, &window, &AdversarialOptions::default()).unwrap();
        assert!(r.final_loss < r.initial_loss, "{} !< {}", r.final_loss, r.initial_loss);
        assert!(r.loss_trace.iter().all(|l| l.is_finite()));
        assert_eq!(r.loss_trace.len(), 201);
        assert!(r.perturbed.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn pure_distance_objective_keeps_the_window_in_place() {
        // With the forecast term weighted to zero the optimum is the
        // source window itself; distance must never grow.
        let p = params(5);
        let window = vec![0.4, 0.7, 0.3, 0.9];
        let opts = AdversarialOptions {
            forecast_weight: 0.0,
            steps: 50,
            ..Default::default()
        };
        let r = attack_window(&p, &window, &opts).unwrap();
        for pair in r.loss_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15, "distance grew: {pair:?}");
        }
        assert!(r.input_distance_sq < 1e-20);
    }

    #[test]
    fn determinism() {
        let p = params(11);
        let window = vec![0.2, 0.5, 0.7];
        let opts = AdversarialOptions { steps: 40, ..Default::default() };
        let a = attack_window(&p, &window, &opts).unwrap();
        let b = attack_window(&p, &window, &opts).unwrap();
        assert_eq!(a, b);
    }
}
