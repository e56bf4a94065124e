//! The reference forecaster under test: min-max normalization fitted on the
//! training series, stride-1 windowing, and mini-batch gradient descent on
//! a single-layer LSTM. Fully deterministic per seed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faults::{self, FaultId};
use crate::lstm::{self, LstmParams};
use crate::series::{make_sequences_from, Normalizer, TimeSeries};

/// Hyper-parameters. The seed fully determines initialization and epoch
/// shuffling, so identical `(series, config)` always give the identical
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub time_steps: usize,
    pub horizon: usize,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            time_steps: 10,
            horizon: 2,
            batch_size: 16,
            hidden_size: 16,
            epochs: 60,
            learning_rate: 0.05,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("time_steps", self.time_steps),
            ("horizon", self.horizon),
            ("batch_size", self.batch_size),
            ("hidden_size", self.hidden_size),
            ("epochs", self.epochs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Trained parameters plus the normalizer fitted on the training series.
/// The normalizer travels with the model, so evaluation can never re-derive
/// min/max from validation data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: LstmParams,
    pub normalizer: Normalizer,
    pub config: TrainConfig,
    pub final_train_loss: f64,
    pub n_train_windows: usize,
}

/// Evaluation on one validation series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Mean squared error in normalized space, over all windows.
    pub validation_loss: f64,
    /// Forecast for the first validation window, rescaled to original units.
    pub first_forecast: Vec<f64>,
    pub n_windows: usize,
}

const GRAD_CLIP_NORM: f64 = 5.0;

/// Fits the normalizer on `series`, windows the normalized values, and runs
/// seeded mini-batch gradient descent. The last short batch is kept.
pub fn train(series: &TimeSeries, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    let values = series.dense()?;
    if values.len() < config.time_steps + config.horizon {
        return Err(Error::InsufficientData {
            len: values.len(),
            time_steps: config.time_steps,
            horizon: config.horizon,
        });
    }
    let normalizer = Normalizer::fit(&values)?;
    let normalized: Vec<f64> = values.iter().map(|&v| normalizer.normalize(v)).collect();
    let dataset = make_sequences_from(&normalized, config.time_steps, config.horizon)?;
    let n_windows = dataset.len();

    let mut params = LstmParams::init(config.hidden_size, config.horizon, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n_windows).collect();

    for _ in 0..config.epochs {
        if !faults::on(FaultId::TrainShuffleDisabled) {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(config.batch_size) {
            let mut grads = LstmParams::zeros(config.hidden_size, config.horizon);
            for &w in batch {
                let (forecast, cache) = lstm::forward(&params, &dataset.inputs[w]);
                let (_, d_forecast) = window_loss(&forecast, &dataset.targets[w]);
                let (g, _) = lstm::backward(&params, &cache, &d_forecast);
                accumulate(&mut grads, &g);
            }
            let scale = 1.0 / batch.len() as f64;
            scale_params(&mut grads, scale);
            if !faults::on(FaultId::GradClipDisabled) {
                clip_global_norm(&mut grads, GRAD_CLIP_NORM);
            }
            apply_update(&mut params, &grads, config.learning_rate);
        }
    }

    let mut final_train_loss = 0.0;
    for (input, target) in dataset.inputs.iter().zip(&dataset.targets) {
        let (forecast, _) = lstm::forward(&params, input);
        final_train_loss += window_loss(&forecast, target).0;
    }
    final_train_loss /= n_windows as f64;

    Ok(TrainedModel {
        params,
        normalizer,
        config: *config,
        final_train_loss,
        n_train_windows: n_windows,
    })
}

/// Per-window squared error, averaged over the horizon, and its forecast
/// gradient.
fn window_loss(forecast: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    if faults::on(FaultId::TrainLossSumNotMean) {
        let mut loss = 0.0;
        let mut d = vec![0.0; forecast.len()];
        for (k, (&p, &t)) in forecast.iter().zip(target).enumerate() {
            let e = p - t;
            loss += e * e;
            d[k] = 2.0 * e;
        }
        return (loss, d);
    }
    lstm::mse_loss(forecast, target)
}

fn accumulate(into: &mut LstmParams, from: &LstmParams) {
    for (dst, src) in into.tensors_mut().into_iter().zip(from.tensors()) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    }
}

fn scale_params(p: &mut LstmParams, scale: f64) {
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v *= scale;
        }
    }
}

fn clip_global_norm(g: &mut LstmParams, max_norm: f64) {
    let mut sq = 0.0;
    for t in g.tensors() {
        for v in t {
            sq += v * v;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        scale_params(g, max_norm / norm);
    }
}

fn apply_update(params: &mut LstmParams, grads: &LstmParams, lr: f64) {
    for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        for (pv, gv) in p.iter_mut().zip(g) {
            *pv -= lr * gv;
        }
    }
}

/// Normalizes `val` with the model's training normalizer, windows it, and
/// scores mean squared error in normalized space. The first window's
/// forecast is rescaled to original units.
pub fn evaluate(model: &TrainedModel, val: &TimeSeries) -> Result<EvalResult> {
    let values = val.dense()?;
    let normalizer = if faults::on(FaultId::NormFitOnValidation) {
        Normalizer::fit(&values)?
    } else {
        model.normalizer
    };
    let mut normalized: Vec<f64> = values.iter().map(|&v| normalizer.normalize(v)).collect();
    if faults::on(FaultId::EvalClipsNormalized) {
        for v in normalized.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
    let config = &model.config;
    let mut dataset = make_sequences_from(&normalized, config.time_steps, config.horizon)?;
    if faults::on(FaultId::EvalSkipsFirstWindow) {
        dataset.inputs.remove(0);
        dataset.targets.remove(0);
        if dataset.is_empty() {
            return Err(Error::InsufficientData {
                len: values.len(),
                time_steps: config.time_steps,
                horizon: config.horizon,
            });
        }
    }

    let mut loss = 0.0;
    let mut first_forecast = Vec::new();
    for (w, (input, target)) in dataset.inputs.iter().zip(&dataset.targets).enumerate() {
        let (forecast, _) = lstm::forward(&model.params, input);
        if faults::on(FaultId::EvalLossDenormalized) {
            let n = forecast.len() as f64;
            for (&p, &t) in forecast.iter().zip(target) {
                let e = normalizer.denormalize(p) - normalizer.denormalize(t);
                loss += e * e / n;
            }
        } else {
            loss += lstm::mse_loss(&forecast, target).0;
        }
        if w == 0 {
            first_forecast = forecast.iter().map(|&p| normalizer.denormalize(p)).collect();
        }
    }
    loss /= dataset.len() as f64;

    Ok(EvalResult {
        validation_loss: loss,
        first_forecast,
        n_windows: dataset.len(),
    })
}

impl TrainedModel {
    /// Serializes the model (config, normalizer, parameters) as JSON. The
    /// float encoding round-trips bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("model serialization failed: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        serde_json::from_str(&json).map_err(|e| Error::Config(format!("model parse failed: {e}")))
    }

    /// Forecast for one normalized window, in normalized space.
    pub fn forecast_window(&self, window: &[f64]) -> Result<Vec<f64>> {
        if window.len() != self.config.time_steps {
            return Err(Error::ShapeMismatch {
                expected: self.config.time_steps,
                got: window.len(),
            });
        }
        Ok(lstm::forward(&self.params, window).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{synth_series, SynthKind};

    fn quick_config(seed: u64) -> TrainConfig {
        TrainConfig {
            time_steps: 6,
            horizon: 2,
            batch_size: 8,
            hidden_size: 8,
            epochs: 30,
            learning_rate: 0.05,
            seed,
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let series = synth_series(SynthKind::SineTrend, 80, 3);
        let config = quick_config(9);
        let a = train(&series, &config).unwrap();
        let b = train(&series, &config).unwrap();
        assert_eq!(a, b);
        let ea = evaluate(&a, &series).unwrap();
        let eb = evaluate(&b, &series).unwrap();
        assert_eq!(ea, eb);
    }

    #[test]
    fn different_seeds_give_different_models() {
        let series = synth_series(SynthKind::SineTrend, 80, 3);
        let a = train(&series, &quick_config(1)).unwrap();
        let b = train(&series, &quick_config(2)).unwrap();
        assert_ne!(a.params, b.params);
    }

    #[test]
    fn single_sequence_is_enough_to_train() {
        // Length exactly time_steps + horizon.
        let series = synth_series(SynthKind::SineTrend, 8, 5);
        let model = train(&series, &quick_config(1)).unwrap();
        assert_eq!(model.n_train_windows, 1);
        assert!(model.params.all_finite());
    }

    #[test]
    fn too_short_series_is_a_clean_error() {
        let series = synth_series(SynthKind::SineTrend, 7, 5);
        assert!(matches!(
            train(&series, &quick_config(1)),
            Err(Error::InsufficientData { len: 7, .. })
        ));
    }

    #[test]
    fn constant_series_propagates_zero_range() {
        let series = synth_series(SynthKind::Constant, 40, 0);
        assert!(matches!(
            train(&series, &quick_config(1)),
            Err(Error::ZeroRange { .. })
        ));
    }

    #[test]
    fn nearly_constant_series_converges_to_tiny_loss() {
        // Constant plus a faint wobble; enough epochs drive normalized
        // training loss well under 1e-3.
        let values: Vec<f64> = (0..60)
            .map(|t| 50.0 + 0.01 * ((t as f64) * 0.7).sin())
            .collect();
        let series = TimeSeries::from_values(values);
        let mut config = quick_config(4);
        config.epochs = 200;
        let model = train(&series, &config).unwrap();
        assert!(
            model.final_train_loss < 1e-3,
            "loss {}",
            model.final_train_loss
        );
    }

    #[test]
    fn evaluating_training_data_on_a_fit_model_matches_train_loss() {
        let series = synth_series(SynthKind::SineTrend, 100, 7);
        let mut config = quick_config(2);
        config.epochs = 150;
        let model = train(&series, &config).unwrap();
        let eval = evaluate(&model, &series).unwrap();
        let rel = (eval.validation_loss - model.final_train_loss).abs()
            / model.final_train_loss.max(1e-12);
        assert!(rel < 0.1, "val {} vs train {}", eval.validation_loss, model.final_train_loss);
    }

    #[test]
    fn exactly_one_validation_window_evaluates() {
        let series = synth_series(SynthKind::SineTrend, 100, 7);
        let config = quick_config(2);
        let model = train(&series, &config).unwrap();
        let val = synth_series(SynthKind::SineTrend, 8, 8);
        let eval = evaluate(&model, &val).unwrap();
        assert_eq!(eval.n_windows, 1);
        assert!(eval.validation_loss.is_finite());
        assert_eq!(eval.first_forecast.len(), 2);
    }

    #[test]
    fn model_round_trips_bit_exactly_through_disk() {
        let series = synth_series(SynthKind::SineTrend, 60, 1);
        let model = train(&series, &quick_config(6)).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        model.save(file.path()).unwrap();
        let loaded = TrainedModel::load(file.path()).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn forecast_window_checks_shape() {
        let series = synth_series(SynthKind::SineTrend, 60, 1);
        let model = train(&series, &quick_config(6)).unwrap();
        assert!(matches!(
            model.forecast_window(&[0.1; 4]),
            Err(Error::ShapeMismatch { expected: 6, got: 4 })
        ));
        assert_eq!(model.forecast_window(&[0.5; 6]).unwrap().len(), 2);
    }

    #[test]
    fn training_beats_the_untrained_model_on_a_clean_trend() {
        let series = synth_series(SynthKind::Linear, 90, 0);
        let val = synth_series_tail();
        let mut wins = 0;
        for seed in 0..20 {
            let config = TrainConfig {
                epochs: 40,
                ..quick_config(seed)
            };
            let trained = train(&series, &config).unwrap();
            let untrained = TrainedModel {
                params: LstmParams::init(config.hidden_size, config.horizon, config.seed),
                ..trained.clone()
            };
            let after = evaluate(&trained, &val).unwrap().validation_loss;
            let before = evaluate(&untrained, &val).unwrap().validation_loss;
            if after < before {
                wins += 1;
            }
        }
        assert!(wins >= 19, "only {wins}/20 seeds improved");
    }

    fn synth_series_tail() -> TimeSeries {
        crate::series::synth_series_from(SynthKind::Linear, 90, 30, 0)
    }
}
