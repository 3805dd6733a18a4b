//! Training: mini-batch gradient descent with momentum, reverse-mode
//! gradients through the network, symmetrization and residual blend. The
//! eigenvalue floor stays outside the differentiated path and is applied at
//! inference only.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{gelu_derivative, layer_norm_backward};
use super::{devectorize, symmetrize, vectorize, DenoiserModel, LayerKind, NetworkTrace};
use crate::error::{Error, Result};
use crate::ingest::Panel;

/// Optimizer and loss settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the full reconstruction penalty.
    pub lambda1: f64,
    /// Weight of the off-diagonal reconstruction penalty.
    pub lambda2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Epochs without holdout improvement before stopping.
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 1.0,
            lambda2: 1.0,
            batch_size: 32,
            epochs: 200,
            learning_rate: 1e-3,
            momentum: 0.9,
            seed: 42,
            early_stop_patience: 20,
        }
    }
}

/// Rolling-window covariance matrices used as the training corpus.
#[derive(Debug, Clone)]
pub struct CovWindowSet {
    pub matrices: Vec<DMatrix<f64>>,
    pub n_assets: usize,
    pub window_length: usize,
    pub source_id: String,
}

impl CovWindowSet {
    pub fn from_matrices(
        matrices: Vec<DMatrix<f64>>,
        window_length: usize,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InsufficientWindows {
                required: 1,
                actual: 0,
            });
        };
        let n = first.nrows();
        for m in &matrices {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: m.nrows(),
                });
            }
            let asym = (m - m.transpose()).abs().max();
            if asym > 1e-8 * m.abs().max().max(1.0) {
                return Err(Error::Asymmetric(asym));
            }
        }
        Ok(CovWindowSet {
            matrices,
            n_assets: n,
            window_length,
            source_id: source_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

/// Covariance matrices of within-window standardized observations over a
/// sliding window: each member is the window's correlation matrix with a
/// unit diagonal.
pub fn cov_windows(panel: &Panel, window: usize, step: usize) -> Result<CovWindowSet> {
    if window < 2 {
        return Err(Error::WindowTooShort(window));
    }
    if step == 0 {
        return Err(Error::InvalidConfig("step must be at least 1".into()));
    }
    let values = panel.values();
    let (rows, n) = (values.nrows(), values.ncols());
    if rows < window {
        return Err(Error::WindowTooLong { window, rows });
    }
    if !panel.is_dense() {
        return Err(Error::NotAligned);
    }
    let count = (rows - window) / step + 1;
    let mut matrices = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * step;
        let block = values.rows(start, window);
        let mut z = DMatrix::zeros(window, n);
        for c in 0..n {
            let col = block.column(c);
            let mean = col.sum() / window as f64;
            let var =
                col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (window as f64 - 1.0);
            if var <= 0.0 {
                return Err(Error::DegeneratePanel(format!(
                    "column {} is constant in window {w}",
                    panel.assets()[c]
                )));
            }
            let inv_sd = 1.0 / var.sqrt();
            for r in 0..window {
                z[(r, c)] = (block[(r, c)] - mean) * inv_sd;
            }
        }
        let cov = z.transpose() * &z / (window as f64 - 1.0);
        matrices.push(symmetrize(&cov));
    }
    CovWindowSet::from_matrices(matrices, window, "panel")
}

/// Mean structure-preserving loss over a batch:
/// `lambda1 ||D(S) - S||_F^2 + lambda2 ||offdiag(D(S) - S)||_F^2`,
/// where `D` is the blend without the eigenvalue floor.
pub fn loss(
    model: &DenoiserModel,
    batch: &[DMatrix<f64>],
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InsufficientWindows {
            required: 1,
            actual: 0,
        });
    }
    let mut total = 0.0;
    for s in batch {
        let blended = model.forward_blend(s)?;
        total += sample_loss(&blended, s, lambda1, lambda2);
    }
    Ok(total / batch.len() as f64)
}

fn sample_loss(blended: &DMatrix<f64>, target: &DMatrix<f64>, l1: f64, l2: f64) -> f64 {
    let n = target.nrows();
    let mut full = 0.0;
    let mut off = 0.0;
    for i in 0..n {
        for j in 0..n {
            let r = blended[(i, j)] - target[(i, j)];
            full += r * r;
            if i != j {
                off += r * r;
            }
        }
    }
    l1 * full + l2 * off
}

/// Per-layer parameter gradients, shaped like the model parameters.
pub(crate) struct Grads {
    layers: Vec<LayerGrads>,
}

struct LayerGrads {
    weight: DMatrix<f64>,
    bias: DVector<f64>,
    gain: Option<DVector<f64>>,
    shift: Option<DVector<f64>>,
}

impl Grads {
    fn zeros_like(model: &DenoiserModel) -> Self {
        Grads {
            layers: model
                .layers()
                .iter()
                .map(|layer| LayerGrads {
                    weight: DMatrix::zeros(layer.weight.nrows(), layer.weight.ncols()),
                    bias: DVector::zeros(layer.bias.len()),
                    gain: match &layer.kind {
                        LayerKind::LayerNorm { gain, .. } => Some(DVector::zeros(gain.len())),
                        _ => None,
                    },
                    shift: match &layer.kind {
                        LayerKind::LayerNorm { shift, .. } => Some(DVector::zeros(shift.len())),
                        _ => None,
                    },
                })
                .collect(),
        }
    }

    fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weight *= factor;
            g.bias *= factor;
            if let Some(gain) = &mut g.gain {
                *gain *= factor;
            }
            if let Some(shift) = &mut g.shift {
                *shift *= factor;
            }
        }
    }

    /// Flat layout matching [`DenoiserModel::params_flat`].
    pub(crate) fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            for r in 0..g.weight.nrows() {
                for c in 0..g.weight.ncols() {
                    out.push(g.weight[(r, c)]);
                }
            }
            out.extend(g.bias.iter());
            if let Some(gain) = &g.gain {
                out.extend(gain.iter());
            }
            if let Some(shift) = &g.shift {
                out.extend(shift.iter());
            }
        }
        out
    }
}

/// Mean loss and its gradient with respect to every parameter, flattened in
/// the [`DenoiserModel::params_flat`] layout. The reverse-mode counterpart
/// of [`loss`], exposed for gradient verification.
pub fn loss_gradients(
    model: &DenoiserModel,
    batch: &[DMatrix<f64>],
    lambda1: f64,
    lambda2: f64,
) -> Result<(f64, Vec<f64>)> {
    let (value, grads) = loss_and_grads(model, batch, lambda1, lambda2)?;
    Ok((value, grads.flat()))
}

/// Mean loss and parameter gradients over a batch.
pub(crate) fn loss_and_grads(
    model: &DenoiserModel,
    batch: &[DMatrix<f64>],
    lambda1: f64,
    lambda2: f64,
) -> Result<(f64, Grads)> {
    let mut grads = Grads::zeros_like(model);
    let mut total = 0.0;
    for s in batch {
        total += backward_sample(model, s, lambda1, lambda2, &mut grads)?;
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((total * inv, grads))
}

fn backward_sample(
    model: &DenoiserModel,
    s: &DMatrix<f64>,
    lambda1: f64,
    lambda2: f64,
    grads: &mut Grads,
) -> Result<f64> {
    let input = vectorize(s);
    let trace: NetworkTrace = model.network_pass(&input)?;
    let net_matrix = devectorize(trace.output())?;
    let sym = symmetrize(&net_matrix);
    let alpha = model.residual_weight();
    let blended = s * alpha + &sym * (1.0 - alpha);
    let loss_value = sample_loss(&blended, s, lambda1, lambda2);

    // dLoss/dBlended, with the off-diagonal penalty doubled off the diagonal.
    let n = s.nrows();
    let d_blend = DMatrix::from_fn(n, n, |i, j| {
        let r = blended[(i, j)] - s[(i, j)];
        if i == j {
            2.0 * lambda1 * r
        } else {
            2.0 * (lambda1 + lambda2) * r
        }
    });
    // Through the blend and the symmetrization. d_blend is symmetric, so the
    // symmetrization passes it through unchanged.
    let d_net = vectorize(&(&d_blend * (1.0 - alpha)));

    let mut delta = d_net;
    for l in (0..model.layers().len()).rev() {
        let layer = &model.layers()[l];
        let dz = match &layer.kind {
            LayerKind::Linear => delta,
            LayerKind::Gelu => {
                let z = &trace.pre[l];
                DVector::from_fn(delta.len(), |i, _| delta[i] * gelu_derivative(z[i]))
            }
            LayerKind::LayerNorm { gain, .. } => {
                let cache = trace.norm_caches[l]
                    .as_ref()
                    .expect("norm cache recorded in forward pass");
                let (dz, d_gain, d_shift) = layer_norm_backward(&delta, gain, cache);
                let slot = &mut grads.layers[l];
                *slot.gain.as_mut().expect("layer has gain grads") += d_gain;
                *slot.shift.as_mut().expect("layer has shift grads") += d_shift;
                dz
            }
        };
        let a_prev = if l == 0 { &trace.input } else { &trace.post[l - 1] };
        grads.layers[l].weight += &dz * a_prev.transpose();
        grads.layers[l].bias += &dz;
        delta = layer.weight.transpose() * dz;
    }
    Ok(loss_value)
}

/// Per-epoch losses logged during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub holdout_loss: f64,
}

/// Training curve and the selected epoch.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_holdout_loss: f64,
}

impl TrainReport {
    /// CSV rendering of the training curve.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,holdout_loss\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.holdout_loss));
        }
        out
    }
}

/// Model plus its training curve.
#[derive(Debug, Clone)]
pub struct TrainedDenoiser {
    pub model: DenoiserModel,
    pub report: TrainReport,
}

/// Train with mini-batch momentum descent and early stopping on a 20%
/// holdout split. Returns the parameters of the best holdout epoch.
/// Deterministic for a fixed seed and configuration.
pub fn train(
    model: DenoiserModel,
    windows: &CovWindowSet,
    cfg: &TrainConfig,
) -> Result<TrainedDenoiser> {
    validate_train_config(cfg)?;
    if windows.n_assets != model.n_assets() {
        return Err(Error::ModelSizeMismatch {
            model: model.n_assets(),
            input: windows.n_assets,
        });
    }
    let required = 2 * cfg.batch_size;
    if windows.len() < required {
        return Err(Error::InsufficientWindows {
            required,
            actual: windows.len(),
        });
    }

    let mut model = model;
    model.set_training(cfg.clone());
    if cfg.epochs == 0 {
        return Ok(TrainedDenoiser {
            model,
            report: TrainReport {
                epochs: vec![],
                best_epoch: 0,
                best_holdout_loss: f64::NAN,
            },
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..windows.len()).collect();
    indices.shuffle(&mut rng);
    let holdout_len = (windows.len() / 5).max(1);
    let (holdout_idx, train_idx) = indices.split_at(holdout_len);
    let holdout: Vec<DMatrix<f64>> = holdout_idx
        .iter()
        .map(|&i| windows.matrices[i].clone())
        .collect();
    let mut train_order: Vec<usize> = train_idx.to_vec();

    let mut velocity: Vec<f64> = vec![0.0; model.params_flat().len()];
    let mut best_params = model.params_flat();
    let mut best_holdout = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        train_order.shuffle(&mut rng);
        for chunk in train_order.chunks(cfg.batch_size) {
            let batch: Vec<DMatrix<f64>> = chunk
                .iter()
                .map(|&i| windows.matrices[i].clone())
                .collect();
            let (batch_loss, grads) = loss_and_grads(&model, &batch, cfg.lambda1, cfg.lambda2)?;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    loss: batch_loss,
                });
            }
            let flat = grads.flat();
            let mut params = model.params_flat();
            for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(flat.iter()) {
                *v = cfg.momentum * *v + g;
                *p -= cfg.learning_rate * *v;
            }
            model.set_params_flat(&params)?;
        }

        let train_batch: Vec<DMatrix<f64>> = train_order
            .iter()
            .map(|&i| windows.matrices[i].clone())
            .collect();
        let train_loss = loss(&model, &train_batch, cfg.lambda1, cfg.lambda2)?;
        let holdout_loss = loss(&model, &holdout, cfg.lambda1, cfg.lambda2)?;
        if !train_loss.is_finite() || !holdout_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                loss: train_loss,
            });
        }
        curve.push(EpochStats {
            epoch,
            train_loss,
            holdout_loss,
        });

        if holdout_loss < best_holdout {
            best_holdout = holdout_loss;
            best_epoch = epoch;
            best_params = model.params_flat();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                break;
            }
        }
    }

    model.set_params_flat(&best_params)?;
    Ok(TrainedDenoiser {
        model,
        report: TrainReport {
            epochs: curve,
            best_epoch,
            best_holdout_loss: best_holdout,
        },
    })
}

fn validate_train_config(cfg: &TrainConfig) -> Result<()> {
    if !(cfg.lambda1 > 0.0 && cfg.lambda2 > 0.0) {
        return Err(Error::InvalidConfig("loss weights must be positive".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidConfig("learning rate must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
    }
    if cfg.early_stop_patience == 0 {
        return Err(Error::InvalidConfig("patience must be at least 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::DenoiserConfig;
    use crate::synthetic::gaussian_panel;
    use rand::Rng;

    fn random_symmetric(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| (rng.random::<f64>() - 0.5) * scale);
        symmetrize(&m)
    }

    fn randomized_model(n: usize, hidden: Vec<usize>, alpha: f64, seed: u64) -> DenoiserModel {
        let cfg = DenoiserConfig {
            hidden_dims: hidden,
            residual_weight: alpha,
            ..DenoiserConfig::default_for(n)
        };
        let mut model = DenoiserModel::init(n, &cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let params: Vec<f64> = model
            .params_flat()
            .iter()
            .map(|_| (rng.random::<f64>() - 0.5) * 0.8)
            .collect();
        model.set_params_flat(&params).unwrap();
        model
    }

    #[test]
    fn loss_is_zero_in_pass_through_mode() {
        let model = randomized_model(3, vec![6], 1.0, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch: Vec<DMatrix<f64>> =
            (0..4).map(|_| random_symmetric(3, 1.0, &mut rng)).collect();
        let value = loss(&model, &batch, 1.0, 1.0).unwrap();
        assert!(value.abs() < 1e-28);
    }

    #[test]
    fn loss_matches_direct_expansion_for_known_error() {
        // Zero network plus biased output layer: the blend differs from the
        // target by a controlled symmetric error matrix.
        let n = 3;
        let cfg = DenoiserConfig {
            hidden_dims: vec![4],
            residual_weight: 0.5,
            ..DenoiserConfig::default_for(n)
        };
        let mut model = DenoiserModel::init(n, &cfg, 3).unwrap();
        let zeros = vec![0.0; model.params_flat().len()];
        model.set_params_flat(&zeros).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_symmetric(n, 1.0, &mut rng);
        let error = random_symmetric(n, 0.4, &mut rng);
        // With alpha = 0.5 and net output s + 2 e, the blend is s + e.
        let target_net = &s + &error * 2.0;
        let mut params = vec![0.0; model.params_flat().len()];
        let flat_bias = vectorize(&target_net);
        let tail = params.len() - flat_bias.len();
        params[tail..].copy_from_slice(flat_bias.as_slice());
        model.set_params_flat(&params).unwrap();

        let (l1, l2) = (0.7, 1.3);
        let got = loss(&model, &[s.clone()], l1, l2).unwrap();
        let full: f64 = error.iter().map(|v| v * v).sum();
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .map(|(i, j)| error[(i, j)] * error[(i, j)])
            .sum();
        assert!((got - (l1 * full + l2 * off)).abs() < 1e-12);
    }

    #[test]
    fn diagonal_only_error_skips_the_off_penalty() {
        let n = 3;
        let cfg = DenoiserConfig {
            hidden_dims: vec![4],
            residual_weight: 0.5,
            ..DenoiserConfig::default_for(n)
        };
        let mut model = DenoiserModel::init(n, &cfg, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_symmetric(n, 1.0, &mut rng);
        let error = DMatrix::from_fn(n, n, |i, j| if i == j { 0.3 + i as f64 * 0.1 } else { 0.0 });
        let target_net = &s + &error * 2.0;
        let mut params = vec![0.0; model.params_flat().len()];
        let flat_bias = vectorize(&target_net);
        let tail = params.len() - flat_bias.len();
        params[tail..].copy_from_slice(flat_bias.as_slice());
        model.set_params_flat(&params).unwrap();

        let got = loss(&model, &[s], 1.0, 10.0).unwrap();
        let full: f64 = error.iter().map(|v| v * v).sum();
        assert!((got - full).abs() < 1e-12);
    }

    fn check_gradients(model: &DenoiserModel, batch: &[DMatrix<f64>]) {
        let (l1, l2) = (1.0, 1.0);
        let (_, grads) = loss_and_grads(model, batch, l1, l2).unwrap();
        let analytic = grads.flat();
        let base = model.params_flat();
        let step = 1e-5;
        let mut probe = model.clone();
        for k in 0..base.len() {
            let mut plus = base.clone();
            plus[k] += step;
            probe.set_params_flat(&plus).unwrap();
            let up = loss(&probe, batch, l1, l2).unwrap();
            let mut minus = base.clone();
            minus[k] -= step;
            probe.set_params_flat(&minus).unwrap();
            let down = loss(&probe, batch, l1, l2).unwrap();
            let numeric = (up - down) / (2.0 * step);
            let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic[k] - numeric).abs() / denom;
            assert!(
                rel < 1e-4,
                "parameter {k}: analytic {} vs numeric {numeric}",
                analytic[k]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences_single_hidden_layer() {
        let model = randomized_model(3, vec![6], 0.5, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let batch: Vec<DMatrix<f64>> =
            (0..3).map(|_| random_symmetric(3, 1.0, &mut rng)).collect();
        check_gradients(&model, &batch);
    }

    #[test]
    fn gradients_match_finite_differences_with_layer_norm() {
        let model = randomized_model(3, vec![8, 6], 0.5, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let batch: Vec<DMatrix<f64>> =
            (0..2).map(|_| random_symmetric(3, 1.0, &mut rng)).collect();
        check_gradients(&model, &batch);
    }

    #[test]
    fn zero_epochs_returns_the_initial_model() {
        let cfg = DenoiserConfig::default_for(3);
        let model = DenoiserModel::init(3, &cfg, 21).unwrap();
        let before = model.params_flat();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let windows = CovWindowSet::from_matrices(
            (0..16)
                .map(|_| {
                    let base = random_symmetric(3, 0.3, &mut rng);
                    &base * &base.transpose() + DMatrix::identity(3, 3)
                })
                .collect(),
            10,
            "test",
        )
        .unwrap();
        let tc = TrainConfig {
            epochs: 0,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let out = train(model, &windows, &tc).unwrap();
        assert_eq!(out.model.params_flat(), before);
        assert!(out.report.epochs.is_empty());
    }

    #[test]
    fn identical_windows_keep_holdout_from_rising_to_best() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = random_symmetric(n, 0.3, &mut rng);
        let fixed = &base * base.transpose() + DMatrix::identity(n, n);
        let windows =
            CovWindowSet::from_matrices(vec![fixed; 24], 10, "constant").unwrap();
        let cfg = DenoiserConfig::default_for(n);
        let model = DenoiserModel::init(n, &cfg, 7).unwrap();
        let tc = TrainConfig {
            epochs: 30,
            batch_size: 8,
            learning_rate: 1e-2,
            early_stop_patience: 30,
            ..TrainConfig::default()
        };
        let out = train(model, &windows, &tc).unwrap();
        let first = out.report.epochs.first().unwrap().holdout_loss;
        assert!(out.report.best_holdout_loss <= first);
        assert!(out.report.best_epoch >= 1);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let panel = gaussian_panel(&(DMatrix::identity(3, 3) * 0.5), 400, 17, "A");
        let windows = cov_windows(&panel, 60, 5).unwrap();
        let cfg = DenoiserConfig::default_for(3);
        let tc = TrainConfig {
            epochs: 12,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let run = |seed: u64| {
            let model = DenoiserModel::init(3, &cfg, seed).unwrap();
            train(model, &windows, &tc).unwrap()
        };
        let a = run(9);
        let b = run(9);
        let bits = |m: &DenoiserModel| -> Vec<u64> {
            m.params_flat().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a.model), bits(&b.model));
        assert_eq!(a.report.epochs.len(), b.report.epochs.len());
        for (x, y) in a.report.epochs.iter().zip(b.report.epochs.iter()) {
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
            assert_eq!(x.holdout_loss.to_bits(), y.holdout_loss.to_bits());
        }
    }

    #[test]
    fn too_few_windows_is_an_error() {
        let cfg = DenoiserConfig::default_for(2);
        let model = DenoiserModel::init(2, &cfg, 1).unwrap();
        let windows =
            CovWindowSet::from_matrices(vec![DMatrix::identity(2, 2); 10], 5, "t").unwrap();
        let tc = TrainConfig {
            batch_size: 8,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(model, &windows, &tc),
            Err(Error::InsufficientWindows {
                required: 16,
                actual: 10
            })
        ));
    }

    #[test]
    fn cov_windows_are_unit_diagonal_correlations() {
        let sigma = nalgebra::dmatrix![1.0, 0.4; 0.4, 2.0];
        let panel = gaussian_panel(&sigma, 300, 23, "A");
        let windows = cov_windows(&panel, 50, 10).unwrap();
        assert_eq!(windows.len(), (300 - 50) / 10 + 1);
        for m in &windows.matrices {
            assert!((m[(0, 0)] - 1.0).abs() < 1e-12);
            assert!((m[(1, 1)] - 1.0).abs() < 1e-12);
            assert!(m[(0, 1)].abs() <= 1.0);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
        }
    }
}
