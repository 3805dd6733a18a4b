//! Feed-forward covariance denoiser.
//!
//! The network maps a vectorized N x N covariance matrix through fully
//! connected layers (GELU and layer normalization alternating on hidden
//! layers, plain affine output), reshapes and symmetrizes the result, blends
//! it with the input through a residual weight, and floors the eigenvalues
//! so the output is always a valid covariance matrix:
//!
//! ```text
//! out = psd_floor( alpha * S + (1 - alpha) * sym(reshape(net(vec(S)))) )
//! ```
//!
//! By default inputs are rescaled to correlation form before the network and
//! the original variances are restored afterwards, so only the dependence
//! structure is denoised.

mod activation;
mod train;

pub use activation::{
    gelu, gelu_derivative, layer_norm_forward, normal_cdf, LayerNormCache, VARIANCE_GUARD,
};
pub use train::{
    cov_windows, loss, loss_gradients, train, CovWindowSet, EpochStats, TrainConfig, TrainReport,
    TrainedDenoiser,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fevd::CovMatrix;

/// How inputs are scaled before entering the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    /// Rescale to a correlation matrix, denoise, restore the variances.
    #[default]
    Correlation,
    /// Feed the covariance through unchanged.
    Raw,
}

/// Nonlinearity attached to a layer's affine map.
#[derive(Debug, Clone)]
pub enum LayerKind {
    Gelu,
    LayerNorm {
        gain: DVector<f64>,
        shift: DVector<f64>,
    },
    Linear,
}

/// One fully connected layer.
#[derive(Debug, Clone)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub kind: LayerKind,
}

/// Architecture and structural hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenoiserConfig {
    /// Hidden layer widths between the two N^2 ends.
    pub hidden_dims: Vec<usize>,
    /// Residual blend weight alpha in (0, 1]; 1 passes the input through.
    pub residual_weight: f64,
    /// Eigenvalue floor epsilon.
    pub eig_floor: f64,
    pub standardization: Standardization,
}

impl DenoiserConfig {
    /// Bottleneck defaults for `n_assets` variables: one hidden layer of
    /// width 4N, alpha 0.5, floor 1e-6, correlation scaling.
    pub fn default_for(n_assets: usize) -> Self {
        DenoiserConfig {
            hidden_dims: vec![4 * n_assets],
            residual_weight: 0.5,
            eig_floor: 1e-6,
            standardization: Standardization::Correlation,
        }
    }
}

/// Trained (or freshly initialized) denoiser.
#[derive(Debug, Clone)]
pub struct DenoiserModel {
    n_assets: usize,
    layer_dims: Vec<usize>,
    layers: Vec<Layer>,
    residual_weight: f64,
    eig_floor: f64,
    standardization: Standardization,
    /// Training configuration recorded for replayability.
    training: Option<TrainConfig>,
}

impl DenoiserModel {
    /// Initialize with seeded uniform weights in
    /// `+-sqrt(6 / (fan_in + fan_out))`, zero biases, unit gains.
    pub fn init(n_assets: usize, config: &DenoiserConfig, seed: u64) -> Result<Self> {
        if n_assets == 0 {
            return Err(Error::InvalidConfig("n_assets must be positive".into()));
        }
        if !(config.residual_weight > 0.0 && config.residual_weight <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "residual weight must lie in (0, 1], got {}",
                config.residual_weight
            )));
        }
        if !(config.eig_floor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eigenvalue floor must be positive, got {}",
                config.eig_floor
            )));
        }
        if config.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        let io = n_assets * n_assets;
        let mut layer_dims = Vec::with_capacity(config.hidden_dims.len() + 2);
        layer_dims.push(io);
        layer_dims.extend_from_slice(&config.hidden_dims);
        layer_dims.push(io);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_layers = layer_dims.len() - 1;
        let layers = (0..n_layers)
            .map(|l| {
                let (d_in, d_out) = (layer_dims[l], layer_dims[l + 1]);
                let bound = (6.0 / (d_in + d_out) as f64).sqrt();
                let weight =
                    DMatrix::from_fn(d_out, d_in, |_, _| rng.random_range(-bound..bound));
                let kind = if l == n_layers - 1 {
                    LayerKind::Linear
                } else if l % 2 == 0 {
                    LayerKind::Gelu
                } else {
                    LayerKind::LayerNorm {
                        gain: DVector::from_element(d_out, 1.0),
                        shift: DVector::zeros(d_out),
                    }
                };
                Layer {
                    weight,
                    bias: DVector::zeros(d_out),
                    kind,
                }
            })
            .collect();

        Ok(DenoiserModel {
            n_assets,
            layer_dims,
            layers,
            residual_weight: config.residual_weight,
            eig_floor: config.eig_floor,
            standardization: config.standardization,
            training: None,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn residual_weight(&self) -> f64 {
        self.residual_weight
    }

    pub fn eig_floor(&self) -> f64 {
        self.eig_floor
    }

    pub fn standardization(&self) -> Standardization {
        self.standardization
    }

    pub fn training_config(&self) -> Option<&TrainConfig> {
        self.training.as_ref()
    }

    pub(crate) fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn set_training(&mut self, cfg: TrainConfig) {
        self.training = Some(cfg);
    }

    /// Run the raw network on a vectorized input, keeping per-layer state.
    pub(crate) fn network_pass(&self, input: &DVector<f64>) -> Result<NetworkTrace> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut norm_caches = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = &layer.weight * &current + &layer.bias;
            let (a, cache) = match &layer.kind {
                LayerKind::Gelu => (z.map(gelu), None),
                LayerKind::LayerNorm { gain, shift } => {
                    let (a, c) = layer_norm_forward(&z, gain, shift);
                    (a, Some(c))
                }
                LayerKind::Linear => (z.clone(), None),
            };
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation { layer: l });
            }
            pre.push(z);
            post.push(a.clone());
            norm_caches.push(cache);
            current = a;
        }
        Ok(NetworkTrace {
            input: input.clone(),
            pre,
            post,
            norm_caches,
        })
    }

    /// Differentiable part of the map: network, reshape, symmetrize, blend.
    /// No eigenvalue floor is applied here.
    pub fn forward_blend(&self, input: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(input)?;
        let trace = self.network_pass(&vectorize(input))?;
        Ok(self.blend(input, trace.output()))
    }

    pub(crate) fn blend(&self, input: &DMatrix<f64>, net_out: &DVector<f64>) -> DMatrix<f64> {
        let m = devectorize(net_out).expect("network output has square length");
        let sym = symmetrize(&m);
        input * self.residual_weight + sym * (1.0 - self.residual_weight)
    }

    /// Full forward map including the eigenvalue floor.
    pub fn forward(&self, input: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let blended = self.forward_blend(input)?;
        psd_project(&blended, self.eig_floor)
    }

    /// Denoise a covariance matrix, applying and inverting the configured
    /// input scaling. In correlation mode the input variances are preserved
    /// exactly.
    pub fn denoise(&self, sigma: &CovMatrix) -> Result<CovMatrix> {
        if sigma.dim() != self.n_assets {
            return Err(Error::ModelSizeMismatch {
                model: self.n_assets,
                input: sigma.dim(),
            });
        }
        let s = sigma.matrix();
        let out = match self.standardization {
            Standardization::Raw => self.forward(s)?,
            Standardization::Correlation => {
                let n = self.n_assets;
                let inv_sd = DVector::from_fn(n, |i, _| 1.0 / s[(i, i)].sqrt());
                let corr = DMatrix::from_fn(n, n, |i, j| s[(i, j)] * inv_sd[i] * inv_sd[j]);
                let denoised = self.forward(&corr)?;
                // Restore a unit diagonal (the floor can perturb it), then
                // scale back by the original standard deviations.
                let inv_diag = DVector::from_fn(n, |i, _| 1.0 / denoised[(i, i)].sqrt());
                DMatrix::from_fn(n, n, |i, j| {
                    let unit = denoised[(i, j)] * inv_diag[i] * inv_diag[j];
                    unit * (s[(i, i)] * s[(j, j)]).sqrt()
                })
            }
        };
        CovMatrix::new(symmetrize(&out), sigma.labels().to_vec())
    }

    fn check_input(&self, input: &DMatrix<f64>) -> Result<()> {
        if input.nrows() != self.n_assets || input.ncols() != self.n_assets {
            return Err(Error::ModelSizeMismatch {
                model: self.n_assets,
                input: input.nrows(),
            });
        }
        Ok(())
    }

    /// Flat parameter vector: per layer, weights row-major, bias, then gain
    /// and shift for normalized layers.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for r in 0..layer.weight.nrows() {
                for c in 0..layer.weight.ncols() {
                    out.push(layer.weight[(r, c)]);
                }
            }
            out.extend(layer.bias.iter());
            if let LayerKind::LayerNorm { gain, shift } = &layer.kind {
                out.extend(gain.iter());
                out.extend(shift.iter());
            }
        }
        out
    }

    /// Set every parameter from a flat vector laid out as in
    /// [`params_flat`].
    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.params_flat().len();
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for r in 0..layer.weight.nrows() {
                for c in 0..layer.weight.ncols() {
                    layer.weight[(r, c)] = it.next().unwrap();
                }
            }
            for i in 0..layer.bias.len() {
                layer.bias[i] = it.next().unwrap();
            }
            if let LayerKind::LayerNorm { gain, shift } = &mut layer.kind {
                for i in 0..gain.len() {
                    gain[i] = it.next().unwrap();
                }
                for i in 0..shift.len() {
                    shift[i] = it.next().unwrap();
                }
            }
        }
        Ok(())
    }

    /// Serialize to a self-contained JSON document.
    pub fn to_json_string(&self) -> String {
        let persisted = PersistedModel {
            n_assets: self.n_assets,
            layer_dims: self.layer_dims.clone(),
            residual_weight: self.residual_weight,
            eig_floor: self.eig_floor,
            standardization: self.standardization,
            layers: self
                .layers
                .iter()
                .map(|layer| PersistedLayer {
                    kind: match &layer.kind {
                        LayerKind::Gelu => "gelu".into(),
                        LayerKind::LayerNorm { .. } => "layer_norm".into(),
                        LayerKind::Linear => "linear".into(),
                    },
                    rows: layer.weight.nrows(),
                    cols: layer.weight.ncols(),
                    weight: row_major(&layer.weight),
                    bias: layer.bias.iter().copied().collect(),
                    gain: match &layer.kind {
                        LayerKind::LayerNorm { gain, .. } => {
                            Some(gain.iter().copied().collect())
                        }
                        _ => None,
                    },
                    shift: match &layer.kind {
                        LayerKind::LayerNorm { shift, .. } => {
                            Some(shift.iter().copied().collect())
                        }
                        _ => None,
                    },
                })
                .collect(),
            training: self.training.clone(),
        };
        serde_json::to_string_pretty(&persisted).expect("model serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let persisted: PersistedModel =
            serde_json::from_str(text).map_err(|e| Error::Persistence(e.to_string()))?;
        persisted.into_model()
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Per-layer state from a forward pass, consumed by backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct NetworkTrace {
    pub input: DVector<f64>,
    pub pre: Vec<DVector<f64>>,
    pub post: Vec<DVector<f64>>,
    pub norm_caches: Vec<Option<LayerNormCache>>,
}

impl NetworkTrace {
    pub fn output(&self) -> &DVector<f64> {
        self.post.last().expect("network has at least one layer")
    }
}

/// Row-major flattening of a square matrix.
pub fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    DVector::from_fn(rows * cols, |k, _| m[(k / cols, k % cols)])
}

/// Inverse of [`vectorize`]; fails when the length is not a perfect square.
pub fn devectorize(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let len = v.len();
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len {
        return Err(Error::NotPerfectSquare(len));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| v[i * n + j]))
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Project a (nearly) symmetric matrix onto the cone of matrices with
/// eigenvalues at least `eps`: symmetrize, eigendecompose, clip, rebuild.
pub fn psd_project(m: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("matrix for eigenvalue projection"));
    }
    let sym = symmetrize(m);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|l| l.max(eps));
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok(symmetrize(&rebuilt))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct PersistedLayer {
    kind: String,
    rows: usize,
    cols: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shift: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PersistedModel {
    n_assets: usize,
    layer_dims: Vec<usize>,
    residual_weight: f64,
    eig_floor: f64,
    standardization: Standardization,
    layers: Vec<PersistedLayer>,
    training: Option<TrainConfig>,
}

impl PersistedModel {
    fn into_model(self) -> Result<DenoiserModel> {
        let io = self.n_assets * self.n_assets;
        if self.layer_dims.first() != Some(&io) || self.layer_dims.last() != Some(&io) {
            return Err(Error::Persistence(
                "layer dims must start and end at n_assets^2".into(),
            ));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for persisted in self.layers {
            if persisted.weight.len() != persisted.rows * persisted.cols {
                return Err(Error::Persistence("weight length mismatch".into()));
            }
            let weight =
                DMatrix::from_row_slice(persisted.rows, persisted.cols, &persisted.weight);
            let bias = DVector::from_vec(persisted.bias);
            let kind = match persisted.kind.as_str() {
                "gelu" => LayerKind::Gelu,
                "linear" => LayerKind::Linear,
                "layer_norm" => {
                    let gain = persisted
                        .gain
                        .ok_or_else(|| Error::Persistence("missing gain".into()))?;
                    let shift = persisted
                        .shift
                        .ok_or_else(|| Error::Persistence("missing shift".into()))?;
                    LayerKind::LayerNorm {
                        gain: DVector::from_vec(gain),
                        shift: DVector::from_vec(shift),
                    }
                }
                other => {
                    return Err(Error::Persistence(format!("unknown layer kind {other}")));
                }
            };
            layers.push(Layer { weight, bias, kind });
        }
        Ok(DenoiserModel {
            n_assets: self.n_assets,
            layer_dims: self.layer_dims,
            layers,
            residual_weight: self.residual_weight,
            eig_floor: self.eig_floor,
            standardization: self.standardization,
            training: self.training,
        })
    }
}
