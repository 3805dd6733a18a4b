//! GELU and layer normalization with their exact derivatives.

use nalgebra::DVector;

/// Guard added to the per-vector variance before the square root. Small
/// enough that normalized outputs keep unit variance to well below 1e-10,
/// large enough to avoid dividing by zero on constant vectors.
pub const VARIANCE_GUARD: f64 = 1e-20;

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * INV_SQRT_2))
}

/// Exact GELU, `x * cdf(x)`, without the tanh approximation.
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// Derivative of GELU: `cdf(x) + x * pdf(x)`.
pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Per-vector normalization state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    /// Normalized vector before gain and shift.
    pub normalized: DVector<f64>,
    /// 1 / sqrt(variance + guard).
    pub inv_std: f64,
}

/// Normalize `z` to zero mean and unit variance (population variance), then
/// apply the learned gain and shift.
pub fn layer_norm_forward(
    z: &DVector<f64>,
    gain: &DVector<f64>,
    shift: &DVector<f64>,
) -> (DVector<f64>, LayerNormCache) {
    let d = z.len() as f64;
    let mean = z.sum() / d;
    let variance = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    let inv_std = 1.0 / (variance + VARIANCE_GUARD).sqrt();
    let normalized = z.map(|v| (v - mean) * inv_std);
    let out = DVector::from_fn(z.len(), |i, _| gain[i] * normalized[i] + shift[i]);
    (out, LayerNormCache { normalized, inv_std })
}

/// Backward pass of layer normalization.
///
/// Returns `(d_input, d_gain, d_shift)` for upstream gradient `d_out`.
pub fn layer_norm_backward(
    d_out: &DVector<f64>,
    gain: &DVector<f64>,
    cache: &LayerNormCache,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let d = d_out.len() as f64;
    let n = &cache.normalized;
    let d_gain = DVector::from_fn(d_out.len(), |i, _| d_out[i] * n[i]);
    let d_shift = d_out.clone();
    // t = dL/dn
    let t = DVector::from_fn(d_out.len(), |i, _| d_out[i] * gain[i]);
    let t_mean = t.sum() / d;
    let tn_mean = t.iter().zip(n.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
    let d_input =
        DVector::from_fn(d_out.len(), |i, _| (t[i] - t_mean - n[i] * tn_mean) * cache.inv_std);
    (d_input, d_gain, d_shift)
}
