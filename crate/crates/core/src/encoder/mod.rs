//! Fixed-architecture GCN and MLP encoders.
//!
//! Layer `l < L` computes `Z = ReLU(Norm(P · Z_prev · W + b))`; the last
//! layer omits normalization and activation and yields the logits. `P` is
//! the self-looped symmetric normalized adjacency for a GCN and the identity
//! for an MLP. `Norm` standardizes each column over all nodes of the graph,
//! followed by a learned scale and shift.

mod checkpoint;
mod forward;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::Graph;
use crate::numerics::{DenseMatrix, SparseMatrix};
use crate::seed;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TensorLayout};
pub use forward::{backward, backward_with_stats, forward, Backward, ForwardCache, NormMode};

/// Variance floor inside the feature standardization.
pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gcn,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub layers: usize,
    pub hidden: usize,
    pub out_classes: usize,
    pub use_feature_norm: bool,
    pub use_bias: bool,
    #[serde(default)]
    pub activation: Activation,
}

impl EncoderConfig {
    /// Two GCN layers, 64 hidden units, feature normalization and biases.
    pub fn gcn(out_classes: usize) -> Self {
        Self {
            kind: EncoderKind::Gcn,
            layers: 2,
            hidden: 64,
            out_classes,
            use_feature_norm: true,
            use_bias: true,
            activation: Activation::Relu,
        }
    }

    /// Two fully connected layers, 64 hidden units.
    pub fn mlp(out_classes: usize) -> Self {
        Self {
            kind: EncoderKind::Mlp,
            use_feature_norm: false,
            ..Self::gcn(out_classes)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 {
            return Err(Error::config("encoder needs at least one layer"));
        }
        if self.hidden < 1 {
            return Err(Error::config("hidden size must be at least 1"));
        }
        if self.out_classes < 2 {
            return Err(Error::config("encoder needs at least two output classes"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer.
    pub fn layer_dims(&self, in_dim: usize) -> Vec<(usize, usize)> {
        (0..self.layers)
            .map(|l| {
                let fan_in = if l == 0 { in_dim } else { self.hidden };
                let fan_out = if l + 1 == self.layers { self.out_classes } else { self.hidden };
                (fan_in, fan_out)
            })
            .collect()
    }

    /// Number of normalized (hidden) layers.
    pub fn norm_layers(&self) -> usize {
        if self.use_feature_norm {
            self.layers - 1
        } else {
            0
        }
    }

    /// Propagation matrix for this encoder on `g`.
    pub fn propagation(&self, g: &Graph) -> Result<SparseMatrix> {
        match self.kind {
            EncoderKind::Gcn => g.adjacency().sym_normalize(true),
            EncoderKind::Mlp => Ok(SparseMatrix::identity(g.num_nodes())),
        }
    }
}

/// What a parameter tensor is, which decides whether it is trained and
/// whether weight decay applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    Weight,
    Bias,
    NormScale,
    NormShift,
    /// Stored column mean used by [`NormMode::Stored`]; not trained.
    NormMean,
    /// Stored column variance used by [`NormMode::Stored`]; not trained.
    NormVar,
}

impl TensorRole {
    pub fn trainable(self) -> bool {
        !matches!(self, TensorRole::NormMean | TensorRole::NormVar)
    }

    pub fn decays(self) -> bool {
        self == TensorRole::Weight
    }
}

/// Column statistics of one normalized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Encoder parameters. Also used as the container for their gradients, in
/// which case the stored statistics are left at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub weights: Vec<DenseMatrix>,
    /// One per layer when biases are enabled, otherwise empty.
    pub biases: Vec<Vec<f64>>,
    /// One per hidden layer when feature normalization is enabled.
    pub norm_scale: Vec<Vec<f64>>,
    pub norm_shift: Vec<Vec<f64>>,
    pub norm_stats: Vec<NormStats>,
}

/// Glorot-uniform weights, zero biases, unit scale, zero shift.
pub fn init_params(cfg: &EncoderConfig, in_dim: usize, seed: u64) -> Result<EncoderParams> {
    cfg.validate()?;
    if in_dim < 1 {
        return Err(Error::invalid("input dimension must be at least 1"));
    }
    let mut rng = seed::rng(seed);
    let weights = cfg
        .layer_dims(in_dim)
        .into_iter()
        .map(|(fi, fo)| {
            let a = (6.0 / (fi + fo) as f64).sqrt();
            let data = (0..fi * fo)
                .map(|_| loop {
                    let w = rng.gen_range(-a..a);
                    if w != -a {
                        break w;
                    }
                })
                .collect();
            DenseMatrix::from_raw(fi, fo, data)
        })
        .collect();
    Ok(EncoderParams::with_weights(cfg, weights))
}

impl EncoderParams {
    fn with_weights(cfg: &EncoderConfig, weights: Vec<DenseMatrix>) -> Self {
        let biases = if cfg.use_bias {
            weights.iter().map(|w| vec![0.0; w.cols()]).collect()
        } else {
            Vec::new()
        };
        let k = cfg.norm_layers();
        Self {
            weights,
            biases,
            norm_scale: vec![vec![1.0; cfg.hidden]; k],
            norm_shift: vec![vec![0.0; cfg.hidden]; k],
            norm_stats: vec![
                NormStats {
                    mean: vec![0.0; cfg.hidden],
                    var: vec![1.0; cfg.hidden],
                };
                k
            ],
        }
    }

    /// All-zero tensors shaped like `self` (stored statistics included).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(|_, _, data| data.fill(0.0));
        z
    }

    /// Builds parameters from explicit weight matrices with zero biases and
    /// identity normalization. Shapes are checked against `cfg`.
    pub fn from_weights(cfg: &EncoderConfig, in_dim: usize, weights: Vec<DenseMatrix>) -> Result<Self> {
        cfg.validate()?;
        let dims = cfg.layer_dims(in_dim);
        if weights.len() != dims.len() || weights.iter().zip(&dims).any(|(w, &d)| w.shape() != d) {
            return Err(Error::invalid("weight shapes do not match the encoder configuration"));
        }
        Ok(Self::with_weights(cfg, weights))
    }

    /// Checks tensor counts and shapes against `cfg`.
    pub fn check_shapes(&self, cfg: &EncoderConfig, in_dim: usize) -> Result<()> {
        let dims = cfg.layer_dims(in_dim);
        let bad = |what: &str| Err(Error::invalid(format!("parameter shape mismatch: {what}")));
        if self.weights.len() != dims.len() {
            return bad("layer count");
        }
        for (l, (w, &d)) in self.weights.iter().zip(&dims).enumerate() {
            if w.shape() != d {
                return bad(&format!("weight {l} is {:?}, expected {d:?}", w.shape()));
            }
        }
        if cfg.use_bias {
            if self.biases.len() != dims.len() || self.biases.iter().zip(&dims).any(|(b, d)| b.len() != d.1) {
                return bad("biases");
            }
        } else if !self.biases.is_empty() {
            return bad("biases present but disabled");
        }
        let k = cfg.norm_layers();
        let hidden_ok = |v: &Vec<Vec<f64>>| v.len() == k && v.iter().all(|x| x.len() == cfg.hidden);
        if !hidden_ok(&self.norm_scale) || !hidden_ok(&self.norm_shift) {
            return bad("normalization scale/shift");
        }
        if self.norm_stats.len() != k
            || self.norm_stats.iter().any(|s| s.mean.len() != cfg.hidden || s.var.len() != cfg.hidden)
        {
            return bad("normalization statistics");
        }
        Ok(())
    }

    /// Visits every tensor in declaration order: per layer the weight, the
    /// bias, then (hidden layers only) scale, shift, mean and variance.
    pub fn visit(&self, mut f: impl FnMut(String, TensorRole, Vec<usize>, &[f64])) {
        for l in 0..self.weights.len() {
            let w = &self.weights[l];
            f(format!("layer{l}.weight"), TensorRole::Weight, vec![w.rows(), w.cols()], w.as_slice());
            if let Some(b) = self.biases.get(l) {
                f(format!("layer{l}.bias"), TensorRole::Bias, vec![b.len()], b);
            }
            if l < self.norm_scale.len() {
                let h = self.norm_scale[l].len();
                f(format!("layer{l}.norm_scale"), TensorRole::NormScale, vec![h], &self.norm_scale[l]);
                f(format!("layer{l}.norm_shift"), TensorRole::NormShift, vec![h], &self.norm_shift[l]);
                f(format!("layer{l}.norm_mean"), TensorRole::NormMean, vec![h], &self.norm_stats[l].mean);
                f(format!("layer{l}.norm_var"), TensorRole::NormVar, vec![h], &self.norm_stats[l].var);
            }
        }
    }

    /// Mutable counterpart of [`visit`](Self::visit), same order.
    pub(crate) fn visit_mut(&mut self, mut f: impl FnMut(usize, TensorRole, &mut [f64])) {
        for l in 0..self.weights.len() {
            f(l, TensorRole::Weight, self.weights[l].as_mut_slice());
            if let Some(b) = self.biases.get_mut(l) {
                f(l, TensorRole::Bias, b);
            }
            if l < self.norm_scale.len() {
                f(l, TensorRole::NormScale, &mut self.norm_scale[l]);
                f(l, TensorRole::NormShift, &mut self.norm_shift[l]);
                f(l, TensorRole::NormMean, &mut self.norm_stats[l].mean);
                f(l, TensorRole::NormVar, &mut self.norm_stats[l].var);
            }
        }
    }

    /// Trainable entries concatenated in declaration order.
    pub fn trainable_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(|_, role, _, data| {
            if role.trainable() {
                out.extend_from_slice(data);
            }
        });
        out
    }

    /// Inverse of [`trainable_flat`](Self::trainable_flat).
    pub fn set_trainable_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        self.visit_mut(|_, role, data| {
            if role.trainable() {
                data.copy_from_slice(&flat[pos..pos + data.len()]);
                pos += data.len();
            }
        });
        assert_eq!(pos, flat.len(), "flat parameter vector has the wrong length");
    }

    /// Per trainable entry: whether weight decay applies.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut out = Vec::new();
        self.visit(|_, role, _, data| {
            if role.trainable() {
                out.extend(std::iter::repeat_n(role.decays(), data.len()));
            }
        });
        out
    }

    /// Every entry of every tensor, declaration order.
    pub fn all_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(|_, _, _, data| out.extend_from_slice(data));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.all_flat().iter().all(|v| v.is_finite())
    }

    /// `self += scale * other` over trainable tensors.
    pub(crate) fn add_scaled(&mut self, other: &EncoderParams, scale: f64) {
        let src = other.trainable_flat();
        let mut dst = self.trainable_flat();
        for (d, s) in dst.iter_mut().zip(&src) {
            *d += scale * s;
        }
        self.set_trainable_flat(&dst);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = EncoderConfig::gcn(4);
        let a = init_params(&cfg, 10, 42).unwrap();
        assert_eq!(a, init_params(&cfg, 10, 42).unwrap());
        assert_ne!(a, init_params(&cfg, 10, 43).unwrap());
        for w in &a.weights {
            let bound = (6.0 / (w.rows() + w.cols()) as f64).sqrt();
            assert!(w.as_slice().iter().all(|x| x.abs() < bound));
        }
        assert!(a.biases.iter().flatten().all(|&b| b == 0.0));
        assert!(a.norm_scale.iter().flatten().all(|&s| s == 1.0));
        assert!(a.norm_shift.iter().flatten().all(|&s| s == 0.0));
        a.check_shapes(&cfg, 10).unwrap();
    }

    #[test]
    fn init_mean_within_clt_bound() {
        let cfg = EncoderConfig { layers: 1, out_classes: 64, ..EncoderConfig::mlp(2) };
        let p = init_params(&cfg, 64, 7).unwrap();
        let w = p.weights[0].as_slice();
        let a = (6.0f64 / 128.0).sqrt();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        // Uniform(-a, a) has variance a²/3.
        let sigma = (a * a / 3.0 / w.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * sigma, "mean {mean}, 4σ {}", 4.0 * sigma);
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig { layers: 0, ..EncoderConfig::gcn(3) }.validate().is_err());
        assert!(EncoderConfig { hidden: 0, ..EncoderConfig::gcn(3) }.validate().is_err());
        assert!(EncoderConfig::gcn(1).validate().is_err());
        assert!(init_params(&EncoderConfig::gcn(3), 0, 0).is_err());
    }

    #[test]
    fn flat_round_trip_and_masks() {
        let cfg = EncoderConfig::gcn(3);
        let p = init_params(&cfg, 5, 1).unwrap();
        let flat = p.trainable_flat();
        // weights 5x64 + 64x3, biases 64 + 3, scale/shift 64 each.
        assert_eq!(flat.len(), 5 * 64 + 64 * 3 + 64 + 3 + 128);
        let mut q = p.zeros_like();
        q.norm_stats = p.norm_stats.clone();
        q.set_trainable_flat(&flat);
        assert_eq!(p, q);
        let decays = p.decay_mask().iter().filter(|&&d| d).count();
        assert_eq!(decays, 5 * 64 + 64 * 3);
    }
}
