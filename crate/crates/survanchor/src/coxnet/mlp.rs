//! Fully-connected encoder + linear risk head with manual backpropagation.
//!
//! The encoder is `layer_count` fully-connected layers with ReLU between
//! them; the last encoder layer feeds the final activation (unit-norm by
//! default) to produce the embedding, and a linear head maps the embedding
//! to the scalar risk score.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Norm below which unit-normalization becomes a pass-through instead of a
/// division by (near) zero.
pub const UNIT_NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalActivation {
    UnitNorm,
    Relu,
}

impl std::str::FromStr for FinalActivation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit_norm" => Ok(FinalActivation::UnitNorm),
            "relu" => Ok(FinalActivation::Relu),
            other => Err(format!("unknown final activation {other:?}")),
        }
    }
}

/// One dense layer, row-major `out_dim x in_dim`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        // He-style fan-in scaled uniform init.
        let limit = (6.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        DenseLayer {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
        }
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            *out_v += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
        out
    }
}

/// Encoder + head. `layers[0..layer_count]` is the encoder, `layers.last()`
/// the scalar head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub input_dim: usize,
    pub embed_dim: usize,
    pub layer_count: usize,
    pub final_activation: FinalActivation,
    pub layers: Vec<DenseLayer>,
}

/// Per-layer gradient accumulator with the same shapes as the network.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Intermediate activations kept for the backward pass of one row.
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    embedding: Vec<f64>,
    raw_norm: f64,
}

impl ForwardCache {
    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }
}

impl Mlp {
    pub fn new<R: Rng>(
        input_dim: usize,
        embed_dim: usize,
        layer_count: usize,
        final_activation: FinalActivation,
        rng: &mut R,
    ) -> Self {
        assert!(input_dim > 0 && embed_dim > 0 && layer_count > 0);
        let mut layers = Vec::with_capacity(layer_count + 1);
        for l in 0..layer_count {
            let in_dim = if l == 0 { input_dim } else { embed_dim };
            layers.push(DenseLayer::init(in_dim, embed_dim, rng));
        }
        layers.push(DenseLayer::init(embed_dim, 1, rng));
        Mlp {
            input_dim,
            embed_dim,
            layer_count,
            final_activation,
            layers,
        }
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// Embedding of one (already standardized) input row.
    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).1.embedding
    }

    /// Risk score of one (already standardized) input row.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.forward(x).0
    }

    /// Full forward pass with cached intermediates.
    pub fn forward(&self, x: &[f64]) -> (f64, ForwardCache) {
        debug_assert_eq!(x.len(), self.input_dim);
        let mut inputs = Vec::with_capacity(self.layer_count + 1);
        let mut pre_activations = Vec::with_capacity(self.layer_count);
        let mut current = x.to_vec();
        let mut raw_norm = 0.0;
        let mut embedding = Vec::new();
        for l in 0..self.layer_count {
            inputs.push(current.clone());
            let pre = self.layers[l].forward(&current);
            pre_activations.push(pre.clone());
            let last_encoder = l == self.layer_count - 1;
            current = if last_encoder {
                match self.final_activation {
                    FinalActivation::Relu => pre.iter().map(|v| v.max(0.0)).collect(),
                    FinalActivation::UnitNorm => {
                        raw_norm = pre.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if raw_norm < UNIT_NORM_GUARD {
                            pre.clone()
                        } else {
                            pre.iter().map(|v| v / raw_norm).collect()
                        }
                    }
                }
            } else {
                pre.iter().map(|v| v.max(0.0)).collect()
            };
            if last_encoder {
                embedding = current.clone();
            }
        }
        inputs.push(current.clone());
        let score = self.layers[self.layer_count].forward(&current)[0];
        (
            score,
            ForwardCache {
                inputs,
                pre_activations,
                embedding,
                raw_norm,
            },
        )
    }

    /// Accumulates parameter gradients for one row given dL/dscore.
    pub fn backward(&self, cache: &ForwardCache, dscore: f64, grads: &mut MlpGrads) {
        // Head: score = w . e + b
        let head = self.layer_count;
        let embed_input = &cache.inputs[head];
        for (j, x) in embed_input.iter().enumerate() {
            grads.weights[head][j] += dscore * x;
        }
        grads.biases[head][0] += dscore;
        let mut dcurrent: Vec<f64> = self.layers[head]
            .weights
            .iter()
            .map(|w| w * dscore)
            .collect();

        for l in (0..self.layer_count).rev() {
            let pre = &cache.pre_activations[l];
            let last_encoder = l == self.layer_count - 1;
            let dpre: Vec<f64> = if last_encoder {
                match self.final_activation {
                    FinalActivation::Relu => pre
                        .iter()
                        .zip(&dcurrent)
                        .map(|(p, d)| if *p > 0.0 { *d } else { 0.0 })
                        .collect(),
                    FinalActivation::UnitNorm => {
                        if cache.raw_norm < UNIT_NORM_GUARD {
                            dcurrent.clone()
                        } else {
                            // d(v/r)/dv applied to d: (d − e (e.d)) / r
                            let e = &cache.embedding;
                            let proj: f64 = e.iter().zip(&dcurrent).map(|(a, b)| a * b).sum();
                            e.iter()
                                .zip(&dcurrent)
                                .map(|(ei, di)| (di - ei * proj) / cache.raw_norm)
                                .collect()
                        }
                    }
                }
            } else {
                pre.iter()
                    .zip(&dcurrent)
                    .map(|(p, d)| if *p > 0.0 { *d } else { 0.0 })
                    .collect()
            };

            let layer = &self.layers[l];
            let input = &cache.inputs[l];
            for (o, dp) in dpre.iter().enumerate() {
                let row = o * layer.in_dim;
                for (j, x) in input.iter().enumerate() {
                    grads.weights[l][row + j] += dp * x;
                }
                grads.biases[l][o] += dp;
            }
            let mut dinput = vec![0.0; layer.in_dim];
            for (o, dp) in dpre.iter().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (j, w) in row.iter().enumerate() {
                    dinput[j] += w * dp;
                }
            }
            dcurrent = dinput;
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }
}

/// Adam optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(mlp: &Mlp, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m_w: mlp.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_w: mlp.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_b: mlp.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_b: mlp.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &MlpGrads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for l in 0..mlp.layers.len() {
            update_slice(
                &mut mlp.layers[l].weights,
                &grads.weights[l],
                &mut self.m_w[l],
                &mut self.v_w[l],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
            update_slice(
                &mut mlp.layers[l].biases,
                &grads.biases[l],
                &mut self.m_b[l],
                &mut self.v_b[l],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
