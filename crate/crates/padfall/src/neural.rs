//! Dense multilayer perceptron with backpropagation and Adam.
//!
//! Parameters carry 32-bit float semantics (that is what the checkpoint
//! format stores), while all arithmetic runs in f64 internally, so forward
//! and backward are smooth functions of the stored parameters and the
//! finite-difference oracle can resolve them cleanly.
//!
//! Hidden layers are rectified-linear; the output layer is `tanh` for actors
//! (bounding actions to [−1, 1]) and linear for critics.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output nonlinearity of the final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Tanh,
    Linear,
}

/// Network shape. Hidden activation is always rectified-linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: &[usize],
        output_dim: usize,
        output_activation: OutputActivation,
    ) -> Self {
        Self {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            output_dim,
            output_activation,
        }
    }

    /// Actor head: observation in, bounded action out.
    pub fn actor(obs_dim: usize, hidden: &[usize], action_dim: usize) -> Self {
        Self::new(obs_dim, hidden, action_dim, OutputActivation::Tanh)
    }

    /// Critic head: observation ⊕ action in, scalar value out.
    pub fn critic(obs_dim: usize, hidden: &[usize], action_dim: usize) -> Self {
        Self::new(obs_dim + action_dim, hidden, 1, OutputActivation::Linear)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config("all network dims must be >= 1".into()));
        }
        Ok(())
    }

    /// (in, out) size of every affine layer, in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// One affine layer: row-major `weights[out][in]` plus biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f32>,
    pub biases: Vec<f32>,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// All parameters of one network. `version` increments on every in-place
/// update so stale activation caches are detectable.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub spec: MlpSpec,
    layers: Vec<Layer>,
    version: u64,
}

impl ParamSet {
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Build from explicit layer contents (hand-built nets in tests and the
    /// checkpoint loader).
    pub fn from_layers(spec: MlpSpec, raw: Vec<(Vec<f32>, Vec<f32>)>) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        if raw.len() != dims.len() {
            return Err(Error::Shape {
                expected: dims.len(),
                got: raw.len(),
            });
        }
        let mut layers = Vec::with_capacity(raw.len());
        for ((weights, biases), (in_dim, out_dim)) in raw.into_iter().zip(dims) {
            if weights.len() != in_dim * out_dim {
                return Err(Error::Shape {
                    expected: in_dim * out_dim,
                    got: weights.len(),
                });
            }
            if biases.len() != out_dim {
                return Err(Error::Shape {
                    expected: out_dim,
                    got: biases.len(),
                });
            }
            layers.push(Layer {
                weights,
                biases,
                in_dim,
                out_dim,
            });
        }
        Ok(Self {
            spec,
            layers,
            version: 0,
        })
    }

    /// Mutable weight access for oracles and tests; bumps the version.
    pub fn weight_mut(&mut self, layer: usize, index: usize) -> &mut f32 {
        self.version += 1;
        &mut self.layers[layer].weights[index]
    }

    pub fn bias_mut(&mut self, layer: usize, index: usize) -> &mut f32 {
        self.version += 1;
        &mut self.layers[layer].biases[index]
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|w| w.is_finite()) && l.biases.iter().all(|b| b.is_finite())
        })
    }
}

/// Kaiming-style fan-in scaled uniform init: weights on ±√(6/fan_in) (the
/// variance lands on 2/fan_in), biases exactly zero.
pub fn init_params(spec: &MlpSpec, rng: &mut ChaCha8Rng) -> Result<ParamSet> {
    spec.validate()?;
    let mut layers = Vec::new();
    for (in_dim, out_dim) in spec.layer_dims() {
        let bound = (6.0 / in_dim as f64).sqrt();
        let weights: Vec<f32> = (0..in_dim * out_dim)
            .map(|_| ((rng.r#gen::<f64>() * 2.0 - 1.0) * bound) as f32)
            .collect();
        layers.push(Layer {
            weights,
            biases: vec![0.0; out_dim],
            in_dim,
            out_dim,
        });
    }
    Ok(ParamSet {
        spec: spec.clone(),
        layers,
        version: 0,
    })
}

/// Post-activation values of every layer from one forward pass, bound to the
/// parameter version that produced them.
#[derive(Debug, Clone)]
pub struct ActivationCache {
    /// `activations[0]` is the input; `activations[L]` the network output.
    activations: Vec<Vec<f64>>,
    version: u64,
}

impl ActivationCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache is never empty")
    }

    /// Rectifier gate pattern per hidden layer (true = unit active). Used by
    /// the finite-difference oracle to detect kink crossings.
    pub fn relu_gates(&self) -> Vec<Vec<bool>> {
        self.activations[1..self.activations.len() - 1]
            .iter()
            .map(|a| a.iter().map(|&v| v > 0.0).collect())
            .collect()
    }
}

/// Forward pass. Returns the output and the cache `backward` consumes.
pub fn forward(params: &ParamSet, input: &[f32]) -> Result<(Vec<f64>, ActivationCache)> {
    if input.len() != params.spec.input_dim {
        return Err(Error::Shape {
            expected: params.spec.input_dim,
            got: input.len(),
        });
    }
    let n_layers = params.layers.len();
    let mut activations = Vec::with_capacity(n_layers + 1);
    activations.push(input.iter().map(|&v| v as f64).collect::<Vec<f64>>());

    for (li, layer) in params.layers.iter().enumerate() {
        let prev = activations.last().expect("non-empty");
        let mut out = vec![0.0f64; layer.out_dim];
        let is_output = li == n_layers - 1;
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut acc = layer.biases[o] as f64;
            for (w, a) in row.iter().zip(prev.iter()) {
                acc += *w as f64 * *a;
            }
            *out_v = if is_output {
                match params.spec.output_activation {
                    OutputActivation::Tanh => acc.tanh(),
                    OutputActivation::Linear => acc,
                }
            } else {
                acc.max(0.0)
            };
        }
        activations.push(out);
    }

    let output = activations.last().expect("non-empty").clone();
    Ok((
        output,
        ActivationCache {
            activations,
            version: params.version,
        },
    ))
}

/// Parameter gradients, shaped like the network, accumulated in f64.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let dims = spec.layer_dims();
        Self {
            d_weights: dims.iter().map(|(i, o)| vec![0.0; i * o]).collect(),
            d_biases: dims.iter().map(|(_, o)| vec![0.0; *o]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.d_weights {
            for v in w.iter_mut() {
                *v *= factor;
            }
        }
        for b in &mut self.d_biases {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_weights
            .iter()
            .chain(self.d_biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Exact reverse-mode gradients of `forward`. `output_gradient` is
/// dL/d(output) evaluated after the output activation. Parameter gradients
/// accumulate into `grads` (callers zero or scale them); the returned vector
/// is dL/d(input).
pub fn backward(
    params: &ParamSet,
    cache: &ActivationCache,
    output_gradient: &[f64],
    grads: &mut ParamGrads,
) -> Result<Vec<f64>> {
    if cache.version != params.version {
        return Err(Error::Usage(
            "activation cache is stale for these parameters".into(),
        ));
    }
    if output_gradient.len() != params.spec.output_dim {
        return Err(Error::Shape {
            expected: params.spec.output_dim,
            got: output_gradient.len(),
        });
    }

    let n_layers = params.layers.len();
    // Upstream gradient with respect to the current layer's post-activation.
    let mut g: Vec<f64> = output_gradient.to_vec();

    for li in (0..n_layers).rev() {
        let layer = &params.layers[li];
        let post = &cache.activations[li + 1];
        let prev = &cache.activations[li];

        // Through the activation: delta = g ∘ act'(post).
        let mut delta = vec![0.0f64; layer.out_dim];
        let is_output = li == n_layers - 1;
        for (o, d) in delta.iter_mut().enumerate() {
            let gate = if is_output {
                match params.spec.output_activation {
                    OutputActivation::Tanh => 1.0 - post[o] * post[o],
                    OutputActivation::Linear => 1.0,
                }
            } else if post[o] > 0.0 {
                1.0
            } else {
                0.0
            };
            *d = g[o] * gate;
        }

        let dw = &mut grads.d_weights[li];
        let db = &mut grads.d_biases[li];
        for (o, &d) in delta.iter().enumerate() {
            db[o] += d;
            let row = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (i, slot) in row.iter_mut().enumerate() {
                *slot += d * prev[i];
            }
        }

        // Propagate to the previous layer's post-activation.
        let mut g_prev = vec![0.0f64; layer.in_dim];
        for (o, &d) in delta.iter().enumerate() {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (i, gp) in g_prev.iter_mut().enumerate() {
                *gp += row[i] as f64 * d;
            }
        }
        g = g_prev;
    }

    Ok(g)
}

/// Adam optimizer state: bias-corrected first/second moments per parameter,
/// plus the hyperparameters they run with.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(spec: &MlpSpec, learning_rate: f64) -> Self {
        let dims = spec.layer_dims();
        let zeros_w = || -> Vec<Vec<f64>> { dims.iter().map(|(i, o)| vec![0.0; i * o]).collect() };
        let zeros_b = || -> Vec<Vec<f64>> { dims.iter().map(|(_, o)| vec![0.0; *o]).collect() };
        Self {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m_weights: zeros_w(),
            m_biases: zeros_b(),
            v_weights: zeros_w(),
            v_biases: zeros_b(),
        }
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_update(params: &mut ParamSet, grads: &ParamGrads, state: &mut AdamState) -> Result<()> {
    if grads.d_weights.len() != params.layers.len() {
        return Err(Error::Shape {
            expected: params.layers.len(),
            got: grads.d_weights.len(),
        });
    }
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);

    for li in 0..params.layers.len() {
        let layer = &mut params.layers[li];
        adam_step_slice(
            &mut layer.weights,
            &grads.d_weights[li],
            &mut state.m_weights[li],
            &mut state.v_weights[li],
            (state.beta1, state.beta2, state.epsilon, state.learning_rate),
            (bc1, bc2),
        );
        adam_step_slice(
            &mut layer.biases,
            &grads.d_biases[li],
            &mut state.m_biases[li],
            &mut state.v_biases[li],
            (state.beta1, state.beta2, state.epsilon, state.learning_rate),
            (bc1, bc2),
        );
    }
    params.version += 1;
    Ok(())
}

fn adam_step_slice(
    values: &mut [f32],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (beta1, beta2, epsilon, lr): (f64, f64, f64, f64),
    (bc1, bc2): (f64, f64),
) {
    for i in 0..values.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        values[i] = (values[i] as f64 - lr * m_hat / (v_hat.sqrt() + epsilon)) as f32;
    }
}

/// Soft blend θ' ← τ·θ + (1−τ)·θ', coordinatewise, used for target networks.
pub fn soft_update(target: &mut ParamSet, online: &ParamSet, tau: f64) -> Result<()> {
    if target.spec != online.spec {
        return Err(Error::Usage("soft update across mismatched specs".into()));
    }
    for (tl, ol) in target.layers.iter_mut().zip(&online.layers) {
        for (tw, ow) in tl.weights.iter_mut().zip(&ol.weights) {
            *tw = (tau * *ow as f64 + (1.0 - tau) * *tw as f64) as f32;
        }
        for (tb, ob) in tl.biases.iter_mut().zip(&ol.biases) {
            *tb = (tau * *ob as f64 + (1.0 - tau) * *tb as f64) as f32;
        }
    }
    target.version += 1;
    Ok(())
}

// --- Checkpoint format -----------------------------------------------------
//
// Byte layout, little-endian throughout:
//   8 bytes  magic "PADFALL1"
//   1 byte   output activation (0 = tanh, 1 = linear)
//   4 bytes  number of dims D (u32) = hidden layers + 2
//   4·D      dims: input, hidden..., output (u32 each)
//   then per layer, in order: weights row-major (f32), biases (f32)

const MAGIC: &[u8; 8] = b"PADFALL1";

/// Serialize parameters into the versioned binary checkpoint format.
pub fn encode_params(params: &ParamSet) -> Vec<u8> {
    let spec = &params.spec;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(match spec.output_activation {
        OutputActivation::Tanh => 0,
        OutputActivation::Linear => 1,
    });
    let dims: Vec<u32> = std::iter::once(spec.input_dim as u32)
        .chain(spec.hidden_dims.iter().map(|&d| d as u32))
        .chain(std::iter::once(spec.output_dim as u32))
        .collect();
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for layer in &params.layers {
        for w in &layer.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in &layer.biases {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

/// Parse a checkpoint produced by [`encode_params`].
pub fn decode_params(bytes: &[u8]) -> Result<ParamSet> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        let end = *pos + n;
        if end > bytes.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let slice = &bytes[*pos..end];
        *pos = end;
        Ok(slice)
    };

    if take(&mut pos, 8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic (expected PADFALL1)".into()));
    }
    let activation = match take(&mut pos, 1)?[0] {
        0 => OutputActivation::Tanh,
        1 => OutputActivation::Linear,
        other => {
            return Err(Error::Checkpoint(format!(
                "unknown output activation tag {other}"
            )))
        }
    };
    let n_dims = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    if n_dims < 2 {
        return Err(Error::Checkpoint(
            "need at least input and output dims".into(),
        ));
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        dims.push(u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize);
    }
    let spec = MlpSpec {
        input_dim: dims[0],
        hidden_dims: dims[1..n_dims - 1].to_vec(),
        output_dim: dims[n_dims - 1],
        output_activation: activation,
    };
    spec.validate()
        .map_err(|e| Error::Checkpoint(format!("bad dims: {e}")))?;

    let mut raw = Vec::new();
    for (in_dim, out_dim) in spec.layer_dims() {
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim * out_dim {
            weights.push(f32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()));
        }
        let mut biases = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            biases.push(f32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()));
        }
        raw.push((weights, biases));
    }
    if pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after parameters",
            bytes.len() - pos
        )));
    }
    ParamSet::from_layers(spec, raw)
}

pub fn save_params(path: &std::path::Path, params: &ParamSet) -> Result<()> {
    std::fs::write(path, encode_params(params))?;
    Ok(())
}

pub fn load_params(path: &std::path::Path) -> Result<ParamSet> {
    let bytes = std::fs::read(path)?;
    decode_params(&bytes)
}
