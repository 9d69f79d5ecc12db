//! Gated relational GCN encoder and the two stance heads.
//!
//! Per layer, with `f(x) = x W + b`:
//!
//! ```text
//! u_i  = f_s(x_i) + sum_r mean_{j in N_r(i)} f_r(x_j)     (empty N_r skipped)
//! g_i  = sigmoid([u_i, x_i] W_G + b_G)
//! x'_i = tanh(u_i) * g_i + x_i * (1 - g_i)
//! ```
//!
//! The input transform is `x0 = phi(v W_I + b_I)` and both heads are a
//! softmax over five classes.

mod checkpoint;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};

use crate::hin::{Hin, RelationKind};
use crate::ingest::NUM_CLASSES;
use crate::numkit::{Matrix, NumError, Tape, Var};
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("feature width {got} does not match model input width {expected}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Relu,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::LeakyRelu(0.01)
    }
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var, NumError> {
        match self {
            Activation::LeakyRelu(a) => tape.leaky_relu(x, a),
            Activation::Relu => tape.relu(x),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu(a) => write!(f, "leaky_relu:{a}"),
            Activation::Relu => f.write_str("relu"),
        }
    }
}

impl FromStr for Activation {
    type Err = ModelError;

    /// `relu`, `leaky_relu` (slope 0.01) or `leaky_relu:<slope>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "leaky_relu" => Ok(Activation::default()),
            _ => s
                .strip_prefix("leaky_relu:")
                .and_then(|a| a.parse().ok())
                .map(Activation::LeakyRelu)
                .ok_or_else(|| ModelError::Config(format!("unknown activation {s:?}"))),
        }
    }
}

/// Layer update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Gated residual update over per-relation transforms.
    #[default]
    Gated,
    /// Per-relation transforms, `x' = phi(u)`.
    Plain,
    /// One transform shared by every relation, `x' = phi(u)`.
    Homogeneous,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Gated => "gated",
            Variant::Plain => "plain",
            Variant::Homogeneous => "homogeneous",
        })
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gated" => Ok(Variant::Gated),
            "plain" => Ok(Variant::Plain),
            "homogeneous" => Ok(Variant::Homogeneous),
            _ => Err(ModelError::Config(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub d_in: usize,
    pub hidden: usize,
    pub layers: usize,
    pub activation: Activation,
    pub variant: Variant,
}

/// `x W + b` with `W: in x out`, `b: 1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Linear {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: Matrix::zeros(1, fan_out),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub(crate) fn glorot(fan_in: usize, fan_out: usize, r: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut l = Self::zeros(fan_in, fan_out);
        for w in l.weight.as_mut_slice() {
            *w = r.random_range(-limit..=limit);
        }
        l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub self_loop: Linear,
    /// One transform per relation (in `RelationKind::ALL` order), or a single
    /// shared one for the homogeneous variant.
    pub relations: Vec<Linear>,
    /// `2d x d`; absent unless the layer is gated.
    pub gate: Option<Linear>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub input: Linear,
    pub layers: Vec<LayerParams>,
    pub liberal_head: Linear,
    pub conservative_head: Linear,
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases, deterministic per seed.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        if config.d_in == 0 || config.hidden == 0 {
            return Err(ModelError::Config("dimensions must be at least 1".into()));
        }
        let base = rng::derive(seed, 0x1417);
        let mut stream_id = 0u64;
        let mut next = |fan_in, fan_out| {
            stream_id += 1;
            Linear::glorot(fan_in, fan_out, &mut rng::stream(base, stream_id))
        };
        let d = config.hidden;
        let input = next(config.d_in, d);
        let n_rel = match config.variant {
            Variant::Homogeneous => 1,
            _ => RelationKind::ALL.len(),
        };
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                self_loop: next(d, d),
                relations: (0..n_rel).map(|_| next(d, d)).collect(),
                gate: (config.variant == Variant::Gated).then(|| next(2 * d, d)),
            })
            .collect();
        Ok(Self {
            config,
            input,
            layers,
            liberal_head: next(d, NUM_CLASSES),
            conservative_head: next(d, NUM_CLASSES),
        })
    }

    fn linears(&self) -> Vec<(String, &Linear)> {
        let mut out = vec![("input".to_string(), &self.input)];
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.self"), &layer.self_loop));
            for (r, lin) in layer.relations.iter().enumerate() {
                let name = if layer.relations.len() == 1 {
                    format!("layer{l}.shared")
                } else {
                    format!("layer{l}.{}", RelationKind::ALL[r].code())
                };
                out.push((name, lin));
            }
            if let Some(g) = &layer.gate {
                out.push((format!("layer{l}.gate"), g));
            }
        }
        out.push(("head.liberal".to_string(), &self.liberal_head));
        out.push(("head.conservative".to_string(), &self.conservative_head));
        out
    }

    /// Every learnable tensor with a stable name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        self.linears()
            .into_iter()
            .flat_map(|(name, lin)| {
                [
                    (format!("{name}.weight"), &lin.weight),
                    (format!("{name}.bias"), &lin.bias),
                ]
            })
            .collect()
    }

    /// Same order as [`ModelParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        out.push(&mut self.input.weight);
        out.push(&mut self.input.bias);
        for layer in &mut self.layers {
            out.push(&mut layer.self_loop.weight);
            out.push(&mut layer.self_loop.bias);
            for lin in &mut layer.relations {
                out.push(&mut lin.weight);
                out.push(&mut lin.bias);
            }
            if let Some(g) = &mut layer.gate {
                out.push(&mut g.weight);
                out.push(&mut g.bias);
            }
        }
        out.push(&mut self.liberal_head.weight);
        out.push(&mut self.liberal_head.bias);
        out.push(&mut self.conservative_head.weight);
        out.push(&mut self.conservative_head.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.named_tensors()
            .iter()
            .map(|(_, m)| m.squared_norm())
            .sum()
    }

    /// Registers every tensor on `tape` as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        self.bind_with(tape, true)
    }

    /// Registers every tensor as a constant (inference only).
    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundParams {
        self.bind_with(tape, false)
    }

    fn bind_with(&self, tape: &mut Tape, grad: bool) -> BoundParams {
        let vars: Vec<Var> = self
            .named_tensors()
            .into_iter()
            .map(|(_, m)| {
                if grad {
                    tape.param(m.clone())
                } else {
                    tape.constant(m.clone())
                }
            })
            .collect();
        self.bind_to(&vars)
    }

    /// Handles over already registered leaves, given in
    /// [`ModelParams::named_tensors`] order.
    ///
    /// # Panics
    /// If `vars` is shorter than the tensor list.
    pub fn bind_to(&self, vars: &[Var]) -> BoundParams {
        let mut it = vars.iter().copied();
        let mut lin = || BoundLinear {
            weight: it.next().expect("too few vars"),
            bias: it.next().expect("too few vars"),
        };
        let input = lin();
        let layers = self
            .layers
            .iter()
            .map(|layer| BoundLayer {
                self_loop: lin(),
                relations: layer.relations.iter().map(|_| lin()).collect(),
                gate: layer.gate.as_ref().map(|_| lin()),
            })
            .collect();
        let liberal_head = lin();
        let conservative_head = lin();
        BoundParams {
            config: self.config,
            input,
            layers,
            liberal_head,
            conservative_head,
            all: vars[..self.named_tensors().len()].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundLinear {
    pub weight: Var,
    pub bias: Var,
}

impl BoundLinear {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var, NumError> {
        let xw = tape.matmul(x, self.weight)?;
        tape.add_bias(xw, self.bias)
    }
}

#[derive(Debug, Clone)]
pub struct BoundLayer {
    pub self_loop: BoundLinear,
    pub relations: Vec<BoundLinear>,
    pub gate: Option<BoundLinear>,
}

/// Tape handles for a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub config: ModelConfig,
    pub input: BoundLinear,
    pub layers: Vec<BoundLayer>,
    pub liberal_head: BoundLinear,
    pub conservative_head: BoundLinear,
    /// Every tensor, in [`ModelParams::named_tensors`] order.
    pub all: Vec<Var>,
}

/// Neighborhood lists the encoder aggregates over, built once per graph.
#[derive(Debug, Clone)]
pub struct GraphStructure {
    nodes: usize,
    per_relation: Vec<(RelationKind, Arc<[Vec<usize>]>)>,
    union: Arc<[Vec<usize>]>,
}

impl GraphStructure {
    pub fn new(hin: &Hin) -> Self {
        let per_relation = RelationKind::ALL
            .into_iter()
            .filter(|&r| !hin.edges(r).is_empty())
            .map(|r| (r, Arc::from(hin.neighborhoods(r).to_vec())))
            .collect();
        let union = (0..hin.node_count())
            .map(|i| hin.positive_set(i))
            .collect::<Vec<_>>();
        Self {
            nodes: hin.node_count(),
            per_relation,
            union: Arc::from(union),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }
}

/// Result of one layer on the tape.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub x: Var,
    pub gate: Option<Var>,
}

pub fn input_transform_var(
    tape: &mut Tape,
    p: &BoundParams,
    features: Var,
) -> Result<Var, NumError> {
    let z = p.input.apply(tape, features)?;
    p.config.activation.apply(tape, z)
}

pub fn layer_forward_var(
    tape: &mut Tape,
    layer: &BoundLayer,
    config: &ModelConfig,
    graph: &GraphStructure,
    x_prev: Var,
) -> Result<LayerVars, NumError> {
    let mut u = layer.self_loop.apply(tape, x_prev)?;
    if config.variant == Variant::Homogeneous {
        let f = layer.relations[0].apply(tape, x_prev)?;
        let agg = tape.segment_mean(f, graph.union.clone())?;
        u = tape.add(u, agg)?;
    } else {
        for (rel, sets) in &graph.per_relation {
            let f = layer.relations[rel.index()].apply(tape, x_prev)?;
            let agg = tape.segment_mean(f, sets.clone())?;
            u = tape.add(u, agg)?;
        }
    }
    match (&layer.gate, config.variant) {
        (Some(gate), Variant::Gated) => {
            let cat = tape.concat_cols(u, x_prev)?;
            let pre = gate.apply(tape, cat)?;
            let g = tape.sigmoid(pre)?;
            let t = tape.tanh(u)?;
            let new_part = tape.hadamard(t, g)?;
            let neg_g = tape.neg(g)?;
            let keep = tape.add_scalar(neg_g, 1.0)?;
            let old_part = tape.hadamard(x_prev, keep)?;
            let x = tape.add(new_part, old_part)?;
            Ok(LayerVars { x, gate: Some(g) })
        }
        _ => Ok(LayerVars {
            x: config.activation.apply(tape, u)?,
            gate: None,
        }),
    }
}

/// Encoder output on the tape: the final node representations and each
/// layer's gate.
#[derive(Debug, Clone)]
pub struct EncodedVars {
    pub x_final: Var,
    pub gates: Vec<Var>,
}

pub fn encode_var(
    tape: &mut Tape,
    p: &BoundParams,
    graph: &GraphStructure,
    features: Var,
) -> Result<EncodedVars, NumError> {
    let mut x = input_transform_var(tape, p, features)?;
    let mut gates = Vec::new();
    for layer in &p.layers {
        let out = layer_forward_var(tape, layer, &p.config, graph, x)?;
        x = out.x;
        gates.extend(out.gate);
    }
    Ok(EncodedVars { x_final: x, gates })
}

/// Logits of both heads.
pub fn head_logits_var(
    tape: &mut Tape,
    p: &BoundParams,
    x_final: Var,
) -> Result<(Var, Var), NumError> {
    Ok((
        p.liberal_head.apply(tape, x_final)?,
        p.conservative_head.apply(tape, x_final)?,
    ))
}

#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// `n x d` representations after the last layer.
    pub x_final: Matrix,
    /// Per-layer gate activations (gated variant only).
    pub gates: Vec<Matrix>,
    /// Rows that represent political actors.
    pub actor_rows: Vec<usize>,
}

fn check_features(hin: &Hin, params: &ModelParams) -> Result<(), ModelError> {
    if hin.feature_dim() != params.config.d_in {
        return Err(ModelError::FeatureWidth {
            expected: params.config.d_in,
            got: hin.feature_dim(),
        });
    }
    Ok(())
}

/// Inference-only forward pass over the whole graph.
pub fn encode(hin: &Hin, params: &ModelParams) -> Result<EncoderOutput, ModelError> {
    check_features(hin, params)?;
    let graph = GraphStructure::new(hin);
    let mut tape = Tape::new();
    let p = params.bind_frozen(&mut tape);
    let feats = tape.constant(hin.features().clone());
    let enc = encode_var(&mut tape, &p, &graph, feats)?;
    Ok(EncoderOutput {
        x_final: tape.value(enc.x_final).clone(),
        gates: enc.gates.iter().map(|&g| tape.value(g).clone()).collect(),
        actor_rows: hin.actor_ids(),
    })
}

pub fn input_transform(features: &Matrix, params: &ModelParams) -> Result<Matrix, ModelError> {
    if features.cols() != params.config.d_in {
        return Err(ModelError::FeatureWidth {
            expected: params.config.d_in,
            got: features.cols(),
        });
    }
    let mut tape = Tape::new();
    let p = params.bind_frozen(&mut tape);
    let f = tape.constant(features.clone());
    let x = input_transform_var(&mut tape, &p, f)?;
    Ok(tape.value(x).clone())
}

/// One layer applied to `x_prev`; returns the new representations and the
/// gate (if gated).
pub fn layer_forward(
    x_prev: &Matrix,
    graph: &GraphStructure,
    layer: &LayerParams,
    config: &ModelConfig,
) -> Result<(Matrix, Option<Matrix>), ModelError> {
    let mut tape = Tape::new();
    let bind = |tape: &mut Tape, l: &Linear| BoundLinear {
        weight: tape.constant(l.weight.clone()),
        bias: tape.constant(l.bias.clone()),
    };
    let bound = BoundLayer {
        self_loop: bind(&mut tape, &layer.self_loop),
        relations: layer.relations.iter().map(|r| bind(&mut tape, r)).collect(),
        gate: layer.gate.as_ref().map(|g| bind(&mut tape, g)),
    };
    let x = tape.constant(x_prev.clone());
    let out = layer_forward_var(&mut tape, &bound, config, graph, x)?;
    Ok((
        tape.value(out.x).clone(),
        out.gate.map(|g| tape.value(g).clone()),
    ))
}

/// Liberal and conservative class distributions for every row.
pub fn stance_heads(
    x_final: &Matrix,
    params: &ModelParams,
) -> Result<(Matrix, Matrix), ModelError> {
    let mut tape = Tape::new();
    let p = params.bind_frozen(&mut tape);
    let x = tape.constant(x_final.clone());
    let (ll, cl) = head_logits_var(&mut tape, &p, x)?;
    let l = tape.row_softmax(ll)?;
    let c = tape.row_softmax(cl)?;
    Ok((tape.value(l).clone(), tape.value(c).clone()))
}

#[cfg(test)]
mod tests;
