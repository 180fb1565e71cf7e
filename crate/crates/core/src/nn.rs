//! Layer primitives shared by the networks: weight initialization, conv and
//! residual-block containers, and the binding of stored parameters onto a
//! fresh autodiff graph for one forward pass.
//!
//! Parameter discipline: every model exposes its tensors through
//! [`ParamBag::params`] in a fixed order. Binding a pass (`Binder`) inserts
//! leaves in that same order, so optimizer state, gradients, and checkpoint
//! records all align by position as well as by name.

use crate::autograd::{Graph, NodeId};
use crate::tensor::{Real, Tensor};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

/// One Gaussian pair via Box–Muller on 53-bit uniforms. Drawing in f64 keeps
/// the stream identical regardless of the model's element type.
fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    (r * th.cos(), r * th.sin())
}

/// He-style normal init: std = sqrt(2 / fan_in), consuming exactly
/// ceil(numel / 2) RNG pairs.
pub fn kaiming_normal<T: Real>(
    rng: &mut ChaCha8Rng,
    shape: &[usize],
    fan_in: usize,
) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    while data.len() < n {
        let (a, b) = normal_pair(rng);
        data.push(T::from_f64(a * std));
        if data.len() < n {
            data.push(T::from_f64(b * std));
        }
    }
    Tensor::from_vec(shape, data)
}

/// Uniform enumeration of a model's trainable tensors, in a fixed order that
/// matches the leaf order produced by [`Binder`].
pub trait ParamBag<T: Real> {
    fn params(&self) -> Vec<(String, &Tensor<T>)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.numel()).sum()
    }

    fn zero_params(&mut self) {
        for (_, t) in self.params_mut() {
            t.fill(T::zero());
        }
    }
}

/// Builds one forward pass: inserts parameter tensors as graph leaves (in
/// `params()` order) and records their node ids for gradient readout.
pub struct Binder<'g, T: Real> {
    pub graph: &'g mut Graph<T>,
    train: bool,
    ids: Vec<NodeId>,
}

impl<'g, T: Real> Binder<'g, T> {
    pub fn new(graph: &'g mut Graph<T>, train: bool) -> Self {
        Binder {
            graph,
            train,
            ids: Vec::new(),
        }
    }

    /// Bind one parameter tensor; requires gradients only in training mode.
    pub fn param(&mut self, t: &Tensor<T>) -> NodeId {
        let id = self.graph.leaf(t.clone(), self.train);
        self.ids.push(id);
        id
    }

    /// Insert a non-trainable input or constant.
    pub fn constant(&mut self, t: Tensor<T>) -> NodeId {
        self.graph.leaf(t, false)
    }

    /// Leaf ids of every parameter bound so far, in binding order.
    pub fn param_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn into_param_ids(self) -> Vec<NodeId> {
        self.ids
    }
}

/// 3x3 convolution parameters (optionally with fused ReLU).
#[derive(Clone)]
pub struct Conv<T: Real> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub relu: bool,
}

impl<T: Real> Conv<T> {
    pub fn init(rng: &mut ChaCha8Rng, cin: usize, cout: usize, relu: bool) -> Self {
        Conv {
            weight: kaiming_normal(rng, &[cout, cin, 3, 3], cin * 9),
            bias: Tensor::zeros(&[cout]),
            relu,
        }
    }

    /// 1x1 (channel-mixing) convolution.
    pub fn init_pointwise(rng: &mut ChaCha8Rng, cin: usize, cout: usize, relu: bool) -> Self {
        Conv {
            weight: kaiming_normal(rng, &[cout, cin, 1, 1], cin),
            bias: Tensor::zeros(&[cout]),
            relu,
        }
    }

    pub fn apply(&self, b: &mut Binder<T>, x: NodeId) -> NodeId {
        let w = b.param(&self.weight);
        let bias = b.param(&self.bias);
        b.graph.conv2d(x, w, bias, self.relu)
    }

    pub fn push_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    pub fn push_params_mut<'a>(
        &'a mut self,
        prefix: &str,
        out: &mut Vec<(String, &'a mut Tensor<T>)>,
    ) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

/// Residual block: conv+ReLU, conv, add the block input. No normalization,
/// no activation after the sum.
#[derive(Clone)]
pub struct ResBlock<T: Real> {
    pub first: Conv<T>,
    pub second: Conv<T>,
}

impl<T: Real> ResBlock<T> {
    pub fn init(rng: &mut ChaCha8Rng, channels: usize) -> Self {
        ResBlock {
            first: Conv::init(rng, channels, channels, true),
            second: Conv::init(rng, channels, channels, false),
        }
    }

    pub fn apply(&self, b: &mut Binder<T>, x: NodeId) -> NodeId {
        let mid = self.first.apply(b, x);
        let post = self.second.apply(b, mid);
        b.graph.add(post, x)
    }

    pub fn push_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        self.first.push_params(&format!("{prefix}.a"), out);
        self.second.push_params(&format!("{prefix}.b"), out);
    }

    pub fn push_params_mut<'a>(
        &'a mut self,
        prefix: &str,
        out: &mut Vec<(String, &'a mut Tensor<T>)>,
    ) {
        self.first.push_params_mut(&format!("{prefix}.a"), out);
        self.second.push_params_mut(&format!("{prefix}.b"), out);
    }
}

/// Entry conv followed by a chain of residual blocks at constant width.
#[derive(Clone)]
pub struct ConvTower<T: Real> {
    pub entry: Conv<T>,
    pub blocks: Vec<ResBlock<T>>,
}

impl<T: Real> ConvTower<T> {
    pub fn init(
        rng: &mut ChaCha8Rng,
        cin: usize,
        width: usize,
        blocks: usize,
        entry_relu: bool,
    ) -> Self {
        ConvTower {
            entry: Conv::init(rng, cin, width, entry_relu),
            blocks: (0..blocks).map(|_| ResBlock::init(rng, width)).collect(),
        }
    }

    pub fn apply(&self, b: &mut Binder<T>, x: NodeId) -> NodeId {
        let mut cur = self.entry.apply(b, x);
        for blk in &self.blocks {
            cur = blk.apply(b, cur);
        }
        cur
    }

    pub fn push_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        self.entry.push_params(&format!("{prefix}.entry"), out);
        for (i, blk) in self.blocks.iter().enumerate() {
            blk.push_params(&format!("{prefix}.res{i}"), out);
        }
    }

    pub fn push_params_mut<'a>(
        &'a mut self,
        prefix: &str,
        out: &mut Vec<(String, &'a mut Tensor<T>)>,
    ) {
        self.entry.push_params_mut(&format!("{prefix}.entry"), out);
        for (i, blk) in self.blocks.iter_mut().enumerate() {
            blk.push_params_mut(&format!("{prefix}.res{i}"), out);
        }
    }
}
