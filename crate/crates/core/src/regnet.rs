//! Structural-consistency regularization network.
//!
//! Operates on an already super-resolved light field: a shared per-view
//! head extracts shallow features, a chain of alternate spatial-angular
//! convolution layers exchanges information across views, and a shared tail
//! produces a per-view residual added back onto the input. Zeroing the tail
//! makes the whole module an exact pass-through.
//!
//! Layouts: convs run on batched stacks — spatial stages on (V, c, H, W)
//! (one item per view), angular stages on (H·W, c, M, N) (one item per
//! pixel). The two stacks are connected by pure permutations; the canonical
//! spatial/angular stack tensors used in tests live in [`crate::lightfield`].

use crate::autograd::NodeId;
use crate::error::{Error, Result};
use crate::lightfield::LightField;
use crate::nn::{Binder, Conv, ParamBag};
use crate::tensor::{Real, Tensor};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegConfig {
    pub n5: usize,
    pub channels: usize,
    pub angular_res: (usize, usize),
}

impl Default for RegConfig {
    fn default() -> Self {
        RegConfig {
            n5: 3,
            channels: 64,
            angular_res: (7, 7),
        }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n5 < 1 {
            return Err(Error::BadConfig {
                key: "n5".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.channels < 1 {
            return Err(Error::BadConfig {
                key: "channels".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.angular_res.0 < 2 || self.angular_res.1 < 2 {
            return Err(Error::BadConfig {
                key: "angular_res".into(),
                reason: "needs at least 2x2 views".into(),
            });
        }
        Ok(())
    }

    pub fn views(&self) -> usize {
        self.angular_res.0 * self.angular_res.1
    }
}

/// One alternate spatial-angular convolution layer: a spatial 3x3 conv per
/// view, a reshape to angular stacks, an angular 3x3 conv over the (M, N)
/// plane per pixel, and the reshape back. Both convs ReLU; parameters are
/// shared across views and across pixels respectively.
#[derive(Clone)]
pub struct AltConvLayer<T: Real> {
    pub spatial: Conv<T>,
    pub angular: Conv<T>,
}

impl<T: Real> AltConvLayer<T> {
    pub fn init(rng: &mut ChaCha8Rng, channels: usize) -> Self {
        AltConvLayer {
            spatial: Conv::init(rng, channels, channels, true),
            angular: Conv::init(rng, channels, channels, true),
        }
    }

    /// Graph form on the spatial stack (V, c, H, W), with V = m·n.
    pub fn apply(&self, b: &mut Binder<T>, x: NodeId, m: usize, n: usize) -> NodeId {
        let sh = b.graph.value(x).shape().to_vec();
        let (v, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
        assert_eq!(v, m * n, "view axis must factor into the angular grid");
        let s = h * w;
        let spat = self.spatial.apply(b, x);
        // (V, c, S) → (S, c, V): group each pixel's angular patch.
        let ang_in = b.graph.permute(spat, &[v, c, s], &[2, 1, 0]);
        let ang_in = b.graph.reshape(ang_in, &[s, c, m, n]);
        let ang = self.angular.apply(b, ang_in);
        let back = b.graph.permute(ang, &[s, c, v], &[2, 1, 0]);
        b.graph.reshape(back, &[v, c, h, w])
    }

    pub fn push_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        self.spatial.push_params(&format!("{prefix}.spatial"), out);
        self.angular.push_params(&format!("{prefix}.angular"), out);
    }

    pub fn push_params_mut<'a>(
        &'a mut self,
        prefix: &str,
        out: &mut Vec<(String, &'a mut Tensor<T>)>,
    ) {
        self.spatial.push_params_mut(&format!("{prefix}.spatial"), out);
        self.angular.push_params_mut(&format!("{prefix}.angular"), out);
    }
}

/// Parameter container for the regularizer: shared head conv (1 → c), n5
/// alternate layers, shared tail conv (c → 1), global residual add.
#[derive(Clone)]
pub struct RegModel<T: Real> {
    pub config: RegConfig,
    pub head: Conv<T>,
    pub layers: Vec<AltConvLayer<T>>,
    pub tail: Conv<T>,
}

impl<T: Real> RegModel<T> {
    pub fn init(config: RegConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let c = config.channels;
        Ok(RegModel {
            head: Conv::init(rng, 1, c, true),
            layers: (0..config.n5).map(|_| AltConvLayer::init(rng, c)).collect(),
            tail: Conv::init(rng, c, 1, false),
            config,
        })
    }

    /// Whole regularizer on the view batch (V, 1, H, W) → (V, 1, H, W).
    /// Binds every parameter in [`ParamBag::params`] order.
    pub fn graph_forward(&self, b: &mut Binder<T>, views: NodeId) -> NodeId {
        let (m, n) = self.config.angular_res;
        let mut cur = self.head.apply(b, views);
        for layer in &self.layers {
            cur = layer.apply(b, cur, m, n);
        }
        let residual = self.tail.apply(b, cur);
        b.graph.add(residual, views)
    }
}

impl<T: Real> ParamBag<T> for RegModel<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        self.head.push_params("head", &mut out);
        for (i, layer) in self.layers.iter().enumerate() {
            layer.push_params(&format!("alt{i}"), &mut out);
        }
        self.tail.push_params("tail", &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        self.head.push_params_mut("head", &mut out);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.push_params_mut(&format!("alt{i}"), &mut out);
        }
        self.tail.push_params_mut("tail", &mut out);
        out
    }
}

/// Restore cross-view structure of a super-resolved light field. Output is
/// clamped to [0, 1] (inference behavior; the training graph is unclamped).
pub fn regularize<T: Real>(lf_sr: &LightField<T>, model: &RegModel<T>) -> Result<LightField<T>> {
    if lf_sr.angular_res() != model.config.angular_res {
        return Err(Error::ConfigMismatch {
            field: "angular_res".into(),
            model: format!("{:?}", model.config.angular_res),
            input: format!("{:?}", lf_sr.angular_res()),
        });
    }
    let (m, n) = lf_sr.angular_res();
    let (h, w) = lf_sr.spatial_res();
    let mut g = crate::autograd::Graph::new();
    let mut b = Binder::new(&mut g, false);
    let views = b.constant(Tensor::from_vec(
        &[m * n, 1, h, w],
        lf_sr.data().data().to_vec(),
    ));
    let y = model.graph_forward(&mut b, views);
    let out = g.value(y).clone().reshaped(&[m, n, h, w]).clamp01();
    LightField::new(out)
}
