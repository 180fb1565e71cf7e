//! All-to-One super-resolution network.
//!
//! One parameter set super-resolves any reference view of the light field:
//! a shared per-view feature extractor, a shared pairwise fusion applied to
//! every (reference, auxiliary) combination, a two-stage fusion across the
//! auxiliary stack (view-wise then channel-wise), and a sub-pixel upsampling
//! head whose residual is added to the bicubic upsample of the reference.
//!
//! The All-to-All variant ([`AtaModel`]) is the ablation baseline: all views
//! stacked into one trunk predicting every output at once, sized to match
//! the main model's parameter count.

use crate::autograd::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::lightfield::LightField;
use crate::nn::{Binder, Conv, ConvTower, ParamBag};
use crate::resample::bicubic_upsample;
use crate::tensor::{Real, Tensor};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Architecture hyperparameters. Counts are residual-block depths of the
/// four sub-networks; `channels` is the shared feature width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtoConfig {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub n4: usize,
    pub channels: usize,
    pub alpha: usize,
    pub angular_res: (usize, usize),
}

impl Default for AtoConfig {
    fn default() -> Self {
        AtoConfig {
            n1: 5,
            n2: 2,
            n3: 2,
            n4: 3,
            channels: 64,
            alpha: 2,
            angular_res: (7, 7),
        }
    }
}

impl AtoConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("n1", self.n1),
            ("n2", self.n2),
            ("n3", self.n3),
            ("n4", self.n4),
            ("channels", self.channels),
        ] {
            if v < 1 {
                return Err(Error::BadConfig {
                    key: key.into(),
                    reason: "must be >= 1".into(),
                });
            }
        }
        if self.alpha != 2 && self.alpha != 4 {
            return Err(Error::BadAlpha { alpha: self.alpha });
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

    /// Auxiliary count: every view except the reference.
    pub fn aux_views(&self) -> usize {
        self.views() - 1
    }
}

fn conv_param_count(cin: usize, cout: usize, ks: usize) -> usize {
    cout * cin * ks * ks + cout
}

fn tower_param_count(cin: usize, width: usize, blocks: usize) -> usize {
    conv_param_count(cin, width, 3) + blocks * 2 * conv_param_count(width, width, 3)
}

/// Closed-form trainable-parameter count of [`AtoModel`] for a config.
pub fn ato_param_count(cfg: &AtoConfig) -> usize {
    let c = cfg.channels;
    tower_param_count(1, c, cfg.n1)
        + tower_param_count(2 * c, c, cfg.n2)
        + tower_param_count(cfg.aux_views(), 1, cfg.n3)
        + tower_param_count(c, c, cfg.n4)
        + conv_param_count(c, cfg.alpha * cfg.alpha, 3)
        + conv_param_count(1, 1, 3)
}

/// Parameter container for the All-to-One network.
///
/// `view_feat` runs on every view with one parameter set; `pair_fuse` runs
/// on every (reference, auxiliary) pair with one parameter set; `view_fuse`
/// reduces the auxiliary stack per channel (shared across channels);
/// `chan_fuse` mixes channels; `upsample` + `polish` form the sub-pixel
/// reconstruction head.
#[derive(Clone)]
pub struct AtoModel<T: Real> {
    pub config: AtoConfig,
    pub view_feat: ConvTower<T>,
    pub pair_fuse: ConvTower<T>,
    pub view_fuse: ConvTower<T>,
    pub chan_fuse: ConvTower<T>,
    pub upsample: Conv<T>,
    pub polish: Conv<T>,
}

impl<T: Real> AtoModel<T> {
    pub fn init(config: AtoConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let c = config.channels;
        Ok(AtoModel {
            view_feat: ConvTower::init(rng, 1, c, config.n1, true),
            pair_fuse: ConvTower::init(rng, 2 * c, c, config.n2, true),
            view_fuse: ConvTower::init(rng, config.aux_views(), 1, config.n3, true),
            chan_fuse: ConvTower::init(rng, c, c, config.n4, true),
            upsample: Conv::init(rng, c, config.alpha * config.alpha, false),
            polish: Conv::init(rng, 1, 1, false),
            config,
        })
    }

    /// Per-view features: (V, 1, h, w) → (V, c, h, w), one parameter set.
    pub fn graph_features(&self, b: &mut Binder<T>, views: NodeId) -> NodeId {
        self.view_feat.apply(b, views)
    }

    /// Pairwise fusion of the reference's features with every auxiliary
    /// view's, auxiliaries in raster order: (V, c, h, w) → (V−1, c, h, w).
    pub fn graph_pairs(&self, b: &mut Binder<T>, feats: NodeId, reference: usize) -> NodeId {
        let v = b.graph.value(feats).shape()[0];
        let aux: Vec<usize> = (0..v).filter(|&i| i != reference).collect();
        let stacked = b.graph.pair_stack(feats, reference, &aux);
        self.pair_fuse.apply(b, stacked)
    }

    /// Two-stage fusion of the pair stack: view-wise (per channel, shared
    /// parameters) then channel-wise. (A, c, h, w) → (1, c, h, w).
    pub fn graph_fuse(&self, b: &mut Binder<T>, pair_feats: NodeId) -> NodeId {
        let sh = b.graph.value(pair_feats).shape().to_vec();
        let (a, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
        // Regroup to one view-stack per channel: (A, c, HW) → (c, A, HW).
        let swapped = b.graph.permute(pair_feats, &[a, c, h * w], &[1, 0, 2]);
        let stacks = b.graph.reshape(swapped, &[c, a, h, w]);
        let fused = self.view_fuse.apply(b, stacks);
        let merged = b.graph.reshape(fused, &[1, c, h, w]);
        self.chan_fuse.apply(b, merged)
    }

    /// Sub-pixel reconstruction: fused features (1, c, h, w) plus the
    /// precomputed bicubic upsample of the reference (1, 1, αh, αw).
    pub fn graph_reconstruct(&self, b: &mut Binder<T>, fused: NodeId, skip: NodeId) -> NodeId {
        let expanded = self.upsample.apply(b, fused);
        let shuffled = b.graph.pixel_shuffle(expanded, self.config.alpha);
        let residual = self.polish.apply(b, shuffled);
        b.graph.add(residual, skip)
    }

    /// Full network for one reference view. Binds every parameter in
    /// [`ParamBag::params`] order, so gradient readout aligns by position.
    pub fn graph_forward(
        &self,
        b: &mut Binder<T>,
        views: NodeId,
        reference: usize,
        skip: NodeId,
    ) -> NodeId {
        let feats = self.graph_features(b, views);
        self.graph_forward_from(b, feats, reference, skip)
    }

    /// Forward from precomputed per-view features (inference fast path and
    /// stage-2 input; binds everything except the feature extractor).
    pub fn graph_forward_from(
        &self,
        b: &mut Binder<T>,
        feats: NodeId,
        reference: usize,
        skip: NodeId,
    ) -> NodeId {
        let pairs = self.graph_pairs(b, feats, reference);
        let fused = self.graph_fuse(b, pairs);
        self.graph_reconstruct(b, fused, skip)
    }
}

impl<T: Real> ParamBag<T> for AtoModel<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        self.view_feat.push_params("view_feat", &mut out);
        self.pair_fuse.push_params("pair_fuse", &mut out);
        self.view_fuse.push_params("view_fuse", &mut out);
        self.chan_fuse.push_params("chan_fuse", &mut out);
        self.upsample.push_params("upsample", &mut out);
        self.polish.push_params("polish", &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        self.view_feat.push_params_mut("view_feat", &mut out);
        self.pair_fuse.push_params_mut("pair_fuse", &mut out);
        self.view_fuse.push_params_mut("view_fuse", &mut out);
        self.chan_fuse.push_params_mut("chan_fuse", &mut out);
        self.upsample.push_params_mut("upsample", &mut out);
        self.polish.push_params_mut("polish", &mut out);
        out
    }
}

fn expect_3d<T: Real>(t: &Tensor<T>, channels: usize, context: &str) -> Result<(usize, usize)> {
    let s = t.shape();
    if s.len() != 3 || s[0] != channels {
        return Err(Error::ShapeMismatch {
            context: context.into(),
            expected: vec![channels, 0, 0],
            got: s.to_vec(),
        });
    }
    Ok((s[1], s[2]))
}

/// Feature extraction for a single view: (1, h, w) → (c, h, w).
pub fn extract_view_features<T: Real>(model: &AtoModel<T>, view: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w) = expect_3d(view, 1, "view features input")?;
    let mut g = Graph::new();
    let mut b = Binder::new(&mut g, false);
    let x = b.constant(view.clone().reshaped(&[1, 1, h, w]));
    let y = model.graph_features(&mut b, x);
    Ok(g.value(y).clone().reshaped(&[model.config.channels, h, w]))
}

/// Pairwise fusion of reference and auxiliary features, each (c, h, w).
pub fn fuse_pair<T: Real>(
    model: &AtoModel<T>,
    reference: &Tensor<T>,
    auxiliary: &Tensor<T>,
) -> Result<Tensor<T>> {
    let c = model.config.channels;
    let (h, w) = expect_3d(reference, c, "pair fusion reference")?;
    let (ha, wa) = expect_3d(auxiliary, c, "pair fusion auxiliary")?;
    if (ha, wa) != (h, w) {
        return Err(Error::ShapeMismatch {
            context: "pair fusion auxiliary".into(),
            expected: vec![c, h, w],
            got: auxiliary.shape().to_vec(),
        });
    }
    let mut data = reference.data().to_vec();
    data.extend_from_slice(auxiliary.data());
    let mut g = Graph::new();
    let mut b = Binder::new(&mut g, false);
    let both = b.constant(Tensor::from_vec(&[2, c, h, w], data));
    let stacked = b.graph.pair_stack(both, 0, &[1]);
    let y = model.pair_fuse.apply(&mut b, stacked);
    Ok(g.value(y).clone().reshaped(&[c, h, w]))
}

/// Two-stage fusion of the full auxiliary stack (m_aux, c, h, w) → (c, h, w).
pub fn fuse_views<T: Real>(model: &AtoModel<T>, stack: &Tensor<T>) -> Result<Tensor<T>> {
    let s = stack.shape().to_vec();
    if s.len() != 4 {
        return Err(Error::ShapeMismatch {
            context: "view fusion stack".into(),
            expected: vec![model.config.aux_views(), model.config.channels, 0, 0],
            got: s,
        });
    }
    if s[0] != model.config.aux_views() {
        return Err(Error::BadStackLength {
            expected: model.config.aux_views(),
            got: s[0],
        });
    }
    let (c, h, w) = (s[1], s[2], s[3]);
    let mut g = Graph::new();
    let mut b = Binder::new(&mut g, false);
    let x = b.constant(stack.clone());
    let y = model.graph_fuse(&mut b, x);
    Ok(g.value(y).clone().reshaped(&[c, h, w]))
}

/// Reconstruction head: fused features (c, h, w) and the low-resolution
/// reference view (1, h, w) → super-resolved view (1, αh, αw), unclamped.
pub fn reconstruct_view<T: Real>(
    model: &AtoModel<T>,
    fused: &Tensor<T>,
    lr_view: &Tensor<T>,
) -> Result<Tensor<T>> {
    let c = model.config.channels;
    let (h, w) = expect_3d(fused, c, "reconstruction features")?;
    let (hv, wv) = expect_3d(lr_view, 1, "reconstruction reference view")?;
    if (hv, wv) != (h, w) {
        return Err(Error::ShapeMismatch {
            context: "reconstruction reference view".into(),
            expected: vec![1, h, w],
            got: lr_view.shape().to_vec(),
        });
    }
    let alpha = model.config.alpha;
    let flat = lr_view.clone().reshaped(&[h, w]);
    let skip_img = bicubic_upsample(&flat, alpha)?;
    let mut g = Graph::new();
    let mut b = Binder::new(&mut g, false);
    let x = b.constant(fused.clone().reshaped(&[1, c, h, w]));
    let skip = b.constant(skip_img.reshaped(&[1, 1, alpha * h, alpha * w]));
    let y = model.graph_reconstruct(&mut b, x, skip);
    Ok(g.value(y).clone().reshaped(&[1, alpha * h, alpha * w]))
}

fn check_angular<T: Real>(cfg: &AtoConfig, lf: &LightField<T>) -> Result<()> {
    if lf.angular_res() != cfg.angular_res {
        return Err(Error::ConfigMismatch {
            field: "angular_res".into(),
            model: format!("{:?}", cfg.angular_res),
            input: format!("{:?}", lf.angular_res()),
        });
    }
    Ok(())
}

/// Views as a (V, 1, H, W) batch, raster order — the flat layout of the
/// light field itself.
pub(crate) fn views_batch<T: Real>(lf: &LightField<T>) -> Tensor<T> {
    let (m, n) = lf.angular_res();
    let (h, w) = lf.spatial_res();
    Tensor::from_vec(&[m * n, 1, h, w], lf.data().data().to_vec())
}

/// Bicubic skips for every view as a (V, 1, αH, αW) batch.
fn skips_batch<T: Real>(lf: &LightField<T>, alpha: usize) -> Result<Tensor<T>> {
    let (m, n) = lf.angular_res();
    let (h, w) = lf.spatial_res();
    let mut data = Vec::with_capacity(m * n * alpha * alpha * h * w);
    for mi in 0..m {
        for ni in 0..n {
            let up = bicubic_upsample(&lf.view(mi, ni)?, alpha)?;
            data.extend_from_slice(up.data());
        }
    }
    Ok(Tensor::from_vec(&[m * n, 1, alpha * h, alpha * w], data))
}

/// Super-resolve one reference view; output (1, αH, αW), clamped to [0, 1].
pub fn forward_all_to_one<T: Real>(
    lf_lr: &LightField<T>,
    u_ref: (usize, usize),
    model: &AtoModel<T>,
) -> Result<Tensor<T>> {
    check_angular(&model.config, lf_lr)?;
    let (m, n) = lf_lr.angular_res();
    if u_ref.0 >= m || u_ref.1 >= n {
        return Err(Error::IndexOutOfRange {
            context: "reference view".into(),
            index: vec![u_ref.0, u_ref.1],
            bounds: vec![m, n],
        });
    }
    let (h, w) = lf_lr.spatial_res();
    let alpha = model.config.alpha;
    let reference = u_ref.0 * n + u_ref.1;

    let skip_img = bicubic_upsample(&lf_lr.view(u_ref.0, u_ref.1)?, alpha)?;
    let mut g = Graph::new();
    let mut b = Binder::new(&mut g, false);
    let views = b.constant(views_batch(lf_lr));
    let skip = b.constant(skip_img.reshaped(&[1, 1, alpha * h, alpha * w]));
    let y = model.graph_forward(&mut b, views, reference, skip);
    Ok(g.value(y)
        .clone()
        .reshaped(&[1, alpha * h, alpha * w])
        .clamp01())
}

/// Super-resolve every view, reusing the per-view features across all
/// reference positions. Output light field is (M, N, αH, αW).
pub fn forward_all_views<T: Real>(
    lf_lr: &LightField<T>,
    model: &AtoModel<T>,
) -> Result<LightField<T>> {
    check_angular(&model.config, lf_lr)?;
    let (m, n) = lf_lr.angular_res();
    let (h, w) = lf_lr.spatial_res();
    let alpha = model.config.alpha;

    // Shared features are reference-independent: compute them once.
    let feats = {
        let mut g = Graph::new();
        let mut b = Binder::new(&mut g, false);
        let views = b.constant(views_batch(lf_lr));
        let id = model.graph_features(&mut b, views);
        g.value(id).clone()
    };

    let mut out = LightField::zeros(m, n, alpha * h, alpha * w);
    for mi in 0..m {
        for ni in 0..n {
            let skip_img = bicubic_upsample(&lf_lr.view(mi, ni)?, alpha)?;
            let mut g = Graph::new();
            let mut b = Binder::new(&mut g, false);
            let f = b.constant(feats.clone());
            let skip = b.constant(skip_img.reshaped(&[1, 1, alpha * h, alpha * w]));
            let y = model.graph_forward_from(&mut b, f, mi * n + ni, skip);
            let view = g.value(y).clone().reshaped(&[alpha * h, alpha * w]).clamp01();
            out.set_view(mi, ni, &view)?;
        }
    }
    Ok(out)
}

/// Stack entering the All-to-All trunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtaMode {
    /// Raw views as M·N input channels.
    Image,
    /// Per-view features (shared extractor), concatenated then reduced 1x1.
    Feature,
}

/// All-to-All ablation baseline: a single trunk over the full view stack
/// with per-view sub-pixel heads and per-view bicubic skips, depth chosen
/// so the parameter count matches [`AtoModel`]'s within 5%.
#[derive(Clone)]
pub struct AtaModel<T: Real> {
    pub config: AtoConfig,
    pub mode: AtaMode,
    /// Feature mode only: per-view extractor shaped like the main model's.
    pub view_feat: Option<ConvTower<T>>,
    /// Feature mode only: 1x1 reduction of the concatenated features.
    pub reduce: Option<Conv<T>>,
    pub trunk: ConvTower<T>,
    pub head: Conv<T>,
    pub polish: Conv<T>,
}

impl<T: Real> AtaModel<T> {
    /// Residual-block depth needed to land within 5% of the target count.
    fn solve_depth(target: usize, fixed: usize, per_block: usize) -> Result<usize> {
        let blocks = if target > fixed {
            ((target - fixed) as f64 / per_block as f64).round() as usize
        } else {
            0
        }
        .max(1);
        let total = fixed + blocks * per_block;
        let rel = (total as f64 - target as f64).abs() / target as f64;
        if rel > 0.05 {
            return Err(Error::Other(format!(
                "cannot match parameter budget: target {target}, best {total} ({rel:.3} off)"
            )));
        }
        Ok(blocks)
    }

    pub fn init(config: AtoConfig, mode: AtaMode, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let c = config.channels;
        let v = config.views();
        let a2 = config.alpha * config.alpha;
        let target = ato_param_count(&config);
        let per_block = 2 * conv_param_count(c, c, 3);
        let head_cost = conv_param_count(c, v * a2, 3) + conv_param_count(1, 1, 3);

        match mode {
            AtaMode::Image => {
                let fixed = conv_param_count(v, c, 3) + head_cost;
                let blocks = Self::solve_depth(target, fixed, per_block)?;
                Ok(AtaModel {
                    view_feat: None,
                    reduce: None,
                    trunk: ConvTower::init(rng, v, c, blocks, true),
                    head: Conv::init(rng, c, v * a2, false),
                    polish: Conv::init(rng, 1, 1, false),
                    config,
                    mode,
                })
            }
            AtaMode::Feature => {
                let fixed = tower_param_count(1, c, config.n1)
                    + conv_param_count(v * c, c, 1)
                    + conv_param_count(c, c, 3)
                    + head_cost;
                let blocks = Self::solve_depth(target, fixed, per_block)?;
                Ok(AtaModel {
                    view_feat: Some(ConvTower::init(rng, 1, c, config.n1, true)),
                    reduce: Some(Conv::init_pointwise(rng, v * c, c, true)),
                    trunk: ConvTower::init(rng, c, c, blocks, true),
                    head: Conv::init(rng, c, v * a2, false),
                    polish: Conv::init(rng, 1, 1, false),
                    config,
                    mode,
                })
            }
        }
    }

    /// Whole-field forward: views (V, 1, h, w) and per-view bicubic skips
    /// (V, 1, αh, αw) → all super-resolved views (V, 1, αh, αw).
    pub fn graph_forward(
        &self,
        b: &mut Binder<T>,
        views: NodeId,
        skips: NodeId,
    ) -> NodeId {
        let sh = b.graph.value(views).shape().to_vec();
        let (v, h, w) = (sh[0], sh[2], sh[3]);
        let alpha = self.config.alpha;
        let c = self.config.channels;

        let trunk_in = match self.mode {
            AtaMode::Image => b.graph.reshape(views, &[1, v, h, w]),
            AtaMode::Feature => {
                let tower = self.view_feat.as_ref().expect("feature mode");
                let feats = tower.apply(b, views);
                let stacked = b.graph.reshape(feats, &[1, v * c, h, w]);
                self.reduce.as_ref().expect("feature mode").apply(b, stacked)
            }
        };
        let deep = self.trunk.apply(b, trunk_in);
        let expanded = self.head.apply(b, deep);
        let shuffled = b.graph.pixel_shuffle(expanded, alpha);
        let per_view = b
            .graph
            .reshape(shuffled, &[v, 1, alpha * h, alpha * w]);
        let residual = self.polish.apply(b, per_view);
        b.graph.add(residual, skips)
    }
}

impl<T: Real> ParamBag<T> for AtaModel<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        if let Some(t) = &self.view_feat {
            t.push_params("view_feat", &mut out);
        }
        if let Some(cv) = &self.reduce {
            cv.push_params("reduce", &mut out);
        }
        self.trunk.push_params("trunk", &mut out);
        self.head.push_params("head", &mut out);
        self.polish.push_params("polish", &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        if let Some(t) = &mut self.view_feat {
            t.push_params_mut("view_feat", &mut out);
        }
        if let Some(cv) = &mut self.reduce {
            cv.push_params_mut("reduce", &mut out);
        }
        self.trunk.push_params_mut("trunk", &mut out);
        self.head.push_params_mut("head", &mut out);
        self.polish.push_params_mut("polish", &mut out);
        out
    }
}

/// All-to-All inference over the whole light field (ablation baseline).
pub fn forward_all_to_all<T: Real>(
    lf_lr: &LightField<T>,
    model: &AtaModel<T>,
) -> Result<LightField<T>> {
    check_angular(&model.config, lf_lr)?;
    let (m, n) = lf_lr.angular_res();
    let (h, w) = lf_lr.spatial_res();
    let alpha = model.config.alpha;

    let mut g = Graph::new();
    let mut b = Binder::new(&mut g, false);
    let views = b.constant(views_batch(lf_lr));
    let skips = b.constant(skips_batch(lf_lr, alpha)?);
    let y = model.graph_forward(&mut b, views, skips);
    let out = g
        .value(y)
        .clone()
        .reshaped(&[m, n, alpha * h, alpha * w])
        .clamp01();
    LightField::new(out)
}
