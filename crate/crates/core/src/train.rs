//! Two-stage training: the fusion network first (per-view reconstruction
//! loss on randomly sampled patches), then the regularizer on the frozen
//! first stage's outputs (whole-field loss plus the EPI-gradient term).
//!
//! Runs are deterministic: one ChaCha stream drives initialization and patch
//! sampling, every reduction is sequential, and checkpoints carry the
//! optimizer moments plus the RNG position so a resumed run reproduces the
//! uninterrupted loss trace bit-exactly.

use crate::ato::{views_batch, AtoConfig, AtoModel};
use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainState};
use crate::error::{Error, Result};
use crate::lightfield::LightField;
use crate::loss::{graph_stage2_loss, LossComponent, LossValue};
use crate::nn::{Binder, ParamBag};
use crate::regnet::{RegConfig, RegModel};
use crate::resample::{bicubic_downsample, bicubic_upsample};
use crate::tensor::{Real, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub stage: u8,
    pub lr_init: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub batch_size: usize,
    pub patch_hr: usize,
    pub alpha: usize,
    pub angular_res: (usize, usize),
    pub seed: u64,
    pub epochs: usize,
    pub lambda_epi: f64,
    pub checkpoint_every: usize,
    pub keep_checkpoints: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage: 1,
            lr_init: 1e-4,
            lr_decay: 0.5,
            lr_decay_every: 250,
            batch_size: 1,
            patch_hr: 64,
            alpha: 2,
            angular_res: (7, 7),
            seed: 0,
            epochs: 500,
            lambda_epi: 1.0,
            checkpoint_every: 50,
            keep_checkpoints: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stage != 1 && self.stage != 2 {
            return Err(Error::BadConfig {
                key: "stage".into(),
                reason: "must be 1 or 2".into(),
            });
        }
        if self.alpha != 2 && self.alpha != 4 {
            return Err(Error::BadAlpha { alpha: self.alpha });
        }
        for (key, ok) in [
            ("lr_init", self.lr_init > 0.0),
            ("lr_decay", self.lr_decay > 0.0),
            ("lr_decay_every", self.lr_decay_every > 0),
            ("batch_size", self.batch_size == 1),
            ("patch_hr", self.patch_hr > 0),
            ("lambda_epi", self.lambda_epi >= 0.0),
            ("checkpoint_every", self.checkpoint_every > 0),
            ("keep_checkpoints", self.keep_checkpoints > 0),
        ] {
            if !ok {
                return Err(Error::BadConfig {
                    key: key.into(),
                    reason: "out of range (batch size is fixed at 1)".into(),
                });
            }
        }
        if self.patch_hr % self.alpha != 0 {
            return Err(Error::NotDivisible {
                h: self.patch_hr,
                w: self.patch_hr,
                alpha: self.alpha,
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

    /// Step-decayed learning rate for a given epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_init * self.lr_decay.powi((epoch / self.lr_decay_every) as i32)
    }
}

/// One optimizer step record; `loss` carries the component breakdown.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub iteration: u64,
    pub lr: f64,
    pub loss: LossValue,
}

/// Adam with bias correction. Moments are kept in the model's sample type so
/// the in-memory state always equals what a checkpoint stores.
pub struct Adam<T: Real> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new<B: ParamBag<T>>(bag: &B) -> Self {
        let shapes: Vec<Vec<usize>> = bag
            .params()
            .iter()
            .map(|(_, t)| t.shape().to_vec())
            .collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// One update over all parameters; `grads` aligned with `params_mut()`.
    pub fn update<B: ParamBag<T>>(&mut self, bag: &mut B, grads: &[Tensor<T>], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (slot, (_, param)) in bag.params_mut().into_iter().enumerate() {
            let g = grads[slot].data();
            let m = self.m[slot].data_mut();
            let v = self.v[slot].data_mut();
            let p = param.data_mut();
            for i in 0..p.len() {
                let gi = g[i].as_f64();
                let mi = self.beta1 * m[i].as_f64() + (1.0 - self.beta1) * gi;
                let vi = self.beta2 * v[i].as_f64() + (1.0 - self.beta2) * gi * gi;
                m[i] = T::from_f64(mi);
                v[i] = T::from_f64(vi);
                let update = lr * (m[i].as_f64() / bc1)
                    / ((v[i].as_f64() / bc2).sqrt() + self.eps);
                p[i] = T::from_f64(p[i].as_f64() - update);
            }
        }
    }
}

/// Crop a random HR patch from every view, downsample it to make the LR
/// input, and draw a reference view. Draw order is pinned: patch row, patch
/// column, then reference row, reference column.
pub fn sample_training_item<T: Real>(
    scene_hr: &LightField<T>,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(LightField<T>, LightField<T>, (usize, usize))> {
    let (m, n) = scene_hr.angular_res();
    let (h, w) = scene_hr.spatial_res();
    let p = cfg.patch_hr;
    if h < p || w < p {
        return Err(Error::SceneTooSmall { h, w, patch: p });
    }
    let y0 = rng.gen_range(0..=h - p);
    let x0 = rng.gen_range(0..=w - p);
    let m_ref = rng.gen_range(0..m);
    let n_ref = rng.gen_range(0..n);

    let mut hr = LightField::zeros(m, n, p, p);
    let mut lr = LightField::zeros(m, n, p / cfg.alpha, p / cfg.alpha);
    for mi in 0..m {
        for ni in 0..n {
            let full = scene_hr.view(mi, ni)?;
            let crop = Tensor::from_fn(&[p, p], |i| {
                let (y, x) = (i / p, i % p);
                full.get(&[y0 + y, x0 + x])
            });
            lr.set_view(mi, ni, &bicubic_downsample(&crop, cfg.alpha)?)?;
            hr.set_view(mi, ni, &crop)?;
        }
    }
    Ok((lr, hr, (m_ref, n_ref)))
}

/// Crop spatially aligned HR patches from an (input, target) field pair.
/// Draw order: patch row, then patch column.
pub fn sample_patch_pair<T: Real>(
    input: &LightField<T>,
    target: &LightField<T>,
    patch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(LightField<T>, LightField<T>)> {
    if input.data().shape() != target.data().shape() {
        return Err(Error::ShapeMismatch {
            context: "patch pair".into(),
            expected: target.data().shape().to_vec(),
            got: input.data().shape().to_vec(),
        });
    }
    let (m, n) = input.angular_res();
    let (h, w) = input.spatial_res();
    if h < patch || w < patch {
        return Err(Error::SceneTooSmall { h, w, patch });
    }
    let y0 = rng.gen_range(0..=h - patch);
    let x0 = rng.gen_range(0..=w - patch);
    let crop = |lf: &LightField<T>| -> Result<LightField<T>> {
        let mut out = LightField::zeros(m, n, patch, patch);
        for mi in 0..m {
            for ni in 0..n {
                let full = lf.view(mi, ni)?;
                let c = Tensor::from_fn(&[patch, patch], |i| {
                    full.get(&[y0 + i / patch, x0 + i % patch])
                });
                out.set_view(mi, ni, &c)?;
            }
        }
        Ok(out)
    };
    Ok((crop(input)?, crop(target)?))
}

fn word_pos_parts(rng: &ChaCha8Rng) -> (u64, u64) {
    let pos = rng.get_word_pos();
    (pos as u64, (pos >> 64) as u64)
}

fn grads_for<T: Real>(
    g: &crate::autograd::Graph<T>,
    ids: &[crate::autograd::NodeId],
) -> Vec<Tensor<T>> {
    ids.iter()
        .map(|id| {
            g.grad(*id)
                .cloned()
                .expect("every bound parameter reaches the loss")
        })
        .collect()
}

fn adam_tensors<'a, T: Real, B: ParamBag<T>>(
    bag: &'a B,
    adam: &'a Adam<T>,
) -> Vec<(String, &'a Tensor<T>)> {
    let mut out = bag.params();
    let names: Vec<String> = out.iter().map(|(n, _)| n.clone()).collect();
    for (i, name) in names.iter().enumerate() {
        out.push((format!("adam.m.{name}"), &adam.m[i]));
    }
    for (i, name) in names.iter().enumerate() {
        out.push((format!("adam.v.{name}"), &adam.v[i]));
    }
    out
}

fn restore_adam<T: Real, B: ParamBag<T>>(
    ckpt: &Checkpoint,
    bag: &B,
    adam: &mut Adam<T>,
) -> Result<()> {
    for (slot, (name, _)) in bag.params().iter().enumerate() {
        for (prefix, dst) in [("adam.m", &mut adam.m), ("adam.v", &mut adam.v)] {
            let stored = ckpt.tensor(&format!("{prefix}.{name}"))?;
            if stored.shape() != dst[slot].shape() {
                return Err(Error::TensorShapeDisagreement {
                    name: format!("{prefix}.{name}"),
                    header: stored.shape().to_vec(),
                    model: dst[slot].shape().to_vec(),
                });
            }
            for (d, s) in dst[slot].data_mut().iter_mut().zip(stored.data()) {
                *d = T::from_f64(*s as f64);
            }
        }
    }
    Ok(())
}

/// Keep only the newest `keep` rotating checkpoints with the given prefix.
fn prune_checkpoints(dir: &Path, prefix: &str, keep: usize) -> Result<()> {
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(".ckpt"))
        })
        .collect();
    found.sort();
    while found.len() > keep {
        let victim = found.remove(0);
        std::fs::remove_file(&victim)
            .map_err(|e| Error::io(format!("removing {}", victim.display()), e))?;
    }
    Ok(())
}

/// Stage-1 training state: model, optimizer, and the sampling stream.
pub struct Stage1Trainer {
    pub cfg: TrainConfig,
    pub model: AtoModel<f32>,
    pub adam: Adam<f32>,
    pub rng: ChaCha8Rng,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed optimizer steps.
    pub iteration: u64,
}

impl Stage1Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.stage != 1 {
            return Err(Error::BadConfig {
                key: "stage".into(),
                reason: "stage-1 trainer requires stage = 1".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let model_cfg = AtoConfig {
            alpha: cfg.alpha,
            angular_res: cfg.angular_res,
            ..AtoConfig::default()
        };
        let model = AtoModel::init(model_cfg, &mut rng)?;
        let adam = Adam::new(&model);
        Ok(Stage1Trainer {
            cfg,
            model,
            adam,
            rng,
            epoch: 0,
            iteration: 0,
        })
    }

    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        let ckpt = load_checkpoint(path)?;
        if ckpt.header.kind != "ato" {
            return Err(Error::Other(format!(
                "expected an \"ato\" checkpoint, found {:?}",
                ckpt.header.kind
            )));
        }
        let cfg: TrainConfig = serde_json::from_value(ckpt.header.config["train"].clone())
            .map_err(|e| Error::json("decoding training config", e))?;
        let model_cfg: AtoConfig = serde_json::from_value(ckpt.header.config["model"].clone())
            .map_err(|e| Error::json("decoding model config", e))?;
        cfg.validate()?;
        let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut model = AtoModel::init(model_cfg, &mut seed_rng)?;
        ckpt.load_into(&mut model)?;
        let mut adam = Adam::new(&model);
        let state = ckpt
            .header
            .train
            .clone()
            .ok_or_else(|| Error::Other("checkpoint lacks training state".into()))?;
        restore_adam(&ckpt, &model, &mut adam)?;
        adam.step = state.step;
        let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
        rng.set_word_pos(
            (state.rng_word_pos.0 as u128) | ((state.rng_word_pos.1 as u128) << 64),
        );
        Ok(Stage1Trainer {
            cfg,
            model,
            adam,
            rng,
            epoch: state.epoch,
            iteration: state.step,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let state = TrainState {
            epoch: self.epoch,
            step: self.adam.step,
            rng_seed: self.cfg.seed,
            rng_word_pos: word_pos_parts(&self.rng),
        };
        let config = serde_json::json!({
            "model": self.model.config,
            "train": self.cfg,
        });
        let tensors = adam_tensors(&self.model, &self.adam);
        save_checkpoint(path, "ato", config, Some(state), &tensors)
    }

    /// One pass over the scenes: one random patch and one optimizer step per
    /// scene. Appends to `trace` and increments the epoch counter.
    pub fn train_epoch(
        &mut self,
        scenes: &[LightField<f32>],
        trace: &mut Vec<TraceEntry>,
    ) -> Result<()> {
        if scenes.is_empty() {
            return Err(Error::Other("training needs at least one scene".into()));
        }
        let lr = self.cfg.lr_at(self.epoch);
        for scene in scenes {
            if scene.angular_res() != self.cfg.angular_res {
                return Err(Error::ConfigMismatch {
                    field: "angular_res".into(),
                    model: format!("{:?}", self.cfg.angular_res),
                    input: format!("{:?}", scene.angular_res()),
                });
            }
            let (lr_patch, hr_patch, u_ref) =
                sample_training_item(scene, &self.cfg, &mut self.rng)?;
            let skip = bicubic_upsample(&lr_patch.view(u_ref.0, u_ref.1)?, self.cfg.alpha)?;
            let gt = hr_patch.view(u_ref.0, u_ref.1)?;
            let p = self.cfg.patch_hr;

            let mut g = crate::autograd::Graph::new();
            let mut b = Binder::new(&mut g, true);
            let views = b.constant(views_batch(&lr_patch));
            let skip_id = b.constant(skip.reshaped(&[1, 1, p, p]));
            let reference = u_ref.0 * self.cfg.angular_res.1 + u_ref.1;
            let pred = self.model.graph_forward(&mut b, views, reference, skip_id);
            let gt_id = b.constant(gt.reshaped(&[1, 1, p, p]));
            let ids = b.into_param_ids();
            let loss_id = g.l1_loss(pred, gt_id);

            let value = g.value(loss_id).data()[0] as f64;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: self.iteration as usize,
                    value,
                });
            }
            g.backward(loss_id);
            let grads = grads_for(&g, &ids);
            drop(g);
            self.adam.update(&mut self.model, &grads, lr);
            self.iteration += 1;
            trace.push(TraceEntry {
                epoch: self.epoch,
                iteration: self.iteration,
                lr,
                loss: LossValue::from_components(vec![LossComponent {
                    name: "l_v".into(),
                    raw: value,
                    weight: 1.0,
                }]),
            });
        }
        self.epoch += 1;
        Ok(())
    }
}

/// Stage-2 training state for the regularizer. The fusion network is not
/// part of this struct: its outputs enter as fixed training inputs.
pub struct Stage2Trainer {
    pub cfg: TrainConfig,
    pub model: RegModel<f32>,
    pub adam: Adam<f32>,
    pub rng: ChaCha8Rng,
    pub epoch: usize,
    pub iteration: u64,
}

impl Stage2Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.stage != 2 {
            return Err(Error::BadConfig {
                key: "stage".into(),
                reason: "stage-2 trainer requires stage = 2".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let model_cfg = RegConfig {
            angular_res: cfg.angular_res,
            ..RegConfig::default()
        };
        let model = RegModel::init(model_cfg, &mut rng)?;
        let adam = Adam::new(&model);
        Ok(Stage2Trainer {
            cfg,
            model,
            adam,
            rng,
            epoch: 0,
            iteration: 0,
        })
    }

    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        let ckpt = load_checkpoint(path)?;
        if ckpt.header.kind != "reg" {
            return Err(Error::Other(format!(
                "expected a \"reg\" checkpoint, found {:?}",
                ckpt.header.kind
            )));
        }
        let cfg: TrainConfig = serde_json::from_value(ckpt.header.config["train"].clone())
            .map_err(|e| Error::json("decoding training config", e))?;
        let model_cfg: RegConfig = serde_json::from_value(ckpt.header.config["model"].clone())
            .map_err(|e| Error::json("decoding model config", e))?;
        cfg.validate()?;
        let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut model = RegModel::init(model_cfg, &mut seed_rng)?;
        ckpt.load_into(&mut model)?;
        let mut adam = Adam::new(&model);
        let state = ckpt
            .header
            .train
            .clone()
            .ok_or_else(|| Error::Other("checkpoint lacks training state".into()))?;
        restore_adam(&ckpt, &model, &mut adam)?;
        adam.step = state.step;
        let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
        rng.set_word_pos(
            (state.rng_word_pos.0 as u128) | ((state.rng_word_pos.1 as u128) << 64),
        );
        Ok(Stage2Trainer {
            cfg,
            model,
            adam,
            rng,
            epoch: state.epoch,
            iteration: state.step,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let state = TrainState {
            epoch: self.epoch,
            step: self.adam.step,
            rng_seed: self.cfg.seed,
            rng_word_pos: word_pos_parts(&self.rng),
        };
        let config = serde_json::json!({
            "model": self.model.config,
            "train": self.cfg,
        });
        let tensors = adam_tensors(&self.model, &self.adam);
        save_checkpoint(path, "reg", config, Some(state), &tensors)
    }

    /// One pass over precomputed (intermediate, ground-truth) pairs: one
    /// aligned patch and one optimizer step per pair.
    pub fn train_epoch(
        &mut self,
        pairs: &[(LightField<f32>, LightField<f32>)],
        trace: &mut Vec<TraceEntry>,
    ) -> Result<()> {
        if pairs.is_empty() {
            return Err(Error::Other("training needs at least one scene".into()));
        }
        let lr = self.cfg.lr_at(self.epoch);
        let (m, n) = self.cfg.angular_res;
        for (inter, gt) in pairs {
            if inter.angular_res() != self.cfg.angular_res {
                return Err(Error::ConfigMismatch {
                    field: "angular_res".into(),
                    model: format!("{:?}", self.cfg.angular_res),
                    input: format!("{:?}", inter.angular_res()),
                });
            }
            let (in_patch, gt_patch) =
                sample_patch_pair(inter, gt, self.cfg.patch_hr, &mut self.rng)?;
            let p = self.cfg.patch_hr;

            let mut g = crate::autograd::Graph::new();
            let mut b = Binder::new(&mut g, true);
            let views = b.constant(views_batch(&in_patch));
            let pred = self.model.graph_forward(&mut b, views);
            let gt_id = b.constant(views_batch(&gt_patch));
            let ids = b.into_param_ids();
            let (total, l_r, l_e) = graph_stage2_loss(
                &mut g,
                pred,
                gt_id,
                (m, n, p, p),
                self.cfg.lambda_epi,
            );

            let value = g.value(total).data()[0] as f64;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: self.iteration as usize,
                    value,
                });
            }
            let raw_r = g.value(l_r).data()[0] as f64;
            let raw_e = g.value(l_e).data()[0] as f64;
            g.backward(total);
            let grads = grads_for(&g, &ids);
            drop(g);
            self.adam.update(&mut self.model, &grads, lr);
            self.iteration += 1;
            trace.push(TraceEntry {
                epoch: self.epoch,
                iteration: self.iteration,
                lr,
                loss: LossValue::from_components(vec![
                    LossComponent {
                        name: "l_r".into(),
                        raw: raw_r,
                        weight: 1.0,
                    },
                    LossComponent {
                        name: "l_e".into(),
                        raw: raw_e,
                        weight: self.cfg.lambda_epi,
                    },
                ]),
            });
        }
        self.epoch += 1;
        Ok(())
    }
}

/// Downsample every view of an HR scene by `alpha`.
pub fn downsample_scene<T: Real>(scene_hr: &LightField<T>, alpha: usize) -> Result<LightField<T>> {
    let (m, n) = scene_hr.angular_res();
    let (h, w) = scene_hr.spatial_res();
    let mut out = LightField::zeros(m, n, h / alpha, w / alpha);
    for mi in 0..m {
        for ni in 0..n {
            out.set_view(mi, ni, &bicubic_downsample(&scene_hr.view(mi, ni)?, alpha)?)?;
        }
    }
    Ok(out)
}

/// Stage-2 inputs: run the frozen fusion network over each scene's LR
/// version once, pairing the intermediate result with the HR ground truth.
pub fn prepare_stage2_pairs(
    scenes_hr: &[LightField<f32>],
    ato: &AtoModel<f32>,
) -> Result<Vec<(LightField<f32>, LightField<f32>)>> {
    let mut pairs = Vec::with_capacity(scenes_hr.len());
    for scene in scenes_hr {
        let lr = downsample_scene(scene, ato.config.alpha)?;
        let inter = crate::ato::forward_all_views(&lr, ato)?;
        pairs.push((inter, scene.clone()));
    }
    Ok(pairs)
}

fn rotating_save(
    trainer_save: impl Fn(&Path) -> Result<()>,
    dir: &Path,
    prefix: &str,
    epoch: usize,
    keep: usize,
) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(format!("{prefix}-epoch{epoch:06}.ckpt"));
    trainer_save(&path)?;
    prune_checkpoints(dir, &format!("{prefix}-epoch"), keep)
}

/// Full stage-1 run: initialize from the seed, iterate epochs, rotate
/// periodic checkpoints, and write a final `ato.ckpt`. With zero epochs the
/// initialized model is checkpointed as-is.
pub fn train_stage1(
    scenes: &[LightField<f32>],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<(AtoModel<f32>, Vec<TraceEntry>)> {
    let mut trainer = Stage1Trainer::new(*cfg)?;
    let mut trace = Vec::new();
    for _ in 0..cfg.epochs {
        trainer.train_epoch(scenes, &mut trace)?;
        if let Some(dir) = out_dir {
            if trainer.epoch % cfg.checkpoint_every == 0 {
                rotating_save(
                    |p| trainer.save(p),
                    dir,
                    "stage1",
                    trainer.epoch,
                    cfg.keep_checkpoints,
                )?;
            }
        }
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        trainer.save(&dir.join("ato.ckpt"))?;
    }
    Ok((trainer.model, trace))
}

/// Full stage-2 run against a frozen fusion network; writes `reg.ckpt`.
pub fn train_stage2(
    scenes_hr: &[LightField<f32>],
    ato: &AtoModel<f32>,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<(RegModel<f32>, Vec<TraceEntry>)> {
    let mut trainer = Stage2Trainer::new(*cfg)?;
    let pairs = prepare_stage2_pairs(scenes_hr, ato)?;
    let mut trace = Vec::new();
    for _ in 0..cfg.epochs {
        trainer.train_epoch(&pairs, &mut trace)?;
        if let Some(dir) = out_dir {
            if trainer.epoch % cfg.checkpoint_every == 0 {
                rotating_save(
                    |p| trainer.save(p),
                    dir,
                    "stage2",
                    trainer.epoch,
                    cfg.keep_checkpoints,
                )?;
            }
        }
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        trainer.save(&dir.join("reg.ckpt"))?;
    }
    Ok((trainer.model, trace))
}
