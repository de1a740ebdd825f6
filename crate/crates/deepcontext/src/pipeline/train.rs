//! Staged training: scene classification first, then per-template
//! transformation networks initialized from the trained trunk, then the
//! per-template context networks. Each stage pretrains on hybrid data and
//! finetunes on the base set.

use super::nets::{
    build_classifier, build_rotation_net, build_translation_net, volume_to_tensor, ContextNet,
    ModelSet, TrunkSpec,
};
use super::{encode_box_offset, offset_to_cell, yaw_to_bin, Alignment};
use crate::error::{Error, Result};
use crate::geometry::{
    backproject_depth, load_depth_png, normalize_yaw, DepthImage, RigidTransform,
};
use crate::nn::ops::{smooth_l1, softmax_cross_entropy};
use crate::nn::{Net, SgdConfig, Tensor};
use crate::scene_gen::DatasetManifest;
use crate::templates::{
    load_annotation, match_annotation_to_template, SceneAnnotation, SceneTemplate, TemplateName,
};
use crate::tsdf::{compute_tsdf, GridConfig, TsdfVolume};
use crate::derive_seed;
use glam::{DMat3, DVec3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Depth pixels live either in memory (small runs) or on disk and are
/// reloaded per visit; a decoded frame is tiny compared to the forward pass.
#[derive(Debug, Clone)]
pub enum DepthSource {
    Memory(DepthImage),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct TrainScene {
    pub depth: DepthSource,
    pub annotation: SceneAnnotation,
}

impl TrainScene {
    pub fn depth(&self) -> Result<DepthImage> {
        match &self.depth {
            DepthSource::Memory(d) => Ok(d.clone()),
            DepthSource::File(p) => load_depth_png(p),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainData {
    pub hybrid: Vec<TrainScene>,
    pub real: Vec<TrainScene>,
}

impl TrainData {
    /// Loads the scenes of one split as file-backed training scenes.
    pub fn scenes_from_manifest(
        dir: impl AsRef<Path>,
        manifest: &DatasetManifest,
        split: &str,
    ) -> Result<Vec<TrainScene>> {
        let dir = dir.as_ref();
        manifest
            .split(split)
            .map(|entry| {
                Ok(TrainScene {
                    depth: DepthSource::File(dir.join(&entry.depth)),
                    annotation: load_annotation(dir.join(&entry.annotation))?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StageSchedule {
    /// Examples drawn from the hybrid set during pretraining.
    pub hybrid_examples: usize,
    /// Full passes over the base training split during finetuning.
    pub real_epochs: usize,
    pub lr: f64,
    pub finetune_lr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub micro_batch: usize,
    /// Micro-batches whose gradients accumulate into one weight update.
    pub accum: usize,
    pub momentum: f64,
    /// Weight of the box-offset regression loss.
    pub lambda: f64,
    /// Rotation augmentation, degrees.
    pub rot_noise_deg: f64,
    /// Yaw augmentation range for the classifier and rotation stages,
    /// degrees. Both tasks are label-equivariant under input yaw (the class
    /// is invariant, the rotation label shifts with it), so training with
    /// the full circle (180) multiplies effective data coverage; tiny
    /// datasets need that for the 36 rotation bins.
    pub rotation_aug_deg: f64,
    /// Translation augmentation as a fraction of the cloud extent.
    pub trans_noise_frac: f64,
    /// Extra offset noise fed to the context stage, meters per axis
    /// (matches the translation lattice quantization).
    pub offset_noise: f64,
    pub trunk: TrunkSpec,
    pub scene_grid: GridConfig,
    pub template_grid: GridConfig,
    pub classifier: StageSchedule,
    /// Per-template schedules.
    pub rotation: StageSchedule,
    pub translation: StageSchedule,
    pub context: StageSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let scene_grid = crate::tsdf::desk_grid();
        let template_grid = scene_grid.with_origin(DVec3::new(-3.2, -3.2, -1.2));
        Self {
            seed: 0,
            micro_batch: 24,
            accum: 4,
            momentum: 0.9,
            lambda: 1.0,
            rot_noise_deg: 10.0,
            rotation_aug_deg: 10.0,
            trans_noise_frac: 1.0 / 6.0,
            offset_noise: 0.25,
            trunk: TrunkSpec::default(),
            scene_grid,
            template_grid,
            classifier: StageSchedule {
                hybrid_examples: 4032,
                real_epochs: 6,
                lr: 0.012,
                finetune_lr: 0.004,
            },
            rotation: StageSchedule {
                hybrid_examples: 2400,
                real_epochs: 6,
                lr: 0.012,
                finetune_lr: 0.004,
            },
            translation: StageSchedule {
                hybrid_examples: 2400,
                real_epochs: 6,
                lr: 0.012,
                finetune_lr: 0.004,
            },
            context: StageSchedule {
                hybrid_examples: 1800,
                real_epochs: 6,
                lr: 0.01,
                finetune_lr: 0.003,
            },
        }
    }
}

impl TrainConfig {
    pub fn paper_grid(mut self) -> Self {
        self.scene_grid = crate::tsdf::default_grid();
        self.template_grid = self.scene_grid.with_origin(DVec3::new(-3.2, -3.2, -1.2));
        self
    }
}

/// Which stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Scene,
    Transform,
    Context,
}

// ---------------------------------------------------------------------------
// Per-visit scene geometry.

struct SceneView {
    depth: DepthImage,
    centroid: DVec3,
    extent: DVec3,
    major_center: DVec3,
    gt_yaw: f64,
}

fn major_center(ann: &SceneAnnotation, major: &str) -> Option<DVec3> {
    ann.objects
        .iter()
        .filter(|o| o.category == major)
        .max_by(|a, b| a.bbox.volume().partial_cmp(&b.bbox.volume()).expect("finite"))
        .map(|o| o.bbox.center)
}

fn scene_view(scene: &TrainScene) -> Result<SceneView> {
    let depth = scene.depth()?;
    let cloud = backproject_depth(&depth, &scene.annotation.camera)?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let rot = scene.annotation.world_from_camera.rotation;
    let mut lo = DVec3::splat(f64::INFINITY);
    let mut hi = DVec3::splat(f64::NEG_INFINITY);
    let mut sum = DVec3::ZERO;
    for p in &cloud.points {
        let g = rot * *p;
        lo = lo.min(g);
        hi = hi.max(g);
        sum += g;
    }
    let template = scene
        .annotation
        .template()
        .ok_or_else(|| Error::SceneGen("scene has no template label".into()))?;
    let major = major_center(&scene.annotation, template.major_category())
        .ok_or_else(|| Error::NoMajorObject(template.major_category().into()))?;
    let (gt_yaw, _) =
        crate::templates::align_to_major(&scene.annotation, template.major_category())?;
    Ok(SceneView {
        depth,
        centroid: sum / cloud.points.len() as f64,
        extent: hi - lo,
        major_center: major,
        gt_yaw,
    })
}

/// TSDF of the scene in the frame `p -> R(yaw) * (p_G - recenter) - offset`.
fn tsdf_in_frame(
    view: &SceneView,
    ann: &SceneAnnotation,
    yaw: f64,
    recenter: DVec3,
    offset: DVec3,
    grid: &GridConfig,
) -> Result<TsdfVolume> {
    let rot = DMat3::from_rotation_z(yaw) * ann.world_from_camera.rotation;
    let translation = -(DMat3::from_rotation_z(yaw) * recenter) - offset;
    let frame_from_camera = RigidTransform::new(rot, translation);
    compute_tsdf(&view.depth, &ann.camera, &frame_from_camera, grid)
}

// ---------------------------------------------------------------------------
// Example scheduling.

/// Shuffled repeating index stream truncated to `total` (rounded down to
/// whole optimizer updates by the caller).
fn stream(n: usize, total: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::with_capacity(total);
    while out.len() < total {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        out.extend(perm);
    }
    out.truncate(total);
    out
}

/// Epoch-wise passes over all indices.
fn epochs(n: usize, passes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::with_capacity(n * passes);
    for _ in 0..passes {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        out.extend(perm);
    }
    out
}

struct Optimizer {
    base_lr: f64,
    momentum: f64,
    micro_batch: usize,
    accum: usize,
    in_micro: usize,
    micros: usize,
    seen: usize,
    total: usize,
}

impl Optimizer {
    fn new(lr: f64, momentum: f64, micro_batch: usize, accum: usize, total_examples: usize) -> Self {
        Self {
            base_lr: lr,
            momentum,
            micro_batch,
            accum,
            in_micro: 0,
            micros: 0,
            seen: 0,
            total: total_examples.max(1),
        }
    }

    /// Step decay over the phase: full rate for the first 60%, then 1/4,
    /// then 1/20 for the last 10%. Plain SGD bounces around the minimum
    /// otherwise.
    fn lr(&self) -> f64 {
        let progress = self.seen as f64 / self.total as f64;
        let factor = if progress < 0.6 {
            1.0
        } else if progress < 0.9 {
            0.25
        } else {
            0.05
        };
        self.base_lr * factor
    }

    /// Call after each example's backward; steps the params at update
    /// boundaries. Returns true when a weight update happened.
    fn after_example(&mut self, mut step: impl FnMut(&SgdConfig, usize)) -> bool {
        self.seen += 1;
        self.in_micro += 1;
        if self.in_micro == self.micro_batch {
            self.in_micro = 0;
            self.micros += 1;
            if self.micros == self.accum {
                self.micros = 0;
                let cfg = SgdConfig {
                    lr: self.lr(),
                    momentum: self.momentum,
                };
                step(&cfg, self.accum);
                return true;
            }
        }
        false
    }
}

// ---------------------------------------------------------------------------
// Stage 1: scene template classification.

fn train_classifier(data: &TrainData, cfg: &TrainConfig) -> Result<Net<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "stage1", 0));
    let mut net = build_classifier::<f32>(&cfg.trunk, &cfg.scene_grid, &mut rng);
    for (scenes, examples, lr, tag) in [
        (
            &data.hybrid,
            cfg.classifier.hybrid_examples,
            cfg.classifier.lr,
            "pre",
        ),
        (
            &data.real,
            cfg.classifier.real_epochs * data.real.len(),
            cfg.classifier.finetune_lr,
            "fine",
        ),
    ] {
        if scenes.is_empty() || examples == 0 {
            continue;
        }
        let mut srng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "stage1", hash_tag(tag)));
        let order = if tag == "pre" {
            stream(scenes.len(), examples, &mut srng)
        } else {
            epochs(scenes.len(), cfg.classifier.real_epochs, &mut srng)
        };
        let mut opt = Optimizer::new(lr, cfg.momentum, cfg.micro_batch, cfg.accum, order.len());
        let inv_mb = 1.0 / cfg.micro_batch as f32;
        for &idx in &order {
            let scene = &scenes[idx];
            let Some(template) = scene.annotation.template() else {
                continue;
            };
            let Ok(view) = scene_view(scene) else { continue };
            let (mut dyaw, dt) = sample_noise(&mut srng, cfg, &view);
            if cfg.rotation_aug_deg > 0.0 {
                // class labels are yaw-invariant: spin freely
                dyaw = srng
                    .random_range(-cfg.rotation_aug_deg..cfg.rotation_aug_deg)
                    .to_radians();
            }
            let vol = tsdf_in_frame(
                &view,
                &scene.annotation,
                dyaw,
                view.centroid + dt,
                DVec3::ZERO,
                &cfg.scene_grid,
            )?;
            let x = volume_to_tensor::<f32>(&vol);
            let trace = net.forward_trace(&x)?;
            let (_loss, mut grad) = softmax_cross_entropy(trace.output(), template.index())?;
            grad.scale(inv_mb);
            net.backward(&trace, &grad, &[])?;
            opt.after_example(|sgd, accum| crate::nn::sgd_step(&mut net.params_mut(), sgd, accum));
        }
        net.zero_grads();
    }
    Ok(net)
}

fn hash_tag(tag: &str) -> u64 {
    tag.bytes().fold(7u64, |a, b| a.wrapping_mul(31).wrapping_add(b as u64))
}

fn sample_noise(rng: &mut ChaCha8Rng, cfg: &TrainConfig, view: &SceneView) -> (f64, DVec3) {
    let dyaw = if cfg.rot_noise_deg > 0.0 {
        rng.random_range(-cfg.rot_noise_deg..cfg.rot_noise_deg).to_radians()
    } else {
        0.0
    };
    let f = cfg.trans_noise_frac;
    let dt = if f > 0.0 {
        DVec3::new(
            rng.random_range(-view.extent.x * f..view.extent.x * f),
            rng.random_range(-view.extent.y * f..view.extent.y * f),
            rng.random_range(-view.extent.z * f..view.extent.z * f),
        )
    } else {
        DVec3::ZERO
    };
    (dyaw, dt)
}

// ---------------------------------------------------------------------------
// Stage 2: rotation and translation networks per template.

fn scenes_of(scenes: &[TrainScene], name: TemplateName) -> Vec<usize> {
    scenes
        .iter()
        .enumerate()
        .filter(|(_, s)| s.annotation.template() == Some(name))
        .map(|(i, _)| i)
        .collect()
}

enum TransformKind {
    Rotation,
    Translation,
}

fn train_transform_net(
    data: &TrainData,
    cfg: &TrainConfig,
    name: TemplateName,
    trunk: &Net<f32>,
    kind: TransformKind,
) -> Result<Net<f32>> {
    let (tag, schedule) = match kind {
        TransformKind::Rotation => ("rot", &cfg.rotation),
        TransformKind::Translation => ("trans", &cfg.translation),
    };
    let seed = derive_seed(cfg.seed, tag, name.index() as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = match kind {
        TransformKind::Rotation => build_rotation_net::<f32>(&cfg.trunk, &cfg.scene_grid, &mut rng),
        TransformKind::Translation => {
            build_translation_net::<f32>(&cfg.trunk, &cfg.scene_grid, &mut rng)
        }
    };
    net.copy_prefix_from(trunk);

    for (scenes, pretraining) in [(&data.hybrid, true), (&data.real, false)] {
        let of_template = scenes_of(scenes, name);
        if of_template.is_empty() {
            continue;
        }
        let (examples, lr) = if pretraining {
            (schedule.hybrid_examples, schedule.lr)
        } else {
            (schedule.real_epochs * of_template.len(), schedule.finetune_lr)
        };
        if examples == 0 {
            continue;
        }
        let mut srng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, "sched", pretraining as u64));
        let order = if pretraining {
            stream(of_template.len(), examples, &mut srng)
        } else {
            epochs(of_template.len(), schedule.real_epochs, &mut srng)
        };
        let mut opt = Optimizer::new(lr, cfg.momentum, cfg.micro_batch, cfg.accum, order.len());
        let inv_mb = 1.0 / cfg.micro_batch as f32;
        for &oi in &order {
            let scene = &scenes[of_template[oi]];
            let Ok(view) = scene_view(scene) else { continue };
            let (mut dyaw, dt) = sample_noise(&mut srng, cfg, &view);
            if matches!(kind, TransformKind::Rotation) && cfg.rotation_aug_deg > 0.0 {
                dyaw = srng
                    .random_range(-cfg.rotation_aug_deg..cfg.rotation_aug_deg)
                    .to_radians();
            }
            let recenter = view.centroid + dt;
            let (frame_yaw, label) = match kind {
                TransformKind::Rotation => {
                    // input rotated by noise; the aligning yaw shrinks by it
                    let label = yaw_to_bin(view.gt_yaw - dyaw);
                    (dyaw, label)
                }
                TransformKind::Translation => {
                    // input rotated by (imperfect) alignment; the offset of
                    // the major object is the target
                    let applied = normalize_yaw(view.gt_yaw + dyaw);
                    let offset =
                        DMat3::from_rotation_z(applied) * (view.major_center - recenter);
                    (applied, offset_to_cell(offset))
                }
            };
            let vol = tsdf_in_frame(
                &view,
                &scene.annotation,
                frame_yaw,
                recenter,
                DVec3::ZERO,
                &cfg.scene_grid,
            )?;
            let x = volume_to_tensor::<f32>(&vol);
            let trace = net.forward_trace(&x)?;
            let (_loss, mut grad) = softmax_cross_entropy(trace.output(), label)?;
            grad.scale(inv_mb);
            net.backward(&trace, &grad, &[])?;
            opt.after_example(|sgd, accum| crate::nn::sgd_step(&mut net.params_mut(), sgd, accum));
        }
        net.zero_grads();
    }
    Ok(net)
}

// ---------------------------------------------------------------------------
// Stage 3: per-template context networks.

fn train_context_net(
    data: &TrainData,
    cfg: &TrainConfig,
    template: &SceneTemplate,
    trunk: &Net<f32>,
) -> Result<ContextNet<f32>> {
    let seed = derive_seed(cfg.seed, "ctx", template.name.index() as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = ContextNet::<f32>::new(&cfg.trunk, &cfg.template_grid, &mut rng);
    net.scene.copy_prefix_from(trunk);

    let n_anchors = template.anchors.len().max(1);

    for (scenes, pretraining) in [(&data.hybrid, true), (&data.real, false)] {
        let of_template = scenes_of(scenes, template.name);
        if of_template.is_empty() {
            continue;
        }
        let (examples, lr) = if pretraining {
            (cfg.context.hybrid_examples, cfg.context.lr)
        } else {
            (cfg.context.real_epochs * of_template.len(), cfg.context.finetune_lr)
        };
        if examples == 0 {
            continue;
        }
        let mut srng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, "sched", pretraining as u64));
        let order = if pretraining {
            stream(of_template.len(), examples, &mut srng)
        } else {
            epochs(of_template.len(), cfg.context.real_epochs, &mut srng)
        };
        let mut opt = Optimizer::new(lr, cfg.momentum, cfg.micro_batch, cfg.accum, order.len());
        let inv_mb = 1.0 / cfg.micro_batch as f64;
        for &oi in &order {
            let scene = &scenes[of_template[oi]];
            let Ok(view) = scene_view(scene) else { continue };
            let Ok(gt) = match_annotation_to_template(&scene.annotation, template) else {
                continue;
            };
            let (dyaw, dt) = sample_noise(&mut srng, cfg, &view);
            let recenter = view.centroid + dt;
            let applied_yaw = normalize_yaw(view.gt_yaw + dyaw);
            let d_off = DVec3::new(
                srng.random_range(-cfg.offset_noise..cfg.offset_noise),
                srng.random_range(-cfg.offset_noise..cfg.offset_noise),
                srng.random_range(-cfg.offset_noise..cfg.offset_noise),
            );
            let offset = DMat3::from_rotation_z(applied_yaw) * (view.major_center - recenter)
                + d_off;
            let align = Alignment::new(applied_yaw, offset, recenter);

            let vol = tsdf_in_frame(
                &view,
                &scene.annotation,
                applied_yaw,
                recenter,
                offset,
                &cfg.template_grid,
            )?;
            let x = volume_to_tensor::<f32>(&vol);
            let (trace, outputs) = net.forward_trace(&x, template, &cfg.template_grid)?;

            // targets under the alignment actually applied to the volume
            let gt_align = Alignment::new(
                view.gt_yaw,
                DMat3::from_rotation_z(view.gt_yaw) * (view.major_center - view.centroid),
                view.centroid,
            );
            let n_exist = gt.anchors.iter().filter(|a| a.exists).count().max(1);
            let mut grads: Vec<(Option<Tensor<f32>>, Option<Tensor<f32>>)> = Vec::new();
            for ((truth, anchor), out) in
                gt.anchors.iter().zip(&template.anchors).zip(&outputs)
            {
                if out.roi_outside {
                    grads.push((None, None));
                    continue;
                }
                let label = truth.exists as usize;
                let (_l, mut ge) = softmax_cross_entropy(&out.exist_logits, label)?;
                ge.scale((inv_mb / n_anchors as f64) as f32);
                let offset_grad = if let (true, Some(target)) = (truth.exists, &truth.target) {
                    // target box re-expressed under the jittered alignment
                    let g_box = gt_align.invert_box(target);
                    let t_box = align.apply_to_box(&g_box);
                    let enc = encode_box_offset(&anchor.bbox, &t_box);
                    let target_t =
                        Tensor::from_vec(&[6], enc.iter().map(|v| *v as f32).collect())?;
                    let (_sl, mut go) = smooth_l1(&out.offsets, &target_t)?;
                    go.scale((cfg.lambda * inv_mb / n_exist as f64) as f32);
                    Some(go)
                } else {
                    None
                };
                grads.push((Some(ge), offset_grad));
            }
            net.backward(&trace, &grads)?;
            opt.after_example(|sgd, accum| net.sgd_step(sgd, accum));
        }
        net.zero_grads();
    }
    Ok(net)
}

// ---------------------------------------------------------------------------
// Orchestration.

/// Runs the requested stages in order, enforcing that each stage's
/// predecessor weights exist in `models`.
pub fn train_staged(
    data: &TrainData,
    templates: &[SceneTemplate],
    cfg: &TrainConfig,
    models: &mut ModelSet,
    stages: &[Stage],
) -> Result<()> {
    for stage in stages {
        match stage {
            Stage::Scene => {
                models.classifier = Some(train_classifier(data, cfg)?);
            }
            Stage::Transform => {
                let Some(trunk) = models.classifier.as_ref() else {
                    return Err(Error::StageOrder {
                        stage: "transform".into(),
                        missing: "classifier (scene stage)".into(),
                    });
                };
                let trunk = trunk.clone();
                for template in templates {
                    let rot = train_transform_net(
                        data,
                        cfg,
                        template.name,
                        &trunk,
                        TransformKind::Rotation,
                    )?;
                    let trans = train_transform_net(
                        data,
                        cfg,
                        template.name,
                        &trunk,
                        TransformKind::Translation,
                    )?;
                    models.rotation.insert(template.name, rot);
                    models.translation.insert(template.name, trans);
                }
            }
            Stage::Context => {
                if !models.has_transform() {
                    return Err(Error::StageOrder {
                        stage: "context".into(),
                        missing: "rotation/translation (transform stage)".into(),
                    });
                }
                let Some(trunk) = models.classifier.as_ref() else {
                    return Err(Error::StageOrder {
                        stage: "context".into(),
                        missing: "classifier (scene stage)".into(),
                    });
                };
                let trunk = trunk.clone();
                for template in templates {
                    let ctx = train_context_net(data, cfg, template, &trunk)?;
                    models.context.insert(template.name, ctx);
                }
            }
        }
    }
    Ok(())
}
