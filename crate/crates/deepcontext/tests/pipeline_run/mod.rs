//! Shared desk-scale pipeline run for the end-to-end acceptance criteria:
//! generate scenes, synthesize hybrids, train all stages, evaluate held-out
//! scenes. Criterion 9 executes it twice with the same seed.

use deepcontext::derive_seed;
use deepcontext::eval::{
    evaluate_alignment, evaluate_detection, evaluate_layout, evaluate_scene_understanding,
    mean_ap, AlignmentPair, Detection, EvalReport, EvalScene, LayoutScene,
};
use deepcontext::geometry::{save_depth_png, RigidTransform};
use deepcontext::hybrid::{
    object_shortlists, synthesize_with_shortlists, ModelRepository, SynthesisConfig,
};
use deepcontext::nn::Tensor;
use deepcontext::pipeline::{
    estimate_rotation, estimate_translation, ground_truth_alignment, parse_depth_image,
    scene_centroid, train_staged, ContextNet, DepthSource, ModelSet, Stage, StageSchedule,
    TrainConfig, TrainData, TrainScene, TrunkSpec,
};
use deepcontext::scene_gen::{generate_scene, GeneratedScene, GeneratorConfig};
use deepcontext::templates::{
    is_layout_category, learn_template, SceneTemplate, TemplateName,
};
use deepcontext::tsdf::{compute_tsdf, GridConfig, TsdfVolume};
use glam::{DMat3, DVec3};
use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

pub const RUN_SEED: u64 = 20240;
const TRAIN_SCENES: usize = 400;
const EVAL_SCENES: usize = 100;
const HYBRID_MULTIPLIER: usize = 20;

pub struct Metrics {
    pub classification_accuracy: f64,
    pub rotation_accuracy_symmetric: f64,
    pub rotation_accuracy_plain: f64,
    pub translation_mean_error: f64,
    pub mean_ap: f64,
    pub rr_le_rg: bool,
    pub rejected: usize,
}

pub struct PipelineRun {
    pub metrics: Metrics,
    pub digest: String,
    pub report_json: String,
    pub wall_clock: Duration,
    pub single_scene_latency: Duration,
}

static FIRST: OnceLock<PipelineRun> = OnceLock::new();
static SECOND: OnceLock<PipelineRun> = OnceLock::new();

pub fn first_run() -> &'static PipelineRun {
    FIRST.get_or_init(|| execute(RUN_SEED, "run1"))
}

pub fn second_run() -> &'static PipelineRun {
    // force run 1 first so the two trainings never compete for cores while
    // criterion 7's wall clock is being measured
    let _ = first_run();
    SECOND.get_or_init(|| execute(RUN_SEED, "run2"))
}

/// Training configuration for the desk-scale run. Batch sizes and schedules
/// are deliberately smaller than the library defaults (24 x 4) so the run
/// fits the 30-minute budget on two commodity cores.
fn train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        micro_batch: 12,
        accum: 1,
        rotation_aug_deg: 180.0,
        classifier: StageSchedule {
            hybrid_examples: 3600,
            real_epochs: 6,
            lr: 0.012,
            finetune_lr: 0.004,
        },
        rotation: StageSchedule {
            hybrid_examples: 1800,
            real_epochs: 5,
            lr: 0.012,
            finetune_lr: 0.004,
        },
        translation: StageSchedule {
            hybrid_examples: 1800,
            real_epochs: 5,
            lr: 0.012,
            finetune_lr: 0.004,
        },
        context: StageSchedule {
            hybrid_examples: 1500,
            real_epochs: 5,
            lr: 0.01,
            finetune_lr: 0.003,
        },
        ..TrainConfig::default()
    }
}

fn execute(seed: u64, tag: &str) -> PipelineRun {
    let started = Instant::now();
    let work_dir = std::env::temp_dir().join(format!("deepcontext_acceptance_{tag}"));
    let _ = std::fs::remove_dir_all(&work_dir);
    std::fs::create_dir_all(&work_dir).expect("create work dir");

    // --- data generation ----------------------------------------------------
    let gen_cfg = GeneratorConfig {
        seed,
        ..GeneratorConfig::default()
    };
    let mut train_scenes: Vec<GeneratedScene> = Vec::with_capacity(TRAIN_SCENES);
    for i in 0..TRAIN_SCENES {
        train_scenes
            .push(generate_scene(&gen_cfg, derive_seed(seed, "train-scene", i as u64)).unwrap());
    }
    let mut eval_scenes: Vec<GeneratedScene> = Vec::with_capacity(EVAL_SCENES);
    for i in 0..EVAL_SCENES {
        eval_scenes
            .push(generate_scene(&gen_cfg, derive_seed(seed, "eval-scene", i as u64)).unwrap());
    }
    eprintln!("[{tag}] generated {TRAIN_SCENES}+{EVAL_SCENES} scenes in {:.1?}", started.elapsed());

    // --- templates -----------------------------------------------------------
    let mut by_type: BTreeMap<TemplateName, Vec<_>> = BTreeMap::new();
    for s in &train_scenes {
        by_type
            .entry(s.annotation.template().unwrap())
            .or_default()
            .push(s.annotation.clone());
    }
    let templates: Vec<SceneTemplate> = by_type
        .iter()
        .map(|(name, anns)| learn_template(anns, &BTreeMap::new(), *name, seed).unwrap())
        .collect();

    // --- hybrid synthesis (to disk; the training streams from files) ---------
    let t_synth = Instant::now();
    let repo = ModelRepository::builtin();
    let synth_cfg = SynthesisConfig {
        multiplier: HYBRID_MULTIPLIER,
        seed,
        ..SynthesisConfig::default()
    };
    let mut hybrid = Vec::with_capacity(TRAIN_SCENES * HYBRID_MULTIPLIER);
    for (i, s) in train_scenes.iter().enumerate() {
        let shortlists = object_shortlists(&s.depth, &s.annotation, &repo, &synth_cfg).unwrap();
        for m in 0..HYBRID_MULTIPLIER {
            let rng_seed = derive_seed(seed, "hybrid", (i * HYBRID_MULTIPLIER + m) as u64);
            let img = synthesize_with_shortlists(
                &s.depth,
                &s.annotation,
                &repo,
                &shortlists,
                &synth_cfg,
                rng_seed,
            )
            .unwrap();
            let path = work_dir.join(format!("h{i:04}_{m:02}.png"));
            save_depth_png(&img, &path).unwrap();
            hybrid.push(TrainScene {
                depth: DepthSource::File(path),
                annotation: s.annotation.clone(),
            });
        }
    }
    eprintln!(
        "[{tag}] synthesized {} hybrid scenes in {:.1?}",
        hybrid.len(),
        t_synth.elapsed()
    );

    let data = TrainData {
        hybrid,
        real: train_scenes
            .iter()
            .map(|s| TrainScene {
                depth: DepthSource::Memory(s.depth.clone()),
                annotation: s.annotation.clone(),
            })
            .collect(),
    };

    // --- staged training ------------------------------------------------------
    let cfg = train_config(seed);
    let mut models = ModelSet::empty(cfg.trunk, cfg.scene_grid, cfg.template_grid);
    for stage in [Stage::Scene, Stage::Transform, Stage::Context] {
        let t = Instant::now();
        train_staged(&data, &templates, &cfg, &mut models, &[stage]).unwrap();
        eprintln!("[{tag}] stage {stage:?} in {:.1?}", t.elapsed());
    }
    let digest = models.digest();

    // --- evaluation ------------------------------------------------------------
    let t_eval = Instant::now();
    let mut cls_correct = 0usize;
    let mut rejected = 0usize;
    let mut align_pairs_gt_nets = Vec::new();
    let mut align_pairs_pipeline = Vec::new();
    let mut det_scenes = Vec::new();
    let mut layout_scenes = Vec::new();

    for (i, s) in eval_scenes.iter().enumerate() {
        let ann = &s.annotation;
        let gt_name = ann.template().unwrap();
        let parse =
            parse_depth_image(&s.depth, &ann.camera, &ann.world_from_camera, &models, &templates)
                .unwrap();

        // classification accuracy over the classifier's argmax
        let argmax = parse
            .probabilities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if TemplateName::ALL[argmax] == gt_name {
            cls_correct += 1;
        }
        if parse.rejected {
            rejected += 1;
        }

        // transformation quality measured with the ground-truth template's
        // networks, isolating alignment from classification
        let mu = scene_centroid(&s.depth, &ann.camera, &ann.world_from_camera).unwrap();
        let gt_align = ground_truth_alignment(ann, gt_name.major_category(), mu).unwrap();
        let rot_wc = ann.world_from_camera.rotation;
        let scene_frame = RigidTransform::new(rot_wc, -mu);
        let vol = compute_tsdf(&s.depth, &ann.camera, &scene_frame, &cfg.scene_grid).unwrap();
        let (_b, yaw) =
            estimate_rotation(&vol, &models.rotation[&gt_name], &cfg.scene_grid).unwrap();
        let rot = DMat3::from_rotation_z(yaw);
        let rotated = RigidTransform::new(rot * rot_wc, -(rot * mu));
        let vol2 = compute_tsdf(&s.depth, &ann.camera, &rotated, &cfg.scene_grid).unwrap();
        let (_c, offset) =
            estimate_translation(&vol2, &models.translation[&gt_name], &cfg.scene_grid).unwrap();
        align_pairs_gt_nets.push(AlignmentPair {
            predicted_yaw: yaw,
            predicted_translation: offset,
            gt_yaw: gt_align.yaw,
            gt_translation: gt_align.offset_vec(),
            symmetric: true,
        });

        // detections from the full pipeline
        let detections: Vec<Detection> = if parse.rejected {
            Vec::new()
        } else {
            parse
                .anchors
                .iter()
                .filter(|a| !is_layout_category(&a.category))
                .map(|a| Detection {
                    category: a.category.clone(),
                    bbox: a.bbox_camera,
                    score: a.existence,
                })
                .collect()
        };
        det_scenes.push(EvalScene {
            id: format!("eval{i:03}"),
            detections,
            ground_truth: ann.objects.clone(),
        });
        if !parse.rejected {
            layout_scenes.push(LayoutScene {
                predicted: parse
                    .anchors
                    .iter()
                    .filter(|a| is_layout_category(&a.category))
                    .map(|a| (a.category.clone(), a.bbox_camera))
                    .collect(),
                ground_truth: ann.objects.clone(),
            });
            if let (Some(al), Some(pred)) = (&parse.alignment, parse.template) {
                if pred == gt_name {
                    align_pairs_pipeline.push(AlignmentPair {
                        predicted_yaw: al.yaw,
                        predicted_translation: al.offset_vec(),
                        gt_yaw: gt_align.yaw,
                        gt_translation: gt_align.offset_vec(),
                        symmetric: true,
                    });
                }
            }
        }
    }

    let per_category = evaluate_detection(&det_scenes, deepcontext::eval::IOU_THRESHOLD);
    let su = evaluate_scene_understanding(&det_scenes, deepcontext::eval::IOU_THRESHOLD);
    let report = EvalReport {
        mean_ap: mean_ap(&per_category),
        per_category,
        layout: evaluate_layout(&layout_scenes),
        scene_understanding: su,
        alignment: evaluate_alignment(&align_pairs_pipeline),
    };
    let gt_net_alignment = evaluate_alignment(&align_pairs_gt_nets);
    eprintln!(
        "[{tag}] evaluation in {:.1?}: cls {}/{EVAL_SCENES}, rejected {rejected}, \
         rot sym {:.3}, trans {:.3} m, mAP {:.3}, Pg/Rg/Rr {:.3}/{:.3}/{:.3}",
        t_eval.elapsed(),
        cls_correct,
        gt_net_alignment.rotation_accuracy_symmetric,
        gt_net_alignment.translation_mean_error,
        report.mean_ap,
        su.pg,
        su.rg,
        su.rr
    );
    for (cat, ev) in &report.per_category {
        eprintln!("[{tag}]   AP {cat}: {:.3} ({} gt)", ev.ap, ev.ground_truth);
    }

    let wall_clock = started.elapsed();

    // single-scene latency, measured after the clock stops
    let t0 = Instant::now();
    let _ = parse_depth_image(
        &eval_scenes[0].depth,
        &eval_scenes[0].annotation.camera,
        &eval_scenes[0].annotation.world_from_camera,
        &models,
        &templates,
    )
    .unwrap();
    let single_scene_latency = t0.elapsed();

    let _ = std::fs::remove_dir_all(&work_dir);

    PipelineRun {
        metrics: Metrics {
            classification_accuracy: cls_correct as f64 / EVAL_SCENES as f64,
            rotation_accuracy_symmetric: gt_net_alignment.rotation_accuracy_symmetric,
            rotation_accuracy_plain: gt_net_alignment.rotation_accuracy,
            translation_mean_error: gt_net_alignment.translation_mean_error,
            mean_ap: report.mean_ap,
            rr_le_rg: report.scene_understanding.rr <= report.scene_understanding.rg + 1e-12,
            rejected,
        },
        digest,
        report_json: report.to_json(),
        wall_clock,
        single_scene_latency,
    }
}

/// Double-precision gradient check through the composed two-pathway network
/// (used by criterion 2). Returns the worst relative error over smooth
/// probes.
pub fn context_net_grad_check() -> f64 {
    use rand::Rng;
    use rand::SeedableRng;
    let grid = GridConfig::new([8, 8, 8], 0.2, 0.3, DVec3::new(-0.8, -0.8, -0.8)).unwrap();
    let spec = TrunkSpec {
        channels: [2, 3, 4],
        global_dim: 8,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut net = ContextNet::<f64>::new(&spec, &grid, &mut rng);
    let template = SceneTemplate {
        name: TemplateName::SleepingArea,
        major_category: "bed".into(),
        anchors: vec![
            deepcontext::templates::ObjectAnchor {
                id: 0,
                category: "bed".into(),
                bbox: deepcontext::geometry::OrientedBox3::new(
                    DVec3::new(0.0, 0.1, 0.0),
                    DVec3::new(0.9, 0.7, 0.8),
                    0.0,
                )
                .unwrap(),
            },
            deepcontext::templates::ObjectAnchor {
                id: 1,
                category: "nightstand".into(),
                bbox: deepcontext::geometry::OrientedBox3::new(
                    DVec3::new(0.5, -0.3, -0.2),
                    DVec3::new(0.4, 0.4, 0.4),
                    0.0,
                )
                .unwrap(),
            },
        ],
    };
    let vol = TsdfVolume {
        config: grid,
        values: (0..grid.voxel_count())
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect(),
    };
    let input: Tensor<f64> = deepcontext::pipeline::volume_to_tensor(&vol);

    // scalar loss: a fixed random linear functional of every head output,
    // exercising all paths of both anchors
    let coef_exist: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let coef_off: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let loss_of = |net: &ContextNet<f64>, x: &Tensor<f64>| -> f64 {
        let (_, outs) = net.forward_trace(x, &template, &grid).unwrap();
        let mut total = 0.0;
        for (ai, out) in outs.iter().enumerate() {
            total += out
                .exist_logits
                .data()
                .iter()
                .zip(&coef_exist[ai])
                .map(|(v, c)| v * c)
                .sum::<f64>();
            total += out
                .offsets
                .data()
                .iter()
                .zip(&coef_off[ai])
                .map(|(v, c)| v * c)
                .sum::<f64>();
        }
        total
    };

    net.zero_grads();
    let (trace, _outs) = net.forward_trace(&input, &template, &grid).unwrap();
    let grads: Vec<(Option<Tensor<f64>>, Option<Tensor<f64>>)> = (0..2)
        .map(|ai| {
            (
                Some(Tensor::from_vec(&[2], coef_exist[ai].clone()).unwrap()),
                Some(Tensor::from_vec(&[6], coef_off[ai].clone()).unwrap()),
            )
        })
        .collect();
    net.backward(&trace, &grads).unwrap();

    let eps = 1e-3;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut tied = 0usize;
    let n_params = net.params_mut().len();
    for pi in 0..n_params {
        let count = net.params_mut()[pi].value.numel();
        let stride = (count / 6).max(1);
        for i in (0..count).step_by(stride) {
            let analytic = net.params_mut()[pi].grad.data()[i];
            let orig = net.params_mut()[pi].value.data()[i];
            let mut probe = |v: f64| {
                net.params_mut()[pi].value.data_mut()[i] = v;
                let out = loss_of(&net, &input);
                net.params_mut()[pi].value.data_mut()[i] = orig;
                out
            };
            let f0 = probe(orig);
            let fp = probe(orig + eps);
            let fm = probe(orig - eps);
            let d1 = (fp - fm) / (2.0 * eps);
            let d2 = (probe(orig + eps / 2.0) - probe(orig - eps / 2.0)) / eps;
            let fwd = (fp - f0) / eps;
            let bwd = (f0 - fm) / eps;
            let central_smooth = (d1 - d2).abs() <= 1e-3 * d1.abs().max(d2.abs()) + 1e-12;
            let sides_agree =
                (fwd - bwd).abs() <= 2e-2 * fwd.abs().max(bwd.abs()) + 1e-10;
            if !(central_smooth && sides_agree) {
                // a kink sits inside the probe interval; this element cannot
                // be certified at this step size (the small-step prong below
                // still covers it)
                let _ = (fwd, bwd);
                tied += 1;
                continue;
            }
            checked += 1;
            let scale = analytic.abs().max(d1.abs());
            if scale > 1e-6 {
                worst = worst.max((analytic - d1).abs() / scale);
            }
        }
    }
    // kinked elements are excluded; the smooth majority plus the small-step
    // prong below carry the verification
    assert!(checked >= 2 * tied, "too many tied elements: {tied} vs {checked}");
    assert!(checked > 60, "too few smooth probes: {checked}");

    // second prong: at a far smaller step the probes dodge the kink field
    // entirely, so plain central differences must agree tightly everywhere
    let eps = 1e-6;
    let mut worst_small = 0.0f64;
    for pi in 0..n_params {
        let count = net.params_mut()[pi].value.numel();
        let stride = (count / 6).max(1);
        for i in (0..count).step_by(stride) {
            let analytic = net.params_mut()[pi].grad.data()[i];
            let orig = net.params_mut()[pi].value.data()[i];
            let mut probe = |v: f64| {
                net.params_mut()[pi].value.data_mut()[i] = v;
                let out = loss_of(&net, &input);
                net.params_mut()[pi].value.data_mut()[i] = orig;
                out
            };
            let d = (probe(orig + eps) - probe(orig - eps)) / (2.0 * eps);
            let scale = analytic.abs().max(d.abs());
            if scale > 1e-4 {
                worst_small = worst_small.max((analytic - d).abs() / scale);
            }
        }
    }
    assert!(worst_small < 1e-3, "small-step disagreement {worst_small}");
    worst
}
