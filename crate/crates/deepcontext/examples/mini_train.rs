//! Small end-to-end training probe: generates a toy dataset, trains all
//! stages, and prints desk-scale metrics. Used to calibrate schedules.

use deepcontext::eval::{
    evaluate_alignment, evaluate_detection, evaluate_scene_understanding, mean_ap,
    AlignmentPair, Detection, EvalScene, IOU_THRESHOLD,
};
use deepcontext::hybrid::{synthesize_with_shortlists, object_shortlists, ModelRepository, SynthesisConfig};
use deepcontext::pipeline::{
    ground_truth_alignment, parse_depth_image, scene_centroid, yaw_to_bin, ModelSet, Stage,
    TrainConfig, TrainData, TrainScene, DepthSource,
};
use deepcontext::scene_gen::{generate_scene, GeneratorConfig};
use deepcontext::templates::{learn_template, SceneTemplate, TemplateName};
use deepcontext::derive_seed;
use std::collections::BTreeMap;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_scenes: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(120);
    let multiplier: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let stages_arg = args.get(3).map(|s| s.as_str()).unwrap_or("all");

    let t_total = Instant::now();
    let gen_cfg = GeneratorConfig { seed: 1, ..Default::default() };

    let t0 = Instant::now();
    let mut train_scenes = Vec::new();
    let mut test_scenes = Vec::new();
    for i in 0..n_scenes {
        let scene = generate_scene(&gen_cfg, derive_seed(1, "scene", i as u64)).unwrap();
        if i % 5 == 4 {
            test_scenes.push(scene);
        } else {
            train_scenes.push(scene);
        }
    }
    println!("generation: {:?} ({} train / {} test)", t0.elapsed(), train_scenes.len(), test_scenes.len());

    // templates from the training annotations
    let t0 = Instant::now();
    let mut by_type: BTreeMap<TemplateName, Vec<_>> = BTreeMap::new();
    for s in &train_scenes {
        by_type
            .entry(s.annotation.template().unwrap())
            .or_default()
            .push(s.annotation.clone());
    }
    let templates: Vec<SceneTemplate> = by_type
        .iter()
        .map(|(name, anns)| learn_template(anns, &BTreeMap::new(), *name, 7).unwrap())
        .collect();
    println!("templates: {:?} ({} templates)", t0.elapsed(), templates.len());

    // hybrid synthesis
    let t0 = Instant::now();
    let repo = ModelRepository::builtin();
    let synth_cfg = SynthesisConfig { multiplier, ..Default::default() };
    let mut hybrid = Vec::new();
    for (i, s) in train_scenes.iter().enumerate() {
        let shortlists = object_shortlists(&s.depth, &s.annotation, &repo, &synth_cfg).unwrap();
        for m in 0..multiplier {
            let seed = derive_seed(2, "hybrid", (i * multiplier + m) as u64);
            let d = synthesize_with_shortlists(&s.depth, &s.annotation, &repo, &shortlists, &synth_cfg, seed).unwrap();
            hybrid.push(TrainScene { depth: DepthSource::Memory(d), annotation: s.annotation.clone() });
        }
    }
    println!("hybrid synth x{multiplier}: {:?} ({} scenes)", t0.elapsed(), hybrid.len());

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

    let mut cfg = TrainConfig::default();
    cfg.seed = 3;
    cfg.micro_batch = 12;
    cfg.accum = 1;
    cfg.rotation_aug_deg = 180.0;
    cfg.classifier = deepcontext::pipeline::StageSchedule {
        hybrid_examples: 3600,
        real_epochs: 6,
        lr: 0.012,
        finetune_lr: 0.004,
    };
    cfg.rotation = deepcontext::pipeline::StageSchedule {
        hybrid_examples: 2400,
        real_epochs: 6,
        lr: 0.012,
        finetune_lr: 0.004,
    };
    cfg.translation = deepcontext::pipeline::StageSchedule {
        hybrid_examples: 2400,
        real_epochs: 6,
        lr: 0.012,
        finetune_lr: 0.004,
    };
    cfg.context = deepcontext::pipeline::StageSchedule {
        hybrid_examples: 1800,
        real_epochs: 6,
        lr: 0.01,
        finetune_lr: 0.003,
    };

    let mut models = ModelSet::empty(cfg.trunk, cfg.scene_grid, cfg.template_grid);
    let stages: Vec<Stage> = match stages_arg {
        "scene" => vec![Stage::Scene],
        "transform" => vec![Stage::Scene, Stage::Transform],
        _ => vec![Stage::Scene, Stage::Transform, Stage::Context],
    };
    for stage in stages {
        let t0 = Instant::now();
        deepcontext::pipeline::train_staged(&data, &templates, &cfg, &mut models, &[stage]).unwrap();
        println!("stage {stage:?}: {:?}", t0.elapsed());
    }

    // evaluation on held-out scenes
    let t0 = Instant::now();
    let mut cls_correct = 0;
    let mut cls_total = 0;
    let mut accepted = 0;
    let mut align_pairs = Vec::new();
    let mut eval_scenes = Vec::new();
    for (i, s) in test_scenes.iter().enumerate() {
        let gt_name = s.annotation.template().unwrap();
        if !models.is_complete() && models.classifier.is_none() {
            break;
        }
        let mu = scene_centroid(&s.depth, &s.annotation.camera, &s.annotation.world_from_camera).unwrap();
        let gt_align = ground_truth_alignment(&s.annotation, gt_name.major_category(), mu).unwrap();

        if models.is_complete() {
            let parse = parse_depth_image(&s.depth, &s.annotation.camera, &s.annotation.world_from_camera, &models, &templates).unwrap();
            cls_total += 1;
            if !parse.rejected {
                accepted += 1;
                if parse.template == Some(gt_name) {
                    cls_correct += 1;
                }
                if parse.template == Some(gt_name) {
                    let al = parse.alignment.unwrap();
                    align_pairs.push(AlignmentPair {
                        predicted_yaw: al.yaw,
                        predicted_translation: al.offset_vec(),
                        gt_yaw: gt_align.yaw,
                        gt_translation: gt_align.offset_vec(),
                        symmetric: true,
                    });
                }
                let dets: Vec<Detection> = parse
                    .anchors
                    .iter()
                    .filter(|a| !deepcontext::templates::is_layout_category(&a.category))
                    .map(|a| Detection {
                        category: a.category.clone(),
                        bbox: a.bbox_camera,
                        score: a.existence,
                    })
                    .collect();
                eval_scenes.push(EvalScene {
                    id: format!("t{i}"),
                    detections: dets,
                    ground_truth: s.annotation.furniture().cloned().collect(),
                });
            } else {
                eval_scenes.push(EvalScene {
                    id: format!("t{i}"),
                    detections: vec![],
                    ground_truth: s.annotation.furniture().cloned().collect(),
                });
            }
        } else if let Some(cls) = &models.classifier {
            // classifier-only probe: measure argmax accuracy + transforms
            use deepcontext::tsdf::compute_tsdf;
            use deepcontext::geometry::RigidTransform;
            let rot = s.annotation.world_from_camera.rotation;
            let frame = RigidTransform::new(rot, -mu);
            let vol = compute_tsdf(&s.depth, &s.annotation.camera, &frame, &cfg.scene_grid).unwrap();
            let (probs, acc) = deepcontext::pipeline::classify_template(&vol, cls, &cfg.scene_grid).unwrap();
            let argmax = probs.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            cls_total += 1;
            if TemplateName::ALL[argmax] == gt_name {
                cls_correct += 1;
            }
            if acc.is_some() {
                accepted += 1;
            }
            if models.has_transform() {
                let rnet = &models.rotation[&gt_name];
                let (_bin, yaw) = deepcontext::pipeline::estimate_rotation(&vol, rnet, &cfg.scene_grid).unwrap();
                let rot2 = glam::DMat3::from_rotation_z(yaw) * rot;
                let frame2 = RigidTransform::new(rot2, -(glam::DMat3::from_rotation_z(yaw) * mu));
                let vol2 = compute_tsdf(&s.depth, &s.annotation.camera, &frame2, &cfg.scene_grid).unwrap();
                let tnet = &models.translation[&gt_name];
                let (_c, off) = deepcontext::pipeline::estimate_translation(&vol2, tnet, &cfg.scene_grid).unwrap();
                align_pairs.push(AlignmentPair {
                    predicted_yaw: yaw,
                    predicted_translation: off,
                    gt_yaw: gt_align.yaw,
                    gt_translation: gt_align.offset_vec(),
                    symmetric: true,
                });
            }
        }
    }
    println!("eval: {:?}", t0.elapsed());
    println!("classification: {}/{} correct, {} accepted (>0.95)", cls_correct, cls_total, accepted);
    if !align_pairs.is_empty() {
        let al = evaluate_alignment(&align_pairs);
        println!(
            "alignment: rot {:.3} (sym {:.3}), trans err {:.3} m over {}",
            al.rotation_accuracy, al.rotation_accuracy_symmetric, al.translation_mean_error, al.count
        );
        // rotation bin agreement detail
        let mut agree = 0;
        for p in &align_pairs {
            if yaw_to_bin(p.predicted_yaw) == yaw_to_bin(p.gt_yaw) {
                agree += 1;
            }
        }
        println!("rotation exact-bin agreement: {}/{}", agree, align_pairs.len());
    }
    if !eval_scenes.is_empty() {
        let ap = evaluate_detection(&eval_scenes, IOU_THRESHOLD);
        for (cat, ev) in &ap {
            println!("  AP {cat}: {:.3} ({} gt)", ev.ap, ev.ground_truth);
        }
        println!("mAP: {:.3}", mean_ap(&ap));
        let su = evaluate_scene_understanding(&eval_scenes, IOU_THRESHOLD);
        println!("Pg {:.3} Rg {:.3} Rr {:.3}", su.pg, su.rg, su.rr);
    }
    println!("total: {:?}", t_total.elapsed());
}
