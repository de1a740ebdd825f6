//! Classifier-stage diagnosis: which ingredient hurts (hybrids, augmentation,
//! schedule)?

use deepcontext::derive_seed;
use deepcontext::geometry::RigidTransform;
use deepcontext::hybrid::{object_shortlists, synthesize_with_shortlists, ModelRepository, SynthesisConfig};
use deepcontext::pipeline::{classify_template, DepthSource, ModelSet, Stage, StageSchedule, TrainConfig, TrainData, TrainScene};
use deepcontext::scene_gen::{generate_scene, GeneratorConfig};
use deepcontext::templates::TemplateName;
use deepcontext::tsdf::compute_tsdf;
use glam::DVec3;

fn main() {
    let variant = std::env::args().nth(1).unwrap_or_else(|| "full".into());
    let gen_cfg = GeneratorConfig { seed: 1, ..Default::default() };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..160 {
        let s = generate_scene(&gen_cfg, derive_seed(1, "scene", i)).unwrap();
        if i % 5 == 4 { test.push(s) } else { train.push(s) }
    }
    let repo = ModelRepository::builtin();
    let synth_cfg = SynthesisConfig { multiplier: 6, ..Default::default() };
    let mut hybrid = Vec::new();
    if variant != "realonly" {
        for (i, s) in train.iter().enumerate() {
            let sl = object_shortlists(&s.depth, &s.annotation, &repo, &synth_cfg).unwrap();
            for m in 0..synth_cfg.multiplier {
                let d = synthesize_with_shortlists(&s.depth, &s.annotation, &repo, &sl, &synth_cfg,
                    derive_seed(2, "h", (i * 6 + m) as u64)).unwrap();
                hybrid.push(TrainScene { depth: DepthSource::Memory(d), annotation: s.annotation.clone() });
            }
        }
    }
    let data = TrainData {
        hybrid,
        real: train.iter().map(|s| TrainScene {
            depth: DepthSource::Memory(s.depth.clone()),
            annotation: s.annotation.clone(),
        }).collect(),
    };
    let mut cfg = TrainConfig { seed: 3, micro_batch: 12, accum: 1, ..Default::default() };
    cfg.rotation_aug_deg = 180.0;
    cfg.classifier = StageSchedule { hybrid_examples: 3600, real_epochs: 6, lr: 0.012, finetune_lr: 0.004 };
    match variant.as_str() {
        "noaug" => { cfg.rot_noise_deg = 0.0; cfg.trans_noise_frac = 0.0; }
        "smallaug" => { cfg.trans_noise_frac = 0.05; }
        "realonly" => { cfg.classifier.hybrid_examples = 0; cfg.classifier.real_epochs = 28; }
        "realhot" => {
            cfg.classifier.hybrid_examples = 0;
            cfg.classifier.real_epochs = 28;
            cfg.classifier.finetune_lr = 0.03;
        }
        "hybridonly" => { cfg.classifier.real_epochs = 0; }
        "hybridcool" => { cfg.classifier.real_epochs = 0; cfg.classifier.lr = 0.01; }
        _ => {}
    }
    let mut models = ModelSet::empty(cfg.trunk, cfg.scene_grid, cfg.template_grid);
    let t = std::time::Instant::now();
    deepcontext::pipeline::train_staged(&data, &[], &cfg, &mut models, &[Stage::Scene]).unwrap();
    println!("trained in {:.1?}", t.elapsed());
    let net = models.classifier.as_ref().unwrap();
    for (name, set) in [("train", &train), ("test", &test)] {
        let mut ok = 0;
        for s in set.iter() {
            let rot = s.annotation.world_from_camera.rotation;
            let cloud = deepcontext::geometry::backproject_depth(&s.depth, &s.annotation.camera).unwrap();
            let mu: DVec3 = cloud.points.iter().map(|p| rot * *p).sum::<DVec3>() / cloud.points.len() as f64;
            let vol = compute_tsdf(&s.depth, &s.annotation.camera, &RigidTransform::new(rot, -mu), &cfg.scene_grid).unwrap();
            let (probs, _) = classify_template(&vol, net, &cfg.scene_grid).unwrap();
            let argmax = probs.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            if TemplateName::ALL[argmax] == s.annotation.template().unwrap() { ok += 1; }
        }
        println!("{name} accuracy: {}/{}", ok, set.len());
    }
}
