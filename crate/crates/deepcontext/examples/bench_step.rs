//! Rough timing of the training hot path at the desk grid.

use deepcontext::nn::ops::softmax_cross_entropy;
use deepcontext::pipeline::{build_classifier, volume_to_tensor, ContextNet, TrunkSpec};
use deepcontext::scene_gen::{generate_scene, GeneratorConfig};
use deepcontext::templates::{learn_template, TemplateName};
use deepcontext::tsdf::{compute_tsdf, desk_grid};
use deepcontext::geometry::RigidTransform;
use rand::SeedableRng;
use std::time::Instant;

fn main() {
    let gen_cfg = GeneratorConfig::default();
    let t0 = Instant::now();
    let scenes: Vec<_> = (0..20).map(|s| generate_scene(&gen_cfg, s).unwrap()).collect();
    println!("generate 20 scenes: {:?} ({:?}/scene)", t0.elapsed(), t0.elapsed() / 20);

    let grid = desk_grid();
    let t0 = Instant::now();
    let vols: Vec<_> = scenes
        .iter()
        .map(|s| {
            compute_tsdf(
                &s.depth,
                &s.annotation.camera,
                &RigidTransform::new(s.annotation.world_from_camera.rotation, glam::DVec3::ZERO),
                &grid,
            )
            .unwrap()
        })
        .collect();
    println!("tsdf x20: {:?} ({:?}/scene)", t0.elapsed(), t0.elapsed() / 20);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut net = build_classifier::<f32>(&TrunkSpec::default(), &grid, &mut rng);
    let xs: Vec<_> = vols.iter().map(|v| volume_to_tensor::<f32>(v)).collect();

    let t0 = Instant::now();
    for x in &xs {
        let _ = net.forward(x).unwrap();
    }
    println!("trunk forward x20: {:?} ({:?}/example)", t0.elapsed(), t0.elapsed() / 20);

    let t0 = Instant::now();
    for x in &xs {
        let trace = net.forward_trace(x).unwrap();
        let (_l, g) = softmax_cross_entropy(trace.output(), 0).unwrap();
        net.backward(&trace, &g, &[]).unwrap();
    }
    println!("trunk fwd+bwd x20: {:?} ({:?}/example)", t0.elapsed(), t0.elapsed() / 20);

    // context net cost with a real template
    let anns: Vec<_> = scenes
        .iter()
        .filter(|s| s.annotation.scene_type == "sleeping_area")
        .map(|s| s.annotation.clone())
        .collect();
    if !anns.is_empty() {
        let tpl = learn_template(&anns, &Default::default(), TemplateName::SleepingArea, 0).unwrap();
        println!("template anchors: {}", tpl.anchors.len());
        let mut ctx = ContextNet::<f32>::new(&TrunkSpec::default(), &grid, &mut rng);
        let t0 = Instant::now();
        for x in xs.iter().take(10) {
            let (trace, outs) = ctx.forward_trace(x, &tpl, &grid).unwrap();
            let grads: Vec<_> = outs
                .iter()
                .map(|o| {
                    let (_l, g) = softmax_cross_entropy(&o.exist_logits, 0).unwrap();
                    (Some(g), None)
                })
                .collect();
            ctx.backward(&trace, &grads).unwrap();
        }
        println!("context fwd+bwd x10: {:?} ({:?}/example)", t0.elapsed(), t0.elapsed() / 10);
    }
}
