//! Classifier learning-rate probe: prints the running loss and train/test
//! accuracy for a few optimizer settings.

use deepcontext::geometry::RigidTransform;
use deepcontext::nn::ops::softmax_cross_entropy;
use deepcontext::nn::{sgd_step, SgdConfig};
use deepcontext::pipeline::{build_classifier, volume_to_tensor, TrunkSpec};
use deepcontext::scene_gen::{generate_scene, GeneratorConfig};
use deepcontext::tsdf::{compute_tsdf, desk_grid};
use deepcontext::derive_seed;
use glam::DVec3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let micro: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(8);
    let updates: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(200);
    let momentum: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.9);

    let gen_cfg = GeneratorConfig { seed: 1, ..Default::default() };
    let grid = desk_grid();
    println!("loading 150 scenes...");
    let mut volumes = Vec::new();
    for i in 0..150 {
        let scene = generate_scene(&gen_cfg, derive_seed(1, "scene", i)).unwrap();
        let rot = scene.annotation.world_from_camera.rotation;
        let cloud = deepcontext::geometry::backproject_depth(&scene.depth, &scene.annotation.camera).unwrap();
        let mu: DVec3 = cloud.points.iter().map(|p| rot * *p).sum::<DVec3>() / cloud.points.len() as f64;
        let vol = compute_tsdf(
            &scene.depth,
            &scene.annotation.camera,
            &RigidTransform::new(rot, -mu),
            &grid,
        )
        .unwrap();
        let label = scene.annotation.template().unwrap().index();
        volumes.push((volume_to_tensor::<f32>(&vol), label));
    }
    let (test, train) = volumes.split_at(30);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut net = build_classifier::<f32>(&TrunkSpec::default(), &grid, &mut rng);
    let cfg = SgdConfig { lr, momentum };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut pos = 0;
    let mut running = 0.0;
    let mut count = 0;
    for u in 0..updates {
        for _ in 0..micro {
            if pos == 0 {
                order.shuffle(&mut rng);
            }
            let (x, label) = &train[order[pos]];
            pos = (pos + 1) % order.len();
            let trace = net.forward_trace(x).unwrap();
            let (loss, mut grad) = softmax_cross_entropy(trace.output(), *label).unwrap();
            running += loss as f64;
            count += 1;
            grad.scale(1.0 / micro as f32);
            net.backward(&trace, &grad, &[]).unwrap();
        }
        sgd_step(&mut net.params_mut(), &cfg, 1);
        if (u + 1) % 25 == 0 {
            let acc = accuracy(&net, test);
            let tr_acc = accuracy(&net, &train[..60]);
            println!(
                "update {:>4}: loss {:.4}  train acc {:.2}  test acc {:.2}",
                u + 1,
                running / count as f64,
                tr_acc,
                acc
            );
            running = 0.0;
            count = 0;
        }
    }
}

fn accuracy(net: &deepcontext::nn::Net<f32>, data: &[(deepcontext::nn::Tensor<f32>, usize)]) -> f64 {
    let mut ok = 0;
    for (x, label) in data {
        let y = net.forward(x).unwrap();
        let mut best = 0;
        for (i, v) in y.data().iter().enumerate() {
            if *v > y.data()[best] {
                best = i;
            }
        }
        if best == *label {
            ok += 1;
        }
    }
    ok as f64 / data.len() as f64
}
