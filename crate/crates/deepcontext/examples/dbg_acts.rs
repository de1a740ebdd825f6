use deepcontext::nn::Tensor;
use deepcontext::pipeline::{ContextNet, TrunkSpec};
use deepcontext::templates::{ObjectAnchor, SceneTemplate, TemplateName};
use deepcontext::tsdf::{GridConfig, TsdfVolume};
use glam::DVec3;
use rand::Rng;
use rand::SeedableRng;

fn stats(name: &str, t: &Tensor<f64>) {
    let d = t.data();
    let zeros = d.iter().filter(|v| **v == 0.0).count();
    let mut sorted: Vec<f64> = d.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut dup = 0;
    for w in sorted.windows(2) {
        if w[0] == w[1] && w[0] != 0.0 {
            dup += 1;
        }
    }
    println!(
        "{name}: shape {:?} zeros {zeros}/{} nonzero-exact-dups {dup} min {:.4e} max {:.4e}",
        t.shape(),
        d.len(),
        sorted[0],
        sorted[sorted.len() - 1]
    );
}

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let grid = GridConfig::new([8, 8, 8], 0.2, 0.3, DVec3::new(-0.8, -0.8, -0.8)).unwrap();
    let spec = TrunkSpec { channels: [2, 3, 4], global_dim: 8 };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let net = ContextNet::<f64>::new(&spec, &grid, &mut rng);
    let template = SceneTemplate {
        name: TemplateName::SleepingArea,
        major_category: "cat0".into(),
        anchors: vec![ObjectAnchor {
            id: 0,
            category: "cat0".into(),
            bbox: deepcontext::geometry::OrientedBox3::new(
                DVec3::new(0.0, 0.1, 0.0),
                DVec3::new(0.9, 0.7, 0.8),
                0.0,
            )
            .unwrap(),
        }],
    };
    let vol = TsdfVolume {
        config: grid,
        values: (0..grid.voxel_count()).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
    };
    let input: Tensor<f64> = deepcontext::pipeline::volume_to_tensor(&vol);
    let (trace, _) = net.forward_trace(&input, &template, &grid).unwrap();
    for (i, act) in trace.scene_trace.activations.iter().enumerate() {
        stats(&format!("scene act {i}"), act);
    }
    let at = &trace.per_anchor[0];
    for (i, act) in at.object_trace.activations.iter().enumerate() {
        stats(&format!("object act {i}"), act);
    }
    stats("fused input grad? fuse act 0", &at.fuse_trace.activations[0]);
    for (i, act) in at.fuse_trace.activations.iter().enumerate().skip(1) {
        stats(&format!("fuse act {i}"), act);
    }
}
