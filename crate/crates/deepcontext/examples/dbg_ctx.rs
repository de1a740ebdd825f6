use deepcontext::nn::ops::softmax_cross_entropy;
use deepcontext::nn::Tensor;
use deepcontext::pipeline::{ContextNet, TrunkSpec};
use deepcontext::templates::{ObjectAnchor, SceneTemplate, TemplateName};
use deepcontext::tsdf::{GridConfig, TsdfVolume};
use glam::DVec3;
use rand::Rng;
use rand::SeedableRng;

fn main() {
    let n_anchors: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let use_ce: bool = std::env::args().nth(2).map(|s| s == "ce").unwrap_or(true);
    let grid = GridConfig::new([8, 8, 8], 0.2, 0.3, DVec3::new(-0.8, -0.8, -0.8)).unwrap();
    let spec = TrunkSpec { channels: [2, 3, 4], global_dim: 8 };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(777));
    let mut net = ContextNet::<f64>::new(&spec, &grid, &mut rng);
    let mk_anchor = |id: usize, c: [f64; 3], s: [f64; 3]| ObjectAnchor {
        id,
        category: format!("cat{id}"),
        bbox: deepcontext::geometry::OrientedBox3::new(DVec3::from_array(c), DVec3::from_array(s), 0.0).unwrap(),
    };
    let mut anchors = vec![mk_anchor(0, [0.0, 0.1, 0.0], [0.9, 0.7, 0.8])];
    if n_anchors > 1 {
        anchors.push(mk_anchor(1, [0.5, -0.3, -0.2], [0.4, 0.4, 0.4]));
    }
    let template = SceneTemplate {
        name: TemplateName::SleepingArea,
        major_category: "cat0".into(),
        anchors,
    };
    let vol = TsdfVolume {
        config: grid,
        values: (0..grid.voxel_count()).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
    };
    let input: Tensor<f64> = deepcontext::pipeline::volume_to_tensor(&vol);
    let lin: Vec<f64> = (0..6).map(|i| (i as f64 - 2.5) * 0.1).collect();
    let ecoef: Vec<f64> = vec![0.3, -0.7];

    let loss_of = |net: &ContextNet<f64>, x: &Tensor<f64>| -> f64 {
        let (_, outs) = net.forward_trace(x, &template, &grid).unwrap();
        let mut total = 0.0;
        for (ai, out) in outs.iter().enumerate() {
            if use_ce {
                let (l, _) = softmax_cross_entropy(&out.exist_logits, ai % 2).unwrap();
                total += l;
            } else {
                total += out.exist_logits.data().iter().zip(&ecoef).map(|(v, c)| v * c).sum::<f64>();
            }
            total += out.offsets.data().iter().zip(&lin).map(|(v, c)| v * c).sum::<f64>();
        }
        total
    };

    net.zero_grads();
    let (trace, outs) = net.forward_trace(&input, &template, &grid).unwrap();
    let grads: Vec<(Option<Tensor<f64>>, Option<Tensor<f64>>)> = outs
        .iter()
        .enumerate()
        .map(|(ai, out)| {
            let ge = if use_ce {
                let (_l, g) = softmax_cross_entropy(&out.exist_logits, ai % 2).unwrap();
                g
            } else {
                Tensor::from_vec(&[2], ecoef.clone()).unwrap()
            };
            let go = Tensor::from_vec(&[6], lin.clone()).unwrap();
            (Some(ge), Some(go))
        })
        .collect();
    net.backward(&trace, &grads).unwrap();

    let eps: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let mut worst = 0.0f64;
    let mut worst_pi = 0;
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
            let sides_agree = (fwd - bwd).abs() <= 2e-2 * fwd.abs().max(bwd.abs()) + 1e-10;
            if !(central_smooth && sides_agree) {
                let lo = fwd.min(bwd);
                let hi = fwd.max(bwd);
                let m = 0.25 * (hi - lo).max(0.05 * (fwd.abs() + bwd.abs())) + 1e-9;
                assert!(analytic >= lo - m && analytic <= hi + m,
                    "kink hull miss: analytic {analytic} fwd {fwd} bwd {bwd}");
                continue;
            }
            let scale = analytic.abs().max(d1.abs());
            if scale > 1e-6 {
                let e = (analytic - d1).abs() / scale;
                if e > worst {
                    worst = e;
                    worst_pi = pi;
                    if e > 1e-4 {
                        eprintln!(
                            "  param {pi} elem {i}: analytic {analytic:.6e} d1 {d1:.6e} d2 {d2:.6e}"
                        );
                        // fine scan of the loss around orig
                        for k in -4i64..=4 {
                            let v = orig + k as f64 * eps / 2.0;
                            eprintln!("    f({:+.4e}) = {:.9e}", v - orig, probe(v));
                        }
                    }
                }
            }
        }
    }
    println!("anchors {n_anchors} ce {use_ce}: worst {worst:.3e} at param {worst_pi}/{n_params}");
}
