use deepcontext::nn::{grad_check_net, LayerSpec, Net, Tensor};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn main() {
    let cases: Vec<(Vec<LayerSpec>, Vec<usize>)> = vec![
        (vec![LayerSpec::Dense { in_dim: 9, out_dim: 5 }], vec![9]),
        (
            vec![
                LayerSpec::Conv3d { in_channels: 1, out_channels: 2, kernel: [3,3,3], stride: [1,1,1], pad: [1,1,1] },
                LayerSpec::Relu,
                LayerSpec::Conv3d { in_channels: 2, out_channels: 2, kernel: [3,3,3], stride: [1,1,1], pad: [0,0,0] },
            ],
            vec![1,4,4,4],
        ),
        (
            vec![
                LayerSpec::MaxPool3d { window: [2,2,2], stride: [2,2,2] },
                LayerSpec::Flatten,
                LayerSpec::Dense { in_dim: 8, out_dim: 4 },
            ],
            vec![1,4,4,4],
        ),
        (
            vec![
                LayerSpec::Conv3d { in_channels: 2, out_channels: 3, kernel: [2,2,2], stride: [2,2,2], pad: [0,0,0] },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { in_dim: 24, out_dim: 3 },
                LayerSpec::Relu,
                LayerSpec::Dense { in_dim: 3, out_dim: 2 },
            ],
            vec![2,4,4,4],
        ),
    ];
    for (i, (specs, in_shape)) in cases.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + i as u64);
        let mut net: Net<f64> = Net::from_specs(specs, &mut rng);
        let x = rand_tensor(in_shape, &mut rng);
        let report = grad_check_net(&mut net, &x, 1e-3, 300 + i as u64).unwrap();
        println!("case {i}: max err {:.3e} (input {:.3e} / param {:.3e}), tied {}/{}",
                 report.max_error(), report.max_input_error, report.max_param_error,
                 report.tied, report.checked);
    }
}
