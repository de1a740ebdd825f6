//! Central-difference verification of analytic gradients.

use super::net::{Net, Trace};
use super::Tensor;
use crate::error::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error over input elements.
    pub max_input_error: f64,
    /// Worst relative error over all parameter elements.
    pub max_param_error: f64,
    /// Elements skipped because the difference path crossed a kink.
    pub tied: usize,
    /// Elements actually compared.
    pub checked: usize,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.max_input_error.max(self.max_param_error)
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-6 {
        // both effectively zero
        return 0.0;
    }
    (analytic - numeric).abs() / scale
}

/// Outcome of probing one element with finite differences.
pub(crate) enum Probe {
    /// Smooth neighborhood: compare the analytic value against this central
    /// difference at the strict tolerance.
    Smooth(f64),
    /// A kink (ReLU corner, pooling argmax switch) sits inside the probe
    /// interval. Correctness there means the analytic gradient equals one of
    /// the one-sided slopes.
    Kink { forward: f64, backward: f64 },
}

pub(crate) fn probe_element(mut f: impl FnMut(f64) -> f64, x: f64, eps: f64) -> Probe {
    let f0 = f(x);
    let fp = f(x + eps);
    let fm = f(x - eps);
    let d1 = (fp - fm) / (2.0 * eps);
    let d2 = (f(x + eps / 2.0) - f(x - eps / 2.0)) / eps;
    let forward = (fp - f0) / eps;
    let backward = (f0 - fm) / eps;
    // two-scale central agreement catches mid-interval kinks; one-sided
    // agreement catches kinks at or near the base point (where the central
    // pair straddles symmetrically and stays self-consistent)
    let central_smooth = (d1 - d2).abs() <= 1e-3 * d1.abs().max(d2.abs()) + 1e-12;
    let sides_agree =
        (forward - backward).abs() <= 2e-2 * forward.abs().max(backward.abs()) + 1e-10;
    if central_smooth && sides_agree {
        Probe::Smooth(d1)
    } else {
        Probe::Kink { forward, backward }
    }
}

/// Relative agreement of an analytic gradient with a one-sided slope; used
/// at kinks, where one-sided differences carry O(eps) curvature error.
fn matches_one_sided(analytic: f64, forward: f64, backward: f64) -> bool {
    let ok = |n: f64| {
        let scale = analytic.abs().max(n.abs());
        scale < 1e-6 || (analytic - n).abs() <= 5e-3 * scale
    };
    ok(forward) || ok(backward)
}

/// Checks a network's gradients against central finite differences.
///
/// The scalar loss is a fixed random linear functional of the network
/// output, which exercises every output path without needing labels. Run it
/// on `f64` networks with inputs perturbed away from pooling ties.
pub fn grad_check_net(
    net: &mut Net<f64>,
    input: &Tensor<f64>,
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = net.forward(input)?;
    let coeffs: Vec<f64> = (0..out.numel())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    let loss_of = |net: &Net<f64>, x: &Tensor<f64>| -> Result<f64> {
        let y = net.forward(x)?;
        Ok(y.data().iter().zip(&coeffs).map(|(v, c)| v * c).sum())
    };

    // analytic gradients
    net.zero_grads();
    let trace: Trace<f64> = net.forward_trace(input)?;
    let grad_out = Tensor::from_vec(out.shape(), coeffs.clone())?;
    let grad_input = net.backward(&trace, &grad_out, &[])?;

    // numeric input gradient
    let mut max_input_error = 0.0f64;
    let mut tied = 0usize;
    let mut checked = 0usize;
    let mut x = input.clone();
    for i in 0..x.numel() {
        let orig = x.data()[i];
        let probe = probe_element(
            |v| {
                x.data_mut()[i] = v;
                let out = loss_of(net, &x).expect("forward succeeds");
                x.data_mut()[i] = orig;
                out
            },
            orig,
            epsilon,
        );
        match probe {
            Probe::Smooth(n) => {
                checked += 1;
                max_input_error = max_input_error.max(rel_error(grad_input.data()[i], n));
            }
            Probe::Kink { forward, backward } => {
                tied += 1;
                assert!(
                    matches_one_sided(grad_input.data()[i], forward, backward),
                    "input grad {i} at a kink matches neither one-sided slope:                      analytic {}, forward {forward}, backward {backward}",
                    grad_input.data()[i]
                );
            }
        }
    }

    // numeric parameter gradients
    let analytic: Vec<Vec<f64>> = net
        .params()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();
    let mut max_param_error = 0.0f64;
    let param_count = analytic.len();
    for pi in 0..param_count {
        for i in 0..analytic[pi].len() {
            let orig = net.params()[pi].value.data()[i];
            let probe = probe_element(
                |v| {
                    net.params_mut()[pi].value.data_mut()[i] = v;
                    let out = loss_of(net, input).expect("forward succeeds");
                    net.params_mut()[pi].value.data_mut()[i] = orig;
                    out
                },
                orig,
                epsilon,
            );
            match probe {
                Probe::Smooth(n) => {
                    checked += 1;
                    max_param_error = max_param_error.max(rel_error(analytic[pi][i], n));
                }
                Probe::Kink { forward, backward } => {
                    tied += 1;
                    assert!(
                        matches_one_sided(analytic[pi][i], forward, backward),
                        "param {pi}[{i}] at a kink matches neither one-sided slope:                          analytic {}, forward {forward}, backward {backward}",
                        analytic[pi][i]
                    );
                }
            }
        }
    }

    Ok(GradCheckReport {
        max_input_error,
        max_param_error,
        tied,
        checked,
    })
}
