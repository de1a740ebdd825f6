//! Sequential network container: layers, parameters, SGD with gradient
//! accumulation, and weight serialization (manifest JSON + one float32 blob
//! per trainable layer).

use super::ops::{self};
use super::{Real, Tensor};
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Trainable tensor with its gradient accumulator and momentum buffer.
#[derive(Debug, Clone)]
pub struct Param<T: Real> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub velocity: Tensor<T>,
}

impl<T: Real> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        let velocity = Tensor::zeros(value.shape());
        Self {
            value,
            grad,
            velocity,
        }
    }

    /// Centered uniform init scaled by 1/sqrt(fan_in).
    pub fn init_uniform(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (1.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64(rng.random_range(-bound..bound)))
            .collect();
        Self::new(Tensor::from_vec(shape, data).expect("shape/data agree"))
    }

    /// Bias init: a small positive constant. Exactly-zero biases leave
    /// freshly initialized ReLU units sitting on their kink, which breaks
    /// finite-difference checks and invites dead units.
    pub fn init_bias(n: usize) -> Self {
        Self::new(Tensor::filled(&[n], T::from_f64(0.01)))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::ZERO);
    }
}

/// Declarative layer description; the serialization manifest is a list of
/// these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv3d {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        pad: [usize; 3],
    },
    MaxPool3d {
        window: [usize; 3],
        stride: [usize; 3],
    },
    Relu,
    Flatten,
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
}

/// A layer instance with its parameters.
#[derive(Debug, Clone)]
pub enum Layer<T: Real> {
    Conv3d {
        weight: Param<T>,
        bias: Param<T>,
        stride: [usize; 3],
        pad: [usize; 3],
    },
    MaxPool3d {
        window: [usize; 3],
        stride: [usize; 3],
    },
    Relu,
    Flatten,
    Dense {
        weight: Param<T>,
        bias: Param<T>,
    },
}

impl<T: Real> Layer<T> {
    pub fn from_spec(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Self {
        match spec {
            LayerSpec::Conv3d {
                in_channels,
                out_channels,
                kernel,
                stride,
                pad,
            } => {
                let fan_in = in_channels * kernel[0] * kernel[1] * kernel[2];
                Layer::Conv3d {
                    weight: Param::init_uniform(
                        &[*out_channels, *in_channels, kernel[0], kernel[1], kernel[2]],
                        fan_in,
                        rng,
                    ),
                    bias: Param::init_bias(*out_channels),
                    stride: *stride,
                    pad: *pad,
                }
            }
            LayerSpec::MaxPool3d { window, stride } => Layer::MaxPool3d {
                window: *window,
                stride: *stride,
            },
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::Flatten => Layer::Flatten,
            LayerSpec::Dense { in_dim, out_dim } => Layer::Dense {
                weight: Param::init_uniform(&[*out_dim, *in_dim], *in_dim, rng),
                bias: Param::init_bias(*out_dim),
            },
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv3d {
                weight,
                stride,
                pad,
                ..
            } => {
                let s = weight.value.shape();
                LayerSpec::Conv3d {
                    in_channels: s[1],
                    out_channels: s[0],
                    kernel: [s[2], s[3], s[4]],
                    stride: *stride,
                    pad: *pad,
                }
            }
            Layer::MaxPool3d { window, stride } => LayerSpec::MaxPool3d {
                window: *window,
                stride: *stride,
            },
            Layer::Relu => LayerSpec::Relu,
            Layer::Flatten => LayerSpec::Flatten,
            Layer::Dense { weight, .. } => {
                let s = weight.value.shape();
                LayerSpec::Dense {
                    in_dim: s[1],
                    out_dim: s[0],
                }
            }
        }
    }
}

/// Auxiliary state a layer's forward pass records for its backward pass.
pub enum LayerAux {
    None,
    PoolArgmax(Vec<usize>),
    InputShape(Vec<usize>),
}

/// One recorded forward pass through a [`Net`].
pub struct Trace<T: Real> {
    /// `activations[i]` is the input of layer i; the final entry is the output.
    pub activations: Vec<Tensor<T>>,
    pub aux: Vec<LayerAux>,
}

impl<T: Real> Trace<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.activations.last().expect("trace has activations")
    }
}

/// Plain sequential network.
#[derive(Debug, Clone)]
pub struct Net<T: Real> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Real> Net<T> {
    pub fn from_specs(specs: &[LayerSpec], rng: &mut ChaCha8Rng) -> Self {
        Self {
            layers: specs.iter().map(|s| Layer::from_spec(s, rng)).collect(),
        }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// Inference-only forward pass.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = forward_one(layer, &x)?.0;
        }
        Ok(x)
    }

    /// Forward pass recording what backward needs.
    pub fn forward_trace(&self, input: &Tensor<T>) -> Result<Trace<T>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut aux = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for layer in &self.layers {
            let (out, a) = forward_one(layer, activations.last().expect("nonempty"))?;
            aux.push(a);
            activations.push(out);
        }
        Ok(Trace { activations, aux })
    }

    /// Accumulates parameter gradients for one recorded pass and returns the
    /// gradient with respect to the input. `inject` adds extra gradient
    /// directly onto intermediate activations (by activation index), which is
    /// how tapped features (ROI pooling off a mid-network feature map)
    /// contribute.
    pub fn backward(
        &mut self,
        trace: &Trace<T>,
        grad_output: &Tensor<T>,
        inject: &[(usize, &Tensor<T>)],
    ) -> Result<Tensor<T>> {
        let n = self.layers.len();
        let mut grad = grad_output.clone();
        for i in (0..n).rev() {
            grad = backward_one(
                &mut self.layers[i],
                &trace.activations[i],
                &trace.aux[i],
                &grad,
            )?;
            for (idx, extra) in inject {
                if *idx == i {
                    grad.add_assign(extra);
                }
            }
        }
        Ok(grad)
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv3d { weight, bias, .. } | Layer::Dense { weight, bias } => {
                    out.push(weight);
                    out.push(bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv3d { weight, bias, .. } | Layer::Dense { weight, bias } => {
                    out.push(weight);
                    out.push(bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Copies parameter values from another net where layer shapes agree;
    /// used to seed a new head network from a trained trunk. Returns how many
    /// layers were copied (prefix match).
    pub fn copy_prefix_from(&mut self, other: &Net<T>) -> usize {
        let mut copied = 0;
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            match (dst, src) {
                (
                    Layer::Conv3d {
                        weight: dw,
                        bias: db,
                        ..
                    },
                    Layer::Conv3d {
                        weight: sw,
                        bias: sb,
                        ..
                    },
                )
                | (
                    Layer::Dense {
                        weight: dw,
                        bias: db,
                    },
                    Layer::Dense {
                        weight: sw,
                        bias: sb,
                    },
                ) => {
                    if dw.value.shape() != sw.value.shape() {
                        break;
                    }
                    dw.value = sw.value.clone();
                    db.value = sb.value.clone();
                }
                (a, b) if a.spec() == b.spec() => {}
                _ => break,
            }
            copied += 1;
        }
        copied
    }
}

fn forward_one<T: Real>(layer: &Layer<T>, x: &Tensor<T>) -> Result<(Tensor<T>, LayerAux)> {
    Ok(match layer {
        Layer::Conv3d {
            weight,
            bias,
            stride,
            pad,
        } => (
            ops::conv3d(x, &weight.value, &bias.value, *stride, *pad)?,
            LayerAux::None,
        ),
        Layer::MaxPool3d { window, stride } => {
            let (out, argmax) = ops::maxpool3d(x, *window, *stride)?;
            (out, LayerAux::PoolArgmax(argmax))
        }
        Layer::Relu => (ops::relu(x), LayerAux::None),
        Layer::Flatten => {
            let shape = x.shape().to_vec();
            let flat = x.clone().reshaped(&[x.numel()])?;
            (flat, LayerAux::InputShape(shape))
        }
        Layer::Dense { weight, bias } => (
            ops::dense(x, &weight.value, &bias.value)?,
            LayerAux::None,
        ),
    })
}

fn backward_one<T: Real>(
    layer: &mut Layer<T>,
    input: &Tensor<T>,
    aux: &LayerAux,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    Ok(match layer {
        Layer::Conv3d {
            weight,
            bias,
            stride,
            pad,
        } => {
            let (gin, gw, gb) =
                ops::conv3d_backward(input, &weight.value, grad_out, *stride, *pad)?;
            weight.grad.add_assign(&gw);
            bias.grad.add_assign(&gb);
            gin
        }
        Layer::MaxPool3d { .. } => match aux {
            LayerAux::PoolArgmax(argmax) => {
                ops::maxpool3d_backward(argmax, grad_out, input.shape())
            }
            _ => unreachable!("pool layer always records argmax"),
        },
        Layer::Relu => ops::relu_backward(input, grad_out),
        Layer::Flatten => grad_out.clone().reshaped(input.shape())?,
        Layer::Dense { weight, bias } => {
            let (gin, gw, gb) = ops::dense_backward(input, &weight.value, grad_out);
            weight.grad.add_assign(&gw);
            bias.grad.add_assign(&gb);
            gin
        }
    })
}

/// SGD with momentum over accumulated gradients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
}

/// One optimizer step: gradients are averaged over `accum_count`
/// micro-batches, the momentum update applied once, and gradients cleared.
pub fn sgd_step<T: Real>(params: &mut [&mut Param<T>], cfg: &SgdConfig, accum_count: usize) {
    let inv = T::from_f64(1.0 / accum_count.max(1) as f64);
    let lr = T::from_f64(cfg.lr);
    let mu = T::from_f64(cfg.momentum);
    for p in params {
        let grads = p.grad.data_mut();
        let vel = p.velocity.data_mut();
        let vals = p.value.data_mut();
        for i in 0..grads.len() {
            let g = grads[i] * inv;
            vel[i] = mu * vel[i] - lr * g;
            vals[i] += vel[i];
            grads[i] = T::ZERO;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    layers: Vec<LayerSpec>,
}

/// Saves a network as `<dir>/<name>.json` plus `<dir>/<name>_layerNNN.bin`
/// (weight then bias, little-endian f32) for each trainable layer.
pub fn save_net(net: &Net<f32>, dir: impl AsRef<Path>, name: &str) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join(format!("{name}.json"));
    let manifest = Manifest { layers: net.specs() };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::json(&manifest_path, e))?;
    std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    for (i, layer) in net.layers.iter().enumerate() {
        let (w, b) = match layer {
            Layer::Conv3d { weight, bias, .. } | Layer::Dense { weight, bias } => (weight, bias),
            _ => continue,
        };
        let path = dir.join(format!("{name}_layer{i:03}.bin"));
        let mut bytes = Vec::with_capacity((w.value.numel() + b.value.numel()) * 4);
        for v in w.value.data().iter().chain(b.value.data()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn load_net(dir: impl AsRef<Path>, name: &str) -> Result<Net<f32>> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(format!("{name}.json"));
    let json =
        std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&json).map_err(|e| Error::json(&manifest_path, e))?;
    let mut rng = rand::SeedableRng::seed_from_u64(0); // overwritten below
    let mut net = Net::from_specs(&manifest.layers, &mut rng);
    for (i, layer) in net.layers.iter_mut().enumerate() {
        let (w, b) = match layer {
            Layer::Conv3d { weight, bias, .. } | Layer::Dense { weight, bias } => (weight, bias),
            _ => continue,
        };
        let path = dir.join(format!("{name}_layer{i:03}.bin"));
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = (w.value.numel() + b.value.numel()) * 4;
        if bytes.len() != expected {
            return Err(Error::Parse {
                what: path.display().to_string(),
                detail: format!("expected {expected} bytes, found {}", bytes.len()),
            });
        }
        let mut vals = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        for v in w.value.data_mut() {
            *v = vals.next().expect("length checked");
        }
        for v in b.value.data_mut() {
            *v = vals.next().expect("length checked");
        }
    }
    Ok(net)
}

/// FNV-1a digest over all parameter bytes, in layer order. Used to compare
/// training runs for bit-identical weights.
pub fn digest_params(nets: &[(&str, &Net<f32>)]) -> String {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    let mut mix = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for (name, net) in nets {
        for b in name.bytes() {
            mix(b);
        }
        for p in net.params() {
            for v in p.value.data() {
                for b in v.to_le_bytes() {
                    mix(b);
                }
            }
        }
    }
    format!("{h:016x}")
}
