//! Model assembly: parameter storage, seeded initialization, forward pass
//! with a tape of cached intermediates, and the exact backward pass.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::layers::{
    conv_backward, conv_forward, conv_output_dim, dense_backward, dense_forward, pool_backward,
    pool_forward, pool_output_dim, relu_backward, relu_forward,
};
use super::loss::softmax_cross_entropy;
use super::{compose_shapes, layer_names, Arr, LayerSpec};
use crate::error::CoreError;
use crate::real::{sqrt, Real};
use crate::rng::Rng;

/// A parameterized or stateless layer with its weights.
#[derive(Debug, Clone)]
pub enum Layer<R> {
    Conv {
        out_ch: usize,
        in_ch: usize,
        kernel: usize,
        pad: usize,
        stride: usize,
        weight: Vec<R>,
        bias: Vec<R>,
    },
    Relu,
    MaxPool {
        window: usize,
    },
    Dense {
        out_features: usize,
        in_features: usize,
        weight: Vec<R>,
        bias: Vec<R>,
    },
}

/// Description of one parameter tensor: snapshot name and shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// True for a weight tensor (gets a `.grad` snapshot), false for a bias.
    pub is_weight: bool,
    /// Name of the owning layer, e.g. "conv1".
    pub layer: String,
}

/// Cached intermediates from one forward pass.
pub struct Tape<R> {
    /// Input to each layer, in layer order.
    inputs: Vec<Arr<R>>,
    /// Pool argmax indices per pool layer position.
    argmax: Vec<Option<Vec<usize>>>,
    batch: usize,
}

/// Per-parameter-tensor gradients in f64, aligned with `Model::param_specs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(sizes: &[usize]) -> Self {
        Self {
            tensors: sizes.iter().map(|&s| alloc::vec![0.0; s]).collect(),
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            for x in t.iter_mut() {
                *x *= s;
            }
        }
    }
}

/// The trainable network.
#[derive(Debug, Clone)]
pub struct Model<R> {
    pub layers: Vec<Layer<R>>,
    pub input: (usize, usize, usize),
    pub classes: usize,
    names: Vec<Option<String>>,
}

impl<R: Real> Model<R> {
    /// Build and initialize from specs: weights uniform in
    /// `±sqrt(6 / (fan_in + fan_out))`, biases zero, drawn in layer order
    /// from the given generator.
    pub fn init(
        specs: &[LayerSpec],
        input: (usize, usize, usize),
        rng: &mut Rng,
    ) -> Result<Self, CoreError> {
        let classes = compose_shapes(specs, input)?;
        let names = layer_names(specs);
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            layers.push(match *spec {
                LayerSpec::Conv {
                    out_ch,
                    in_ch,
                    kernel,
                    pad,
                    stride,
                } => {
                    let fan_in = in_ch * kernel * kernel;
                    let fan_out = out_ch * kernel * kernel;
                    let limit = sqrt(6.0 / (fan_in + fan_out) as f64);
                    let weight = (0..out_ch * in_ch * kernel * kernel)
                        .map(|_| R::from_f64(rng.uniform(-limit, limit)))
                        .collect();
                    Layer::Conv {
                        out_ch,
                        in_ch,
                        kernel,
                        pad,
                        stride,
                        weight,
                        bias: alloc::vec![R::ZERO; out_ch],
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool { window } => Layer::MaxPool { window },
                LayerSpec::Dense {
                    out_features,
                    in_features,
                } => {
                    let limit = sqrt(6.0 / (in_features + out_features) as f64);
                    let weight = (0..out_features * in_features)
                        .map(|_| R::from_f64(rng.uniform(-limit, limit)))
                        .collect();
                    Layer::Dense {
                        out_features,
                        in_features,
                        weight,
                        bias: alloc::vec![R::ZERO; out_features],
                    }
                }
            });
        }
        Ok(Self {
            layers,
            input,
            classes,
            names,
        })
    }

    /// Snapshot name of each parameterized layer, aligned with `layers`.
    pub fn layer_name(&self, idx: usize) -> Option<&str> {
        self.names[idx].as_deref()
    }

    /// Parameter tensor descriptions in storage order
    /// (weight then bias per parameterized layer).
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let layer_name = match self.names[i].as_deref() {
                Some(n) => n,
                None => continue,
            };
            match layer {
                Layer::Conv {
                    out_ch,
                    in_ch,
                    kernel,
                    ..
                } => {
                    out.push(ParamSpec {
                        name: format!("{layer_name}.weight"),
                        shape: alloc::vec![*out_ch, *in_ch, *kernel, *kernel],
                        is_weight: true,
                        layer: layer_name.into(),
                    });
                    out.push(ParamSpec {
                        name: format!("{layer_name}.bias"),
                        shape: alloc::vec![*out_ch],
                        is_weight: false,
                        layer: layer_name.into(),
                    });
                }
                Layer::Dense {
                    out_features,
                    in_features,
                    ..
                } => {
                    out.push(ParamSpec {
                        name: format!("{layer_name}.weight"),
                        shape: alloc::vec![*out_features, *in_features],
                        is_weight: true,
                        layer: layer_name.into(),
                    });
                    out.push(ParamSpec {
                        name: format!("{layer_name}.bias"),
                        shape: alloc::vec![*out_features],
                        is_weight: false,
                        layer: layer_name.into(),
                    });
                }
                _ => {}
            }
        }
        out
    }

    /// Parameter tensors in the same order as `param_specs`.
    pub fn param_tensors(&self) -> Vec<&Vec<R>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                    out.push(weight);
                    out.push(bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<R>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                    out.push(weight);
                    out.push(bias);
                }
                _ => {}
            }
        }
        out
    }

    /// Total scalar parameter count.
    pub fn param_count(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    /// Forward pass over a batch (b, c, h, w), returning logits (b, classes)
    /// and the tape needed for backprop.
    pub fn forward(&self, batch: &Arr<R>) -> Result<(Arr<R>, Tape<R>), CoreError> {
        let b = *batch.shape.first().ok_or_else(|| {
            CoreError::ShapeMismatch("empty batch".into())
        })?;
        if batch.shape.len() != 4
            || batch.shape[1] != self.input.0
            || batch.shape[2] != self.input.1
            || batch.shape[3] != self.input.2
        {
            return Err(CoreError::ShapeMismatch(format!(
                "batch shape {:?} does not match input {:?}",
                batch.shape, self.input
            )));
        }
        let mut tape = Tape {
            inputs: Vec::with_capacity(self.layers.len()),
            argmax: Vec::with_capacity(self.layers.len()),
            batch: b,
        };
        let mut x = batch.clone();
        for layer in &self.layers {
            tape.inputs.push(x.clone());
            let mut arg = None;
            x = match layer {
                Layer::Conv {
                    out_ch,
                    in_ch,
                    kernel,
                    pad,
                    stride,
                    weight,
                    bias,
                } => {
                    let (h, w) = (x.shape[2], x.shape[3]);
                    let oh = conv_output_dim(h, *kernel, *pad, *stride).expect("validated");
                    let ow = conv_output_dim(w, *kernel, *pad, *stride).expect("validated");
                    let data = conv_forward(
                        &x.data, b, *in_ch, h, w, weight, bias, *out_ch, *kernel, *pad, *stride,
                    );
                    Arr::from_vec(alloc::vec![b, *out_ch, oh, ow], data)
                }
                Layer::Relu => Arr::from_vec(x.shape.clone(), relu_forward(&x.data)),
                Layer::MaxPool { window } => {
                    let (c, h, w) = (x.shape[1], x.shape[2], x.shape[3]);
                    let (data, am) = pool_forward(&x.data, b, c, h, w, *window);
                    arg = Some(am);
                    Arr::from_vec(
                        alloc::vec![b, c, pool_output_dim(h, *window), pool_output_dim(w, *window)],
                        data,
                    )
                }
                Layer::Dense {
                    out_features,
                    in_features,
                    weight,
                    bias,
                } => {
                    let data =
                        dense_forward(&x.data, b, *in_features, weight, bias, *out_features);
                    Arr::from_vec(alloc::vec![b, *out_features], data)
                }
            };
            tape.argmax.push(arg);
        }
        Ok((x, tape))
    }

    /// Backward pass from the logits gradient, returning per-parameter
    /// gradients aligned with `param_specs`.
    pub fn backward(&self, tape: &Tape<R>, dlogits: Vec<f64>) -> Grads {
        let b = tape.batch;
        let specs = self.param_specs();
        let mut grads = Grads::zeros_like(
            &specs
                .iter()
                .map(|s| s.shape.iter().product())
                .collect::<Vec<_>>(),
        );
        // parameter tensor slot just past the current layer's tensors
        let mut slot = grads.tensors.len();
        let mut dout = dlogits;
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.inputs[li];
            match layer {
                Layer::Conv {
                    out_ch,
                    in_ch,
                    kernel,
                    pad,
                    stride,
                    weight,
                    ..
                } => {
                    let (h, w) = (input.shape[2], input.shape[3]);
                    let (dw, db, din) = conv_backward(
                        &input.data, b, *in_ch, h, w, weight, *out_ch, *kernel, *pad, *stride,
                        &dout,
                    );
                    slot -= 2;
                    grads.tensors[slot] = dw;
                    grads.tensors[slot + 1] = db;
                    dout = din;
                }
                Layer::Relu => {
                    dout = relu_backward(&input.data, &dout);
                }
                Layer::MaxPool { .. } => {
                    let am = tape.argmax[li].as_ref().expect("pool recorded argmax");
                    dout = pool_backward(&dout, am, input.len());
                }
                Layer::Dense {
                    out_features,
                    in_features,
                    weight,
                    ..
                } => {
                    let (dw, db, din) =
                        dense_backward(&input.data, b, *in_features, weight, *out_features, &dout);
                    slot -= 2;
                    grads.tensors[slot] = dw;
                    grads.tensors[slot + 1] = db;
                    dout = din;
                }
            }
        }
        grads
    }

    /// Loss and parameter gradients for one batch.
    pub fn loss_and_grads(
        &self,
        batch: &Arr<R>,
        labels: &[u32],
    ) -> Result<(f64, Grads), CoreError> {
        let (logits, tape) = self.forward(batch)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits.data, self.classes, labels)?;
        Ok((loss, self.backward(&tape, dlogits)))
    }

    /// Loss only (used by finite-difference checks).
    pub fn loss_on(&self, batch: &Arr<R>, labels: &[u32]) -> Result<f64, CoreError> {
        let (logits, _) = self.forward(batch)?;
        let (loss, _) = softmax_cross_entropy(&logits.data, self.classes, labels)?;
        Ok(loss)
    }

    /// Activation snapshots for a probe batch: the output of each
    /// parameterized layer after any immediately following relu, named
    /// `<layer>.act`.
    pub fn capture_activations(
        &self,
        batch: &Arr<R>,
    ) -> Result<Vec<(String, Arr<R>)>, CoreError> {
        let mut outputs = Vec::with_capacity(self.layers.len());
        let (logits, tape) = self.forward(batch)?;
        // rebuild per-layer outputs from the tape: input of layer i+1 is the
        // output of layer i; the final output is the logits
        for i in 0..self.layers.len() {
            if i + 1 < self.layers.len() {
                outputs.push(tape.inputs[i + 1].clone());
            } else {
                outputs.push(logits.clone());
            }
        }
        let mut acts = Vec::new();
        for (i, name) in self.names.iter().enumerate() {
            let Some(name) = name else { continue };
            let next_is_relu = matches!(self.layers.get(i + 1), Some(Layer::Relu));
            let act = if next_is_relu {
                outputs[i + 1].clone()
            } else {
                outputs[i].clone()
            };
            acts.push((format!("{name}.act"), act));
        }
        Ok(acts)
    }

    /// Class predictions by argmax over logits.
    pub fn predict(&self, batch: &Arr<R>) -> Result<Vec<u32>, CoreError> {
        let (logits, _) = self.forward(batch)?;
        let b = batch.shape[0];
        let mut out = Vec::with_capacity(b);
        for bi in 0..b {
            let row = &logits.data[bi * self.classes..(bi + 1) * self.classes];
            let mut best = 0usize;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            out.push(best as u32);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> Model<f64> {
        let specs = alloc::vec![
            LayerSpec::Conv {
                out_ch: 2,
                in_ch: 1,
                kernel: 3,
                pad: 1,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool { window: 2 },
            LayerSpec::Dense {
                out_features: 3,
                in_features: 2 * 3 * 3,
            },
        ];
        Model::init(&specs, (1, 6, 6), &mut Rng::new(11)).unwrap()
    }

    #[test]
    fn forward_shape_follows_algebra() {
        let m = tiny_model();
        let batch = Arr::from_vec(alloc::vec![2, 1, 6, 6], alloc::vec![0.1; 72]);
        let (logits, _) = m.forward(&batch).unwrap();
        assert_eq!(logits.shape, alloc::vec![2, 3]);
    }

    #[test]
    fn forward_rejects_wrong_input() {
        let m = tiny_model();
        let batch = Arr::from_vec(alloc::vec![1, 1, 5, 5], alloc::vec![0.0; 25]);
        assert!(m.forward(&batch).is_err());
    }

    #[test]
    fn param_specs_cover_all_tensors() {
        let m = tiny_model();
        let specs = m.param_specs();
        let names: Vec<_> = specs.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            alloc::vec!["conv1.weight", "conv1.bias", "fc1.weight", "fc1.bias"]
        );
        assert_eq!(specs[0].shape, alloc::vec![2, 1, 3, 3]);
        let sizes: Vec<usize> = m.param_tensors().iter().map(|t| t.len()).collect();
        assert_eq!(sizes, alloc::vec![18, 2, 54, 3]);
    }

    #[test]
    fn finite_difference_spot_check() {
        // full oracle sweep lives in the integration tests; one conv weight
        // here keeps the unit fast
        let m = tiny_model();
        let batch = Arr::from_vec(
            alloc::vec![2, 1, 6, 6],
            (0..72).map(|i| (i as f64 * 0.37).sin() * 0.5).collect(),
        );
        let labels = [1u32, 2];
        let (_, grads) = m.loss_and_grads(&batch, &labels).unwrap();
        let h = 1e-5;
        for &idx in &[0usize, 7, 17] {
            let mut mp = m.clone();
            mp.param_tensors_mut()[0][idx] += h;
            let lp = mp.loss_on(&batch, &labels).unwrap();
            let mut mm = m.clone();
            mm.param_tensors_mut()[0][idx] -= h;
            let lm = mm.loss_on(&batch, &labels).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let an = grads.tensors[0][idx];
            assert!(
                (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                "idx {idx}: fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn activation_capture_names_and_shapes() {
        let m = tiny_model();
        let batch = Arr::from_vec(alloc::vec![2, 1, 6, 6], alloc::vec![0.5; 72]);
        let acts = m.capture_activations(&batch).unwrap();
        assert_eq!(acts.len(), 2);
        assert_eq!(acts[0].0, "conv1.act");
        assert_eq!(acts[0].1.shape, alloc::vec![2, 2, 6, 6]);
        assert_eq!(acts[1].0, "fc1.act");
        assert_eq!(acts[1].1.shape, alloc::vec![2, 3]);
        // conv act is post-relu, so nonnegative
        assert!(acts[0].1.data.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn deterministic_init() {
        let a: Model<f32> = Model::init(
            &ModelConfigDeskHelper::layers(),
            (1, 8, 8),
            &mut Rng::new(5),
        )
        .unwrap();
        let b: Model<f32> = Model::init(
            &ModelConfigDeskHelper::layers(),
            (1, 8, 8),
            &mut Rng::new(5),
        )
        .unwrap();
        for (x, y) in a.param_tensors().iter().zip(b.param_tensors()) {
            assert_eq!(x, y);
        }
    }

    struct ModelConfigDeskHelper;
    impl ModelConfigDeskHelper {
        fn layers() -> Vec<LayerSpec> {
            super::super::desk_layers((1, 8, 8), 4)
        }
    }
}
