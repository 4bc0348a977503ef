//! Deterministic desk-scale trainer: conv / relu / max-pool / dense layers
//! with exact backpropagation, Adam, and softmax cross-entropy.
//!
//! Everything is a pure function of (config, seed, dataset): initialization
//! and epoch shuffles draw from one seeded generator, batch reductions run
//! in fixed sample order, and gradients accumulate in f64 regardless of the
//! parameter precision.

mod adam;
mod layers;
mod loss;
mod model;
mod train;

pub use adam::AdamState;
pub use layers::{conv_output_dim, pool_output_dim};
pub use loss::softmax_cross_entropy;
pub use model::{Grads, Model, Tape};
pub use train::{train, ParBatch, Sequential, TrainStats};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::real::Real;

/// Dense n-dimensional array passed between layers, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Arr<R> {
    pub shape: Vec<usize>,
    pub data: Vec<R>,
}

impl<R: Real> Arr<R> {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Arr {
            shape,
            data: alloc::vec![R::ZERO; n],
        }
    }

    pub fn from_vec(shape: Vec<usize>, data: Vec<R>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Arr { shape, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// One layer of the model architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        out_ch: usize,
        in_ch: usize,
        kernel: usize,
        pad: usize,
        stride: usize,
    },
    Relu,
    MaxPool {
        window: usize,
    },
    Dense {
        out_features: usize,
        in_features: usize,
    },
}

/// Trainer configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps_adam: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub probe_batch: usize,
}

impl ModelConfig {
    /// Small two-conv architecture sized for the given input.
    pub fn desk(input: (usize, usize, usize), classes: usize) -> Self {
        Self {
            layers: desk_layers(input, classes),
            seed: 42,
            lr: 6e-4,
            betas: (0.9, 0.999),
            eps_adam: 1e-8,
            epochs: 5,
            batch_size: 32,
            probe_batch: 8,
        }
    }

    /// The 32/64-channel architecture; expects 3 input channels.
    pub fn paper(input: (usize, usize, usize), classes: usize) -> Self {
        Self {
            layers: paper_layers(input, classes),
            ..Self::desk(input, classes)
        }
    }

    /// Check hyperparameters and that layer shapes compose over the given
    /// input; returns the logits width.
    pub fn validate(&self, input: (usize, usize, usize)) -> Result<usize, CoreError> {
        if !(self.lr > 0.0) {
            return Err(CoreError::BadConfig("lr must be positive".into()));
        }
        if !(self.eps_adam > 0.0) {
            return Err(CoreError::BadConfig("eps_adam must be positive".into()));
        }
        let (b1, b2) = self.betas;
        if !(0.0 < b1 && b1 < 1.0 && 0.0 < b2 && b2 < 1.0) {
            return Err(CoreError::BadConfig("betas must lie in (0, 1)".into()));
        }
        if self.epochs < 1 || self.batch_size < 1 || self.probe_batch < 1 {
            return Err(CoreError::BadConfig(
                "epochs, batch_size, probe_batch must be >= 1".into(),
            ));
        }
        compose_shapes(&self.layers, input)
    }
}

/// Walk the layer specs over an input shape, checking composition, and
/// return the final feature width.
pub fn compose_shapes(
    layers: &[LayerSpec],
    input: (usize, usize, usize),
) -> Result<usize, CoreError> {
    // shape is either spatial (c, h, w) or flat (features)
    let mut spatial = Some(input);
    let mut flat: Option<usize> = None;
    for (i, spec) in layers.iter().enumerate() {
        match spec {
            LayerSpec::Conv {
                out_ch,
                in_ch,
                kernel,
                pad,
                stride,
            } => {
                let (c, h, w) = spatial.ok_or_else(|| {
                    CoreError::ShapeMismatch(format!("layer {i}: conv after flatten"))
                })?;
                if c != *in_ch {
                    return Err(CoreError::ShapeMismatch(format!(
                        "layer {i}: conv expects {in_ch} channels, input has {c}"
                    )));
                }
                let oh = conv_output_dim(h, *kernel, *pad, *stride).ok_or_else(|| {
                    CoreError::ShapeMismatch(format!("layer {i}: conv kernel exceeds input"))
                })?;
                let ow = conv_output_dim(w, *kernel, *pad, *stride).ok_or_else(|| {
                    CoreError::ShapeMismatch(format!("layer {i}: conv kernel exceeds input"))
                })?;
                spatial = Some((*out_ch, oh, ow));
            }
            LayerSpec::Relu => {}
            LayerSpec::MaxPool { window } => {
                let (c, h, w) = spatial.ok_or_else(|| {
                    CoreError::ShapeMismatch(format!("layer {i}: pool after flatten"))
                })?;
                let oh = pool_output_dim(h, *window);
                let ow = pool_output_dim(w, *window);
                if oh == 0 || ow == 0 {
                    return Err(CoreError::ShapeMismatch(format!(
                        "layer {i}: pool window {window} exceeds {h}x{w}"
                    )));
                }
                spatial = Some((c, oh, ow));
            }
            LayerSpec::Dense {
                out_features,
                in_features,
            } => {
                let have = match (spatial, flat) {
                    (Some((c, h, w)), _) => c * h * w,
                    (None, Some(f)) => f,
                    (None, None) => unreachable!(),
                };
                if have != *in_features {
                    return Err(CoreError::ShapeMismatch(format!(
                        "layer {i}: dense expects {in_features} features, input has {have}"
                    )));
                }
                spatial = None;
                flat = Some(*out_features);
            }
        }
    }
    match (spatial, flat) {
        (None, Some(f)) => Ok(f),
        _ => Err(CoreError::ShapeMismatch(
            "model must end in a dense layer".into(),
        )),
    }
}

/// Default conv/pool/dense stack: channels 8 and 16, then a 64-wide head.
pub fn desk_layers(input: (usize, usize, usize), classes: usize) -> Vec<LayerSpec> {
    let (c, h, w) = input;
    let (h2, w2) = (h / 2, w / 2);
    let (h4, w4) = (h2 / 2, w2 / 2);
    alloc::vec![
        LayerSpec::Conv {
            out_ch: 8,
            in_ch: c,
            kernel: 3,
            pad: 1,
            stride: 1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool { window: 2 },
        LayerSpec::Conv {
            out_ch: 16,
            in_ch: 8,
            kernel: 3,
            pad: 1,
            stride: 1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool { window: 2 },
        LayerSpec::Dense {
            out_features: 64,
            in_features: 16 * h4 * w4,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            out_features: classes,
            in_features: 64,
        },
    ]
}

/// The wide architecture: conv channels 32 and 64, 128-wide head, three
/// input channels.
pub fn paper_layers(input: (usize, usize, usize), classes: usize) -> Vec<LayerSpec> {
    let (_, h, w) = input;
    let (h4, w4) = (h / 2 / 2, w / 2 / 2);
    alloc::vec![
        LayerSpec::Conv {
            out_ch: 32,
            in_ch: 3,
            kernel: 3,
            pad: 1,
            stride: 1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool { window: 2 },
        LayerSpec::Conv {
            out_ch: 64,
            in_ch: 32,
            kernel: 3,
            pad: 1,
            stride: 1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool { window: 2 },
        LayerSpec::Dense {
            out_features: 128,
            in_features: 64 * h4 * w4,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            out_features: classes,
            in_features: 128,
        },
    ]
}

/// An in-memory labeled image dataset, pixels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N * channels * height * width pixels, row-major.
    pub images: Vec<f32>,
    pub n: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
    pub classes: u32,
}

impl Dataset {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.n == 0 {
            return Err(CoreError::EmptyDataset);
        }
        if self.labels.len() != self.n
            || self.images.len() != self.n * self.channels * self.height * self.width
        {
            return Err(CoreError::ShapeMismatch(format!(
                "{} images / {} labels",
                self.images.len(),
                self.labels.len()
            )));
        }
        for &l in &self.labels {
            if l >= self.classes {
                return Err(CoreError::LabelOutOfRange {
                    label: l,
                    classes: self.classes,
                });
            }
        }
        Ok(())
    }

    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let len = self.sample_len();
        &self.images[i * len..(i + 1) * len]
    }

    /// Replicate the channel dimension, e.g. grayscale -> 3 channels for
    /// architectures that expect color input.
    pub fn replicate_channels(&self, target: usize) -> Dataset {
        assert!(self.channels == 1 && target >= 1);
        let plane = self.height * self.width;
        let mut images = Vec::with_capacity(self.n * target * plane);
        for i in 0..self.n {
            let src = self.sample(i);
            for _ in 0..target {
                images.extend_from_slice(src);
            }
        }
        Dataset {
            images,
            channels: target,
            ..self.clone()
        }
    }
}

/// Names assigned to parameterized layers in order: conv1, conv2, ...,
/// fc1, fc2, ...
pub fn layer_names(layers: &[LayerSpec]) -> Vec<Option<String>> {
    let mut conv = 0;
    let mut fc = 0;
    layers
        .iter()
        .map(|l| match l {
            LayerSpec::Conv { .. } => {
                conv += 1;
                Some(format!("conv{conv}"))
            }
            LayerSpec::Dense { .. } => {
                fc += 1;
                Some(format!("fc{fc}"))
            }
            _ => None,
        })
        .collect()
}
