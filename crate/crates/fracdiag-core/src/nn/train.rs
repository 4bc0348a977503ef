//! The epoch loop: seeded shuffling, fixed-order batch reductions, Adam
//! updates, and per-epoch snapshot capture into a [`RunData`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::model::{Grads, Model};
use super::{Arr, Dataset, ModelConfig};
use crate::error::CoreError;
use crate::real::Real;
use crate::rng::Rng;
use crate::run::{EpochData, RunData, Tensor};

/// Pluggable executor for the per-sample map inside a batch. Implementations
/// may compute samples on any number of threads; the caller always reduces
/// results in sample order, so the output bytes cannot depend on the
/// executor.
pub trait ParBatch: Sync {
    fn run<T: Send>(&self, n: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T>;
}

/// Single-threaded executor.
pub struct Sequential;

impl ParBatch for Sequential {
    fn run<T: Send>(&self, n: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        (0..n).map(f).collect()
    }
}

/// Summary statistics returned alongside the run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    /// Mean loss over the whole dataset at initialization, before any update.
    pub initial_loss: f64,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Fraction of training samples classified correctly by the final model.
    pub train_accuracy: f64,
}

/// Metadata for the run container.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub run_id: String,
    pub created_utc: String,
}

fn batch_of<R: Real>(dataset: &Dataset, indices: &[usize]) -> (Arr<R>, Vec<u32>) {
    let sample_len = dataset.sample_len();
    let mut data = Vec::with_capacity(indices.len() * sample_len);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        data.extend(dataset.sample(i).iter().map(|&p| R::from_f64(p as f64)));
        labels.push(dataset.labels[i]);
    }
    (
        Arr::from_vec(
            alloc::vec![
                indices.len(),
                dataset.channels,
                dataset.height,
                dataset.width
            ],
            data,
        ),
        labels,
    )
}

/// Mean loss over the dataset without updating anything.
fn dataset_loss<R: Real>(
    model: &Model<R>,
    dataset: &Dataset,
    par: &impl ParBatch,
) -> Result<f64, CoreError> {
    let results = par.run(dataset.n, &|i| {
        let (batch, labels) = batch_of::<R>(dataset, &[i]);
        model.loss_on(&batch, &labels)
    });
    let mut total = 0.0;
    for r in results {
        total += r?;
    }
    Ok(total / dataset.n as f64)
}

fn tensor_from<R: Real>(shape: Vec<usize>, data: &[R]) -> Tensor {
    match R::DTYPE {
        crate::run::Dtype::F32 => {
            Tensor::from_f32(shape, data.iter().map(|&x| x.to_f64() as f32).collect())
        }
        crate::run::Dtype::F64 => {
            Tensor::from_f64(shape, data.iter().map(|&x| x.to_f64()).collect())
        }
    }
}

fn tensor_from_f64<R: Real>(shape: Vec<usize>, data: &[f64]) -> Tensor {
    match R::DTYPE {
        crate::run::Dtype::F32 => {
            Tensor::from_f32(shape, data.iter().map(|&x| x as f32).collect())
        }
        crate::run::Dtype::F64 => Tensor::from_f64(shape, data.to_vec()),
    }
}

/// Train per the config and capture one snapshot per epoch: epoch-end
/// weights and biases, epoch-averaged weight gradients (`<layer>.grad`),
/// and probe-batch activations (`<layer>.act`).
pub fn train<R: Real>(
    config: &ModelConfig,
    dataset: &Dataset,
    meta: &RunMeta,
    par: &impl ParBatch,
) -> Result<(RunData, TrainStats), CoreError> {
    dataset.validate()?;
    let input = (dataset.channels, dataset.height, dataset.width);
    let classes = config.validate(input)?;
    if classes != dataset.classes as usize {
        return Err(CoreError::BadConfig(format!(
            "model emits {classes} classes, dataset has {}",
            dataset.classes
        )));
    }

    let mut rng = Rng::new(config.seed);
    let mut model: Model<R> = Model::init(&config.layers, input, &mut rng)?;
    let specs = model.param_specs();
    let sizes: Vec<usize> = specs.iter().map(|s| s.shape.iter().product()).collect();
    let mut adam = super::AdamState::new(&sizes);

    let probe_len = config.probe_batch.min(dataset.n);
    let probe_indices: Vec<usize> = (0..probe_len).collect();
    let (probe_batch, _) = batch_of::<R>(dataset, &probe_indices);

    let initial_loss = dataset_loss(&model, dataset, par)?;

    let mut indices: Vec<usize> = (0..dataset.n).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        rng.shuffle(&mut indices);
        let mut epoch_grads = Grads::zeros_like(&sizes);
        let mut batch_count = 0usize;
        let mut loss_sum = 0.0;
        let mut sample_count = 0usize;

        for chunk in indices.chunks(config.batch_size) {
            // per-sample losses/gradients, reduced in sample order
            let results = par.run(chunk.len(), &|k| {
                let (batch, labels) = batch_of::<R>(dataset, &[chunk[k]]);
                model.loss_and_grads(&batch, &labels)
            });
            let mut batch_grads = Grads::zeros_like(&sizes);
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, grads) = r?;
                batch_loss += loss;
                batch_grads.add(&grads);
            }
            let inv = 1.0 / chunk.len() as f64;
            batch_grads.scale(inv);
            batch_loss *= inv;
            if !batch_loss.is_finite() {
                return Err(CoreError::NonFinite(format!(
                    "loss at epoch {epoch}, batch {batch_count}"
                )));
            }

            adam.step(
                &mut model.param_tensors_mut(),
                &batch_grads.tensors,
                config.lr,
                config.betas,
                config.eps_adam,
            );

            epoch_grads.add(&batch_grads);
            loss_sum += batch_loss * chunk.len() as f64;
            sample_count += chunk.len();
            batch_count += 1;
        }

        epoch_grads.scale(1.0 / batch_count as f64);
        let epoch_loss = loss_sum / sample_count as f64;
        epoch_losses.push(epoch_loss);

        let mut snap = EpochData::new(epoch as u32, epoch_loss);
        let tensors = model.param_tensors();
        for (ti, spec) in specs.iter().enumerate() {
            snap.insert(spec.name.clone(), tensor_from(spec.shape.clone(), tensors[ti]));
            if spec.is_weight {
                snap.insert(
                    format!("{}.grad", spec.layer),
                    tensor_from_f64::<R>(spec.shape.clone(), &epoch_grads.tensors[ti]),
                );
            }
        }
        for (name, act) in model.capture_activations(&probe_batch)? {
            snap.insert(name, tensor_from(act.shape.clone(), &act.data));
        }
        epochs.push(snap);
    }

    // final train accuracy, evaluated sample-by-sample in order
    let preds = par.run(dataset.n, &|i| {
        let (batch, _) = batch_of::<R>(dataset, &[i]);
        model.predict(&batch).map(|p| p[0])
    });
    let mut correct = 0usize;
    for (i, p) in preds.into_iter().enumerate() {
        if p? == dataset.labels[i] {
            correct += 1;
        }
    }

    let run = RunData {
        run_id: meta.run_id.clone(),
        created_utc: meta.created_utc.clone(),
        model_desc: describe(config),
        seed: config.seed,
        epochs,
    };
    let stats = TrainStats {
        initial_loss,
        epoch_losses,
        train_accuracy: correct as f64 / dataset.n as f64,
    };
    Ok((run, stats))
}

fn describe(config: &ModelConfig) -> String {
    let mut parts = Vec::new();
    for l in &config.layers {
        parts.push(match l {
            super::LayerSpec::Conv {
                out_ch,
                in_ch,
                kernel,
                pad,
                stride,
            } => format!("conv{in_ch}->{out_ch}k{kernel}p{pad}s{stride}"),
            super::LayerSpec::Relu => "relu".into(),
            super::LayerSpec::MaxPool { window } => format!("pool{window}"),
            super::LayerSpec::Dense {
                out_features,
                in_features,
            } => format!("dense{in_features}->{out_features}"),
        });
    }
    format!(
        "{} | lr={} betas=({},{}) eps={} batch={}",
        parts.join(" "),
        config.lr,
        config.betas.0,
        config.betas.1,
        config.eps_adam,
        config.batch_size
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synth_dataset;

    fn tiny_config(epochs: usize) -> ModelConfig {
        let mut cfg = ModelConfig::desk((1, 8, 8), 4);
        cfg.epochs = epochs;
        cfg.batch_size = 16;
        cfg
    }

    #[test]
    fn training_is_deterministic() {
        let data = synth_dataset(1, 48, 4).unwrap();
        let meta = RunMeta {
            run_id: "t".into(),
            created_utc: "1970-01-01T00:00:00Z".into(),
        };
        let cfg = tiny_config(2);
        let (a, sa) = train::<f32>(&cfg, &data, &meta, &Sequential).unwrap();
        let (b, sb) = train::<f32>(&cfg, &data, &meta, &Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn snapshots_carry_expected_tensors() {
        let data = synth_dataset(1, 32, 4).unwrap();
        let meta = RunMeta {
            run_id: "t".into(),
            created_utc: "1970-01-01T00:00:00Z".into(),
        };
        let (run, _) = train::<f32>(&tiny_config(1), &data, &meta, &Sequential).unwrap();
        assert_eq!(run.epochs.len(), 1);
        let snap = &run.epochs[0];
        for name in [
            "conv1.weight",
            "conv1.bias",
            "conv1.grad",
            "conv2.weight",
            "conv2.grad",
            "fc1.weight",
            "fc2.weight",
            "conv1.act",
            "fc2.act",
        ] {
            assert!(snap.tensor(name).is_some(), "missing {name}");
        }
        assert_eq!(snap.tensor("conv1.weight").unwrap().shape(), &[8, 1, 3, 3]);
        assert_eq!(
            snap.tensor("conv1.weight").unwrap().shape(),
            snap.tensor("conv1.grad").unwrap().shape()
        );
        // probe batch of 8 samples
        assert_eq!(snap.tensor("conv1.act").unwrap().shape()[0], 8);
    }

    #[test]
    fn initial_loss_near_ln_classes() {
        let data = synth_dataset(3, 64, 4).unwrap();
        let meta = RunMeta {
            run_id: "t".into(),
            created_utc: "1970-01-01T00:00:00Z".into(),
        };
        let (_, stats) = train::<f32>(&tiny_config(1), &data, &meta, &Sequential).unwrap();
        let ln4 = libm::log(4.0);
        assert!(
            (stats.initial_loss - ln4).abs() / ln4 < 0.1,
            "initial loss {} vs ln(4) {}",
            stats.initial_loss,
            ln4
        );
    }

    #[test]
    fn class_count_mismatch_rejected() {
        let data = synth_dataset(1, 32, 3).unwrap();
        let meta = RunMeta {
            run_id: "t".into(),
            created_utc: "1970-01-01T00:00:00Z".into(),
        };
        assert!(matches!(
            train::<f32>(&tiny_config(1), &data, &meta, &Sequential),
            Err(CoreError::BadConfig(_))
        ));
    }
}
