//! In-memory model of a training run: ordered epoch snapshots of named
//! tensors plus scalar loss. The trainer produces this; every analysis
//! consumes it. (De)serialization to the on-disk container lives in the
//! `fracdiag` crate.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::mat::Mat;

/// Element type of a stored tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size_bytes(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" => Some(Dtype::F32),
            "f64" => Some(Dtype::F64),
            _ => None,
        }
    }
}

/// Dense row-major tensor with 1-4 dimensions, preserving its storage dtype
/// so snapshots survive encode/decode bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl Tensor {
    pub fn from_f32(shape: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape,
            data: TensorData::F32(data),
        }
    }

    pub fn from_f64(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape,
            data: TensorData::F64(data),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            TensorData::F32(_) => Dtype::F32,
            TensorData::F64(_) => Dtype::F64,
        }
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    /// Element at flat row-major index, widened to f64.
    pub fn at(&self, idx: usize) -> f64 {
        match &self.data {
            TensorData::F32(v) => v[idx] as f64,
            TensorData::F64(v) => v[idx],
        }
    }

    /// All elements widened to f64 in row-major order.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    /// Little-endian byte image of the payload, as stored on disk.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * self.dtype().size_bytes());
        match &self.data {
            TensorData::F32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            TensorData::F64(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    /// Decode from little-endian bytes. Length must match shape and dtype.
    pub fn from_le_bytes(shape: Vec<usize>, dtype: Dtype, bytes: &[u8]) -> Option<Self> {
        let count: usize = shape.iter().product();
        if bytes.len() != count * dtype.size_bytes() {
            return None;
        }
        Some(match dtype {
            Dtype::F32 => {
                let v = bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Tensor {
                    shape,
                    data: TensorData::F32(v),
                }
            }
            Dtype::F64 => {
                let v = bytes
                    .chunks_exact(8)
                    .map(|c| {
                        f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
                    })
                    .collect();
                Tensor {
                    shape,
                    data: TensorData::F64(v),
                }
            }
        })
    }

    /// View a rank-2 tensor as a matrix, widening to f64.
    pub fn as_mat(&self) -> Result<Mat, CoreError> {
        if self.rank() != 2 {
            return Err(CoreError::UnsupportedRank(self.rank()));
        }
        Ok(Mat::from_vec(
            self.shape[0],
            self.shape[1],
            self.to_f64_vec(),
        ))
    }
}

/// One epoch snapshot: scalar loss plus named tensors in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochData {
    pub epoch: u32,
    pub loss: f64,
    tensors: Vec<(String, Tensor)>,
}

impl EpochData {
    pub fn new(epoch: u32, loss: f64) -> Self {
        Self {
            epoch,
            loss,
            tensors: Vec::new(),
        }
    }

    /// Insert a named tensor; names must be unique within the epoch.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        debug_assert!(
            !self.tensors.iter().any(|(n, _)| *n == name),
            "duplicate tensor name {name}"
        );
        self.tensors.push((name, tensor));
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(n, t)| (n.as_str(), t))
    }
}

/// A full training run in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunData {
    pub run_id: String,
    pub created_utc: String,
    pub model_desc: String,
    pub seed: u64,
    pub epochs: Vec<EpochData>,
}

impl RunData {
    pub fn epoch(&self, epoch: u32) -> Result<&EpochData, CoreError> {
        self.epochs
            .iter()
            .find(|e| e.epoch == epoch)
            .ok_or(CoreError::MissingEpoch(epoch))
    }

    pub fn tensor(&self, epoch: u32, name: &str) -> Result<&Tensor, CoreError> {
        self.epoch(epoch)?
            .tensor(name)
            .ok_or_else(|| CoreError::MissingTensor {
                epoch,
                name: name.into(),
            })
    }

    pub fn last_epoch(&self) -> Option<u32> {
        self.epochs.last().map(|e| e.epoch)
    }

    /// Epoch numbers in order.
    pub fn epoch_numbers(&self) -> Vec<u32> {
        self.epochs.iter().map(|e| e.epoch).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn le_round_trip_preserves_bits() {
        let t = Tensor::from_f32(vec![2, 2], vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5e8]);
        let bytes = t.to_le_bytes();
        let back = Tensor::from_le_bytes(vec![2, 2], Dtype::F32, &bytes).unwrap();
        assert_eq!(t, back);
        assert_eq!(bytes, back.to_le_bytes());
    }

    #[test]
    fn f64_round_trip() {
        let t = Tensor::from_f64(vec![3], vec![1.0 / 3.0, -2.5e-300, 7.0]);
        let back = Tensor::from_le_bytes(vec![3], Dtype::F64, &t.to_le_bytes()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn missing_lookups_are_categorized() {
        let run = RunData {
            run_id: "r".into(),
            created_utc: "1970-01-01T00:00:00Z".into(),
            model_desc: String::new(),
            seed: 0,
            epochs: vec![EpochData::new(0, 1.0)],
        };
        assert!(matches!(run.epoch(3), Err(CoreError::MissingEpoch(3))));
        assert!(matches!(
            run.tensor(0, "w"),
            Err(CoreError::MissingTensor { epoch: 0, .. })
        ));
    }
}
