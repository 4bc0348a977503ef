//! Error type shared by all core analyses.

use alloc::string::String;
use core::fmt;

/// Errors from core computations. Each variant corresponds to a violated
/// precondition or an unrecoverable numerical state; callers map them onto
/// their own error domains (the CLI maps them to exit codes).
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Matrix dimensions below the segmentable minimum (both must be >= 3).
    DimensionTooSmall { n: usize, m: usize },
    /// Requested segment scale exceeds the dimension it must fit in.
    ScaleExceedsDimension { scale: usize, dim: usize },
    /// Scale outside the valid range for the given matrix shape.
    InvalidScale { scale: usize, n: usize, m: usize },
    /// Tensor rank not supported by slice enumeration (only 2 and 4 are).
    UnsupportedRank(usize),
    /// Two vectors that must agree in length do not.
    LengthMismatch { left: usize, right: usize },
    /// Matrix/vector dimensions do not compose.
    DimensionMismatch(String),
    /// Graph construction received no features.
    EmptyFeatures,
    /// Consecutive-layer edge policy needs at least two layers.
    NeedTwoLayers,
    /// The same scale appeared twice in a hypergraph aggregation.
    DuplicateScale(usize),
    /// Histogram bin count must be at least 1.
    BadBinCount,
    /// A non-finite value appeared where finite math is required.
    NonFinite(String),
    /// Named tensor missing from an epoch snapshot.
    MissingTensor { epoch: u32, name: String },
    /// Epoch not present in the run.
    MissingEpoch(u32),
    /// Series too short for the requested temporal analysis.
    ShortSeries { len: usize, need: usize },
    /// Contraction window does not fit the series.
    WindowTooLarge { window: usize, len: usize },
    /// A class label lies outside `[0, classes)`.
    LabelOutOfRange { label: u32, classes: u32 },
    /// Dataset ended up with no samples.
    EmptyDataset,
    /// Layer shapes do not compose, or a batch does not match the input spec.
    ShapeMismatch(String),
    /// Invalid trainer hyperparameters.
    BadConfig(String),
}

impl CoreError {
    /// Stable machine-readable code, used verbatim by the CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Self::DimensionTooSmall { .. } => "dimension_too_small",
            Self::ScaleExceedsDimension { .. } => "scale_exceeds_dimension",
            Self::InvalidScale { .. } => "invalid_scale",
            Self::UnsupportedRank(_) => "unsupported_rank",
            Self::LengthMismatch { .. } => "length_mismatch",
            Self::DimensionMismatch(_) => "dimension_mismatch",
            Self::EmptyFeatures => "empty_features",
            Self::NeedTwoLayers => "need_two_layers",
            Self::DuplicateScale(_) => "duplicate_scale",
            Self::BadBinCount => "bad_bin_count",
            Self::NonFinite(_) => "non_finite",
            Self::MissingTensor { .. } => "tensor_not_found",
            Self::MissingEpoch(_) => "epoch_not_found",
            Self::ShortSeries { .. } => "series_too_short",
            Self::WindowTooLarge { .. } => "window_too_large",
            Self::LabelOutOfRange { .. } => "label_out_of_range",
            Self::EmptyDataset => "empty_dataset",
            Self::ShapeMismatch(_) => "shape_mismatch",
            Self::BadConfig(_) => "bad_config",
        }
    }
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionTooSmall { n, m } => {
                write!(f, "dimension too small: {n}x{m} (both must be >= 3)")
            }
            Self::ScaleExceedsDimension { scale, dim } => {
                write!(f, "scale {scale} exceeds dimension {dim}")
            }
            Self::InvalidScale { scale, n, m } => {
                write!(f, "scale {scale} is not valid for a {n}x{m} matrix")
            }
            Self::UnsupportedRank(r) => write!(f, "unsupported tensor rank {r} (expected 2 or 4)"),
            Self::LengthMismatch { left, right } => {
                write!(f, "vector length mismatch: {left} vs {right}")
            }
            Self::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Self::EmptyFeatures => write!(f, "no segment features to build a graph from"),
            Self::NeedTwoLayers => {
                write!(f, "consecutive-layer edges need at least two layers")
            }
            Self::DuplicateScale(r) => write!(f, "scale {r} appears more than once"),
            Self::BadBinCount => write!(f, "histogram needs at least one bin"),
            Self::NonFinite(ctx) => write!(f, "non-finite value in {ctx}"),
            Self::MissingTensor { epoch, name } => {
                write!(f, "tensor '{name}' not found in epoch {epoch}")
            }
            Self::MissingEpoch(e) => write!(f, "epoch {e} not found in run"),
            Self::ShortSeries { len, need } => {
                write!(f, "series of length {len} is too short (need >= {need})")
            }
            Self::WindowTooLarge { window, len } => {
                write!(f, "window {window} too large for series of length {len}")
            }
            Self::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Self::EmptyDataset => write!(f, "dataset has no samples"),
            Self::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Self::BadConfig(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}
