//! Phase-flow analysis of training dynamics: per-segment gradient-norm
//! trajectories against loss, backward temporal differences, and a
//! contraction metric for attractor formation.
//!
//! Gradient tensors are segmented with the same geometry as the weight
//! segmentation, so each series tracks one spatial segment across epochs.
//! Contraction compares the RMS radius of the early window of points in the
//! (first-difference, second-difference) plane against the late window; a
//! ratio below 1 means the trajectory cloud is tightening.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::graph::SegmentKey;
use crate::real::sqrt;
use crate::run::RunData;
use crate::segment::{enumerate_slices, extract_segments, valid_scales};

/// Gradient-norm trajectory of one segment across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFlowSeries {
    pub key: SegmentKey,
    pub epochs: Vec<u32>,
    /// Frobenius norm of the gradient segment per epoch.
    pub grad_norm: Vec<f64>,
    pub loss: Vec<f64>,
    /// First backward differences of `grad_norm` (length - 1 entries).
    pub d1: Vec<f64>,
    /// Second backward differences (length - 2 entries).
    pub d2: Vec<f64>,
}

/// First and second backward differences on the unit epoch grid.
pub fn finite_differences(series: &[f64]) -> Result<(Vec<f64>, Vec<f64>), CoreError> {
    if series.len() < 3 {
        return Err(CoreError::ShortSeries {
            len: series.len(),
            need: 3,
        });
    }
    let d1: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
    Ok((d1, d2))
}

/// Build per-segment gradient-norm series at scale `r` from the gradient
/// tensors named in `tensor_names` (e.g. `conv1.grad`). All listed tensors
/// must be present in every epoch.
pub fn gradient_norm_series(
    run: &RunData,
    r: usize,
    tensor_names: &[String],
) -> Result<Vec<PhaseFlowSeries>, CoreError> {
    if run.epochs.len() < 3 {
        return Err(CoreError::ShortSeries {
            len: run.epochs.len(),
            need: 3,
        });
    }
    let epochs: Vec<u32> = run.epoch_numbers();
    let losses: Vec<f64> = run.epochs.iter().map(|e| e.loss).collect();

    let mut series = Vec::new();
    for name in tensor_names {
        let layer = name.strip_suffix(".grad").unwrap_or(name);
        // geometry comes from the first epoch; later epochs must match
        let first = run.tensor(epochs[0], name)?;
        let shape = first.shape().to_vec();
        let slice_count = enumerate_slices(first)?.len();

        // norms[slice][segment][epoch]
        let mut norms: Vec<Vec<Vec<f64>>> = Vec::with_capacity(slice_count);
        let mut keys: Vec<Vec<(SegmentKey, usize, usize)>> = Vec::with_capacity(slice_count);

        for (ei, &epoch) in epochs.iter().enumerate() {
            let tensor = run.tensor(epoch, name)?;
            if tensor.shape() != shape.as_slice() {
                return Err(CoreError::ShapeMismatch(alloc::format!(
                    "{name} changes shape at epoch {epoch}"
                )));
            }
            for (si, (path, slice)) in enumerate_slices(tensor)?.into_iter().enumerate() {
                let range = valid_scales(slice.rows(), slice.cols())?;
                if !range.contains(r) {
                    return Err(CoreError::InvalidScale {
                        scale: r,
                        n: slice.rows(),
                        m: slice.cols(),
                    });
                }
                let segments = extract_segments(&slice, layer, &path, r)?;
                if ei == 0 {
                    keys.push(
                        segments
                            .iter()
                            .map(|s| {
                                (
                                    SegmentKey {
                                        layer: s.layer.clone(),
                                        channel_path: s.channel_path.clone(),
                                        grid_i: s.grid_i,
                                        grid_j: s.grid_j,
                                        scale: r,
                                    },
                                    s.row_start,
                                    s.col_start,
                                )
                            })
                            .collect(),
                    );
                    norms.push(alloc::vec![
                        Vec::with_capacity(epochs.len());
                        segments.len()
                    ]);
                }
                for (gi, seg) in segments.iter().enumerate() {
                    norms[si][gi].push(seg.values.frobenius());
                }
            }
        }

        for (si, slice_keys) in keys.into_iter().enumerate() {
            for (gi, (key, _, _)) in slice_keys.into_iter().enumerate() {
                let g = core::mem::take(&mut norms[si][gi]);
                let (d1, d2) = finite_differences(&g)?;
                series.push(PhaseFlowSeries {
                    key,
                    epochs: epochs.clone(),
                    grad_norm: g,
                    loss: losses.clone(),
                    d1,
                    d2,
                });
            }
        }
    }
    Ok(series)
}

/// Early-vs-late RMS radius comparison in the (d1, d2) plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub key: SegmentKey,
    pub early_radius: f64,
    pub late_radius: f64,
    /// `late / early`; `None` when the early radius is zero.
    pub ratio: Option<f64>,
    pub window: usize,
}

impl ContractionReport {
    pub fn is_degenerate(&self) -> bool {
        self.ratio.is_none()
    }
}

fn rms_radius(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
    let ms = points
        .iter()
        .map(|p| (p.0 - cx) * (p.0 - cx) + (p.1 - cy) * (p.1 - cy))
        .sum::<f64>()
        / n;
    sqrt(ms)
}

/// Compare the first and last `window` points of the series' (d1, d2)
/// trajectory. Requires a gradient series of length >= 2*window + 1.
pub fn contraction(series: &PhaseFlowSeries, window: usize) -> Result<ContractionReport, CoreError> {
    let len = series.grad_norm.len();
    if window == 0 || len < 2 * window + 1 {
        return Err(CoreError::WindowTooLarge { window, len });
    }
    // (d1_t, d2_t) pairs exist where both differences are defined
    let points: Vec<(f64, f64)> = series.d1[1..]
        .iter()
        .zip(&series.d2)
        .map(|(&a, &b)| (a, b))
        .collect();
    debug_assert!(points.len() >= window);
    let early_radius = rms_radius(&points[..window]);
    let late_radius = rms_radius(&points[points.len() - window..]);
    let ratio = if early_radius > 0.0 {
        Some(late_radius / early_radius)
    } else {
        None
    };
    Ok(ContractionReport {
        key: series.key.clone(),
        early_radius,
        late_radius,
        ratio,
        window,
    })
}

/// Default contraction window for a run of `epochs` epochs.
pub fn default_window(epochs: usize) -> usize {
    (epochs / 5).max(3)
}

/// Least-squares slope of d2 against d1 over all series (the trend of the
/// difference-plane scatter). `None` when d1 has no variance.
pub fn diff_plane_slope(series: &[PhaseFlowSeries]) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for (x, y) in s.d1[1..].iter().zip(&s.d2) {
            xs.push(*x);
            ys.push(*y);
        }
    }
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var == 0.0 {
        None
    } else {
        Some(cov / var)
    }
}
