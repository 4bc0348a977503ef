//! Per-segment box-counting fractal dimension and histogram entropy.
//!
//! A real-valued segment is first binarized (a cell is active when its
//! magnitude exceeds a threshold derived from the *parent slice*, so
//! activity is comparable across segments of the same layer). The fractal
//! dimension of an `r x r` segment then comes from a single covering at
//! sub-box size `b = max(1, r/2)`:
//!
//! ```text
//! FD = ln(N) / ln(r / b)
//! ```
//!
//! where `N` is the number of occupied sub-boxes. A fully active segment
//! scores exactly 2 whenever `b` divides `r`; an empty one is degenerate
//! with FD 0. Entropy is the natural-log Shannon entropy of a `K`-bin
//! equal-width histogram of the raw values.

use alloc::vec::Vec;

use crate::error::CoreError;
use crate::mat::{BoolGrid, Mat};
use crate::real::ln;
use crate::segment::Segment;

/// How the activity threshold for binarization is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// Median of absolute values over the parent slice (default).
    MedianAbs,
    /// Mean of absolute values over the parent slice.
    MeanAbs,
    /// Quantile `q` of absolute values over the parent slice.
    Quantile(f64),
    /// Fixed absolute threshold.
    Absolute(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::MedianAbs
    }
}

/// Resolve a policy to a concrete threshold using the parent slice's values.
pub fn resolve_threshold(policy: ThresholdPolicy, parent: &Mat) -> f64 {
    match policy {
        ThresholdPolicy::Absolute(tau) => tau,
        ThresholdPolicy::MeanAbs => {
            let sum: f64 = parent.data().iter().map(|v| v.abs()).sum();
            sum / parent.data().len() as f64
        }
        ThresholdPolicy::MedianAbs => quantile_abs(parent.data(), 0.5),
        ThresholdPolicy::Quantile(q) => quantile_abs(parent.data(), q.clamp(0.0, 1.0)),
    }
}

/// Linear-interpolated quantile of absolute values.
fn quantile_abs(values: &[f64], q: f64) -> f64 {
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(f64::total_cmp);
    if mags.is_empty() {
        return 0.0;
    }
    let pos = q * (mags.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(mags.len() - 1);
    let frac = pos - lo as f64;
    mags[lo] * (1.0 - frac) + mags[hi] * frac
}

/// Mark cells whose magnitude strictly exceeds `tau`.
pub fn binarize(matrix: &Mat, tau: f64) -> BoolGrid {
    let cells = matrix.data().iter().map(|v| v.abs() > tau).collect();
    BoolGrid::new(matrix.rows(), matrix.cols(), cells)
}

/// Result of covering a grid with `b x b` tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxCountResult {
    pub box_size: usize,
    /// Tiles containing at least one active cell.
    pub occupied: usize,
    /// Total tiles in the covering grid.
    pub grid_boxes: usize,
}

/// Count occupied tiles in the non-overlapping `ceil(rows/b) * ceil(cols/b)`
/// covering (edge tiles may be smaller).
pub fn box_count(grid: &BoolGrid, b: usize) -> Result<BoxCountResult, CoreError> {
    let (rows, cols) = (grid.rows(), grid.cols());
    if b == 0 || b > rows || b > cols {
        return Err(CoreError::ScaleExceedsDimension {
            scale: b,
            dim: rows.min(cols),
        });
    }
    let tiles_r = rows.div_ceil(b);
    let tiles_c = cols.div_ceil(b);
    let mut occupied = 0;
    for tr in 0..tiles_r {
        for tc in 0..tiles_c {
            let r_end = ((tr + 1) * b).min(rows);
            let c_end = ((tc + 1) * b).min(cols);
            'tile: for r in tr * b..r_end {
                for c in tc * b..c_end {
                    if grid.get(r, c) {
                        occupied += 1;
                        break 'tile;
                    }
                }
            }
        }
    }
    Ok(BoxCountResult {
        box_size: b,
        occupied,
        grid_boxes: tiles_r * tiles_c,
    })
}

/// Box-counting dimension estimate for one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractalEstimate {
    pub fd: f64,
    pub box_size: usize,
    /// True when no cell was active; fd is 0 in that case.
    pub degenerate: bool,
}

/// Fractal dimension of a square segment matrix already paired with its
/// resolved threshold.
pub fn fractal_dimension_mat(values: &Mat, tau: f64) -> FractalEstimate {
    let r = values.rows();
    debug_assert_eq!(r, values.cols(), "segments are square");
    let b = (r / 2).max(1);
    let grid = binarize(values, tau);
    let count = box_count(&grid, b).expect("b <= r by construction");
    if count.occupied == 0 {
        return FractalEstimate {
            fd: 0.0,
            box_size: b,
            degenerate: true,
        };
    }
    let fd = ln(count.occupied as f64) / ln(r as f64 / b as f64);
    FractalEstimate {
        fd,
        box_size: b,
        degenerate: false,
    }
}

/// Fractal dimension of a [`Segment`] under a threshold policy resolved
/// against the segment's parent slice.
pub fn fractal_dimension(
    segment: &Segment,
    policy: ThresholdPolicy,
    parent: &Mat,
) -> FractalEstimate {
    fractal_dimension_mat(&segment.values, resolve_threshold(policy, parent))
}

/// Shannon entropy of a histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    /// Natural-log entropy, in [0, ln bins].
    pub h: f64,
    pub bins: usize,
}

/// Histogram the raw values into `bins` equal-width bins over `[min, max]`
/// (a single bin takes everything when the segment is constant) and return
/// the natural-log Shannon entropy of the bin distribution.
pub fn entropy_mat(values: &Mat, bins: usize) -> Result<EntropyEstimate, CoreError> {
    if bins < 1 {
        return Err(CoreError::BadBinCount);
    }
    let data = values.data();
    debug_assert!(!data.is_empty());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in data {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    let mut counts = alloc::vec![0usize; bins];
    if hi == lo {
        counts[0] = data.len();
    } else {
        let width = (hi - lo) / bins as f64;
        for &v in data {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    }
    let total = data.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * ln(p);
        }
    }
    Ok(EntropyEstimate { h, bins })
}

/// Entropy of a [`Segment`]'s raw values.
pub fn entropy(segment: &Segment, bins: usize) -> Result<EntropyEstimate, CoreError> {
    entropy_mat(&segment.values, bins)
}

/// Default histogram bin count for a segment of scale `r`: bounded by the
/// sample count so small segments do not get guaranteed-sparse histograms.
pub fn default_bins(r: usize) -> usize {
    (r * r).min(16)
}
