//! Segmentation of 2-D parameter slices into overlapping square segments.
//!
//! The valid scale range for an `n x m` matrix depends on shape parity
//! (square/odd, square/even, non-square/odd-min, non-square/even-min), and
//! extraction places `ceil(n/r) * ceil(m/r)` full-size `r x r` segments using
//! clamp-shifted starts: `start_k = min(k*r, dim - r)`. Segments overlap
//! exactly when `r` does not divide the dimension and tile perfectly when it
//! does.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::mat::Mat;
use crate::run::Tensor;

/// Valid segmentation scales for an `n x m` matrix: the contiguous integer
/// range `[2, upper]` where `upper` depends on shape parity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleRange {
    pub n: usize,
    pub m: usize,
    pub scales: Vec<usize>,
}

impl ScaleRange {
    pub fn contains(&self, r: usize) -> bool {
        self.scales.binary_search(&r).is_ok()
    }

    pub fn upper(&self) -> usize {
        *self.scales.last().expect("range is never empty for n,m >= 3")
    }
}

/// One `size x size` sub-matrix of a parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Layer the parent tensor belongs to, e.g. "conv1".
    pub layer: String,
    /// Indices locating the 2-D slice inside a higher-rank tensor
    /// (`[out, in]` for conv kernels, empty for true matrices).
    pub channel_path: Vec<usize>,
    pub grid_i: usize,
    pub grid_j: usize,
    pub row_start: usize,
    pub col_start: usize,
    pub size: usize,
    pub values: Mat,
}

/// Compute the valid scale range for an `n x m` matrix.
///
/// `upper` is `floor((n+1)/2)` for odd square matrices, `n/2` for even
/// square ones, and the analogous expressions on `min(n, m)` when the matrix
/// is rectangular.
pub fn valid_scales(n: usize, m: usize) -> Result<ScaleRange, CoreError> {
    if n < 3 || m < 3 {
        return Err(CoreError::DimensionTooSmall { n, m });
    }
    let upper = if n == m {
        if n % 2 != 0 {
            (n + 1) / 2
        } else {
            n / 2
        }
    } else {
        let mn = n.min(m);
        if mn % 2 != 0 {
            (mn + 1) / 2
        } else {
            mn / 2
        }
    };
    Ok(ScaleRange {
        n,
        m,
        scales: (2..=upper).collect(),
    })
}

/// Start indices of segments along one dimension: `ceil(dim/r)` starts at
/// `min(k*r, dim - r)`.
pub fn segment_starts(dim: usize, r: usize) -> Result<Vec<usize>, CoreError> {
    if r > dim {
        return Err(CoreError::ScaleExceedsDimension { scale: r, dim });
    }
    debug_assert!(r >= 2);
    let count = dim.div_ceil(r);
    Ok((0..count).map(|k| (k * r).min(dim - r)).collect())
}

/// Extract all segments of a slice at scale `r` in row-major grid order.
pub fn extract_segments(
    slice: &Mat,
    layer: &str,
    channel_path: &[usize],
    r: usize,
) -> Result<Vec<Segment>, CoreError> {
    let (n, m) = (slice.rows(), slice.cols());
    let range = valid_scales(n, m)?;
    if !range.contains(r) {
        return Err(CoreError::InvalidScale { scale: r, n, m });
    }
    let row_starts = segment_starts(n, r)?;
    let col_starts = segment_starts(m, r)?;
    let mut out = Vec::with_capacity(row_starts.len() * col_starts.len());
    for (grid_i, &row_start) in row_starts.iter().enumerate() {
        for (grid_j, &col_start) in col_starts.iter().enumerate() {
            out.push(Segment {
                layer: layer.into(),
                channel_path: channel_path.to_vec(),
                grid_i,
                grid_j,
                row_start,
                col_start,
                size: r,
                values: slice.block(row_start, col_start, r),
            });
        }
    }
    Ok(out)
}

/// Enumerate the 2-D slices of a tensor: a rank-2 tensor is one slice with
/// an empty path; a rank-4 `[out, in, kh, kw]` tensor yields one `kh x kw`
/// slice per `(out, in)` pair with path `[out, in]`.
pub fn enumerate_slices(tensor: &Tensor) -> Result<Vec<(Vec<usize>, Mat)>, CoreError> {
    match tensor.shape() {
        [n, m] => {
            let mat = Mat::from_vec(*n, *m, tensor.to_f64_vec());
            Ok(alloc::vec![(Vec::new(), mat)])
        }
        [out_ch, in_ch, kh, kw] => {
            let (out_ch, in_ch, kh, kw) = (*out_ch, *in_ch, *kh, *kw);
            let mut slices = Vec::with_capacity(out_ch * in_ch);
            for o in 0..out_ch {
                for i in 0..in_ch {
                    let mut m = Mat::zeros(kh, kw);
                    let base = (o * in_ch + i) * kh * kw;
                    for y in 0..kh {
                        for x in 0..kw {
                            m[(y, x)] = tensor.at(base + y * kw + x);
                        }
                    }
                    slices.push((alloc::vec![o, i], m));
                }
            }
            Ok(slices)
        }
        other => Err(CoreError::UnsupportedRank(other.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_range_square_odd() {
        assert_eq!(valid_scales(9, 9).unwrap().scales, vec![2, 3, 4, 5]);
    }

    #[test]
    fn scale_range_kernel_case() {
        assert_eq!(valid_scales(3, 3).unwrap().scales, vec![2]);
    }

    #[test]
    fn scale_range_rect_even_min() {
        assert_eq!(valid_scales(6, 10).unwrap().scales, vec![2, 3]);
    }

    #[test]
    fn scale_range_square_even() {
        assert_eq!(valid_scales(8, 8).unwrap().scales, vec![2, 3, 4]);
    }

    #[test]
    fn scale_range_rejects_small_dims() {
        assert!(matches!(
            valid_scales(2, 5),
            Err(CoreError::DimensionTooSmall { n: 2, m: 5 })
        ));
    }

    #[test]
    fn starts_overlap_on_odd() {
        assert_eq!(segment_starts(3, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn starts_tile_on_even() {
        assert_eq!(segment_starts(4, 2).unwrap(), vec![0, 2]);
    }

    #[test]
    fn starts_clamp_last() {
        assert_eq!(segment_starts(5, 2).unwrap(), vec![0, 2, 3]);
    }

    #[test]
    fn starts_reject_oversized_scale() {
        assert!(segment_starts(3, 4).is_err());
    }

    #[test]
    fn three_by_three_gives_four_overlapping() {
        let slice = Mat::from_vec(3, 3, (0..9).map(f64::from).collect());
        let segs = extract_segments(&slice, "conv1", &[0, 0], 2).unwrap();
        assert_eq!(segs.len(), 4);
        let corners: Vec<(usize, usize)> =
            segs.iter().map(|s| (s.row_start, s.col_start)).collect();
        assert_eq!(corners, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert!(segs.iter().all(|s| s.size == 2));
    }

    #[test]
    fn four_by_four_tiles_disjoint() {
        let slice = Mat::from_vec(4, 4, (0..16).map(f64::from).collect());
        let segs = extract_segments(&slice, "fc", &[], 2).unwrap();
        assert_eq!(segs.len(), 4);
        // cell sets partition the slice
        let mut seen = [[0u8; 4]; 4];
        for s in &segs {
            for i in 0..2 {
                for j in 0..2 {
                    seen[s.row_start + i][s.col_start + j] += 1;
                }
            }
        }
        assert!(seen.iter().flatten().all(|&c| c == 1));
        // first segment carries the top-left block
        assert_eq!(segs[0].values.data(), &[0.0, 1.0, 4.0, 5.0]);
    }

    #[test]
    fn invalid_scale_propagates() {
        let slice = Mat::zeros(4, 4);
        assert!(matches!(
            extract_segments(&slice, "fc", &[], 3),
            Err(CoreError::InvalidScale { scale: 3, .. })
        ));
    }

    #[test]
    fn slices_of_conv_tensor() {
        let t = Tensor::from_f32(vec![8, 1, 3, 3], vec![0.0; 72]);
        let slices = enumerate_slices(&t).unwrap();
        assert_eq!(slices.len(), 8);
        assert!(slices.iter().all(|(_, m)| m.rows() == 3 && m.cols() == 3));
        assert_eq!(slices[3].0, vec![3, 0]);
    }

    #[test]
    fn slices_of_paper_shaped_tensor() {
        let t = Tensor::from_f32(vec![32, 3, 3, 3], vec![0.0; 32 * 3 * 9]);
        assert_eq!(enumerate_slices(&t).unwrap().len(), 96);
    }

    #[test]
    fn rank_three_unsupported() {
        let t = Tensor::from_f32(vec![2, 3, 3], vec![0.0; 18]);
        assert!(matches!(
            enumerate_slices(&t),
            Err(CoreError::UnsupportedRank(3))
        ));
    }

    #[test]
    fn conv_slice_values_row_major() {
        // tensor [2,1,3,3] with distinct values; slice (1,0) holds 9..18
        let t = Tensor::from_f32(vec![2, 1, 3, 3], (0..18).map(|x| x as f32).collect());
        let slices = enumerate_slices(&t).unwrap();
        assert_eq!(slices[1].1.row(0), &[9.0, 10.0, 11.0]);
    }
}
