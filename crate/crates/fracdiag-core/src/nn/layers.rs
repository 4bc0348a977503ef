//! Layer forward/backward kernels. Forward activations are stored at
//! parameter precision; every reduction accumulates in f64, and backward
//! passes run entirely in f64.

use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

/// Output spatial size of a convolution, `None` if the kernel cannot fit.
pub fn conv_output_dim(dim: usize, kernel: usize, pad: usize, stride: usize) -> Option<usize> {
    let padded = dim + 2 * pad;
    if kernel == 0 || stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Output size of a max-pool with window == stride (floor division).
pub fn pool_output_dim(dim: usize, window: usize) -> usize {
    dim / window
}

/// conv2d forward for a batch: input (b, ci, h, w) -> output (b, co, oh, ow).
#[allow(clippy::too_many_arguments)]
pub fn conv_forward<R: Real>(
    input: &[R],
    b: usize,
    ci: usize,
    h: usize,
    w: usize,
    weight: &[R],
    bias: &[R],
    co: usize,
    kernel: usize,
    pad: usize,
    stride: usize,
) -> Vec<R> {
    let oh = conv_output_dim(h, kernel, pad, stride).expect("validated");
    let ow = conv_output_dim(w, kernel, pad, stride).expect("validated");
    let mut out = vec![R::ZERO; b * co * oh * ow];
    for bi in 0..b {
        for o in 0..co {
            let w_base_o = o * ci * kernel * kernel;
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = bias[o].to_f64();
                    for i in 0..ci {
                        let in_base = (bi * ci + i) * h * w;
                        let w_base = w_base_o + i * kernel * kernel;
                        for ky in 0..kernel {
                            let iy = y * stride + ky;
                            if iy < pad || iy - pad >= h {
                                continue;
                            }
                            let iy = iy - pad;
                            for kx in 0..kernel {
                                let ix = x * stride + kx;
                                if ix < pad || ix - pad >= w {
                                    continue;
                                }
                                let ix = ix - pad;
                                acc += weight[w_base + ky * kernel + kx].to_f64()
                                    * input[in_base + iy * w + ix].to_f64();
                            }
                        }
                    }
                    out[((bi * co + o) * oh + y) * ow + x] = R::from_f64(acc);
                }
            }
        }
    }
    out
}

/// conv2d backward: gradients w.r.t. weight, bias, and input (all f64).
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<R: Real>(
    input: &[R],
    b: usize,
    ci: usize,
    h: usize,
    w: usize,
    weight: &[R],
    co: usize,
    kernel: usize,
    pad: usize,
    stride: usize,
    dout: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let oh = conv_output_dim(h, kernel, pad, stride).expect("validated");
    let ow = conv_output_dim(w, kernel, pad, stride).expect("validated");
    let mut dw = vec![0.0; co * ci * kernel * kernel];
    let mut db = vec![0.0; co];
    let mut din = vec![0.0; b * ci * h * w];
    for bi in 0..b {
        for o in 0..co {
            let w_base_o = o * ci * kernel * kernel;
            for y in 0..oh {
                for x in 0..ow {
                    let g = dout[((bi * co + o) * oh + y) * ow + x];
                    db[o] += g;
                    if g == 0.0 {
                        continue;
                    }
                    for i in 0..ci {
                        let in_base = (bi * ci + i) * h * w;
                        let w_base = w_base_o + i * kernel * kernel;
                        for ky in 0..kernel {
                            let iy = y * stride + ky;
                            if iy < pad || iy - pad >= h {
                                continue;
                            }
                            let iy = iy - pad;
                            for kx in 0..kernel {
                                let ix = x * stride + kx;
                                if ix < pad || ix - pad >= w {
                                    continue;
                                }
                                let ix = ix - pad;
                                dw[w_base + ky * kernel + kx] +=
                                    g * input[in_base + iy * w + ix].to_f64();
                                din[in_base + iy * w + ix] +=
                                    g * weight[w_base + ky * kernel + kx].to_f64();
                            }
                        }
                    }
                }
            }
        }
    }
    (dw, db, din)
}

/// Max-pool forward with window == stride. Returns pooled values and the
/// flat input index of each maximum (first occurrence wins on ties, so the
/// routing is deterministic).
pub fn pool_forward<R: Real>(
    input: &[R],
    b: usize,
    c: usize,
    h: usize,
    w: usize,
    window: usize,
) -> (Vec<R>, Vec<usize>) {
    let oh = pool_output_dim(h, window);
    let ow = pool_output_dim(w, window);
    let mut out = vec![R::ZERO; b * c * oh * ow];
    let mut argmax = vec![0usize; b * c * oh * ow];
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * h * w;
            for y in 0..oh {
                for x in 0..ow {
                    let mut best_idx = base + (y * window) * w + x * window;
                    let mut best = input[best_idx];
                    for wy in 0..window {
                        for wx in 0..window {
                            let idx = base + (y * window + wy) * w + (x * window + wx);
                            if input[idx] > best {
                                best = input[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let oidx = ((bi * c + ch) * oh + y) * ow + x;
                    out[oidx] = best;
                    argmax[oidx] = best_idx;
                }
            }
        }
    }
    (out, argmax)
}

/// Max-pool backward: route each output gradient to its argmax cell.
pub fn pool_backward(dout: &[f64], argmax: &[usize], input_len: usize) -> Vec<f64> {
    let mut din = vec![0.0; input_len];
    for (g, &idx) in dout.iter().zip(argmax) {
        din[idx] += g;
    }
    din
}

/// relu forward.
pub fn relu_forward<R: Real>(input: &[R]) -> Vec<R> {
    input.iter().map(|&x| x.max(R::ZERO)).collect()
}

/// relu backward given the forward input.
pub fn relu_backward<R: Real>(input: &[R], dout: &[f64]) -> Vec<f64> {
    input
        .iter()
        .zip(dout)
        .map(|(&x, &g)| if x > R::ZERO { g } else { 0.0 })
        .collect()
}

/// Dense forward: input (b, f), weight (o, f), bias (o) -> (b, o).
pub fn dense_forward<R: Real>(
    input: &[R],
    b: usize,
    f: usize,
    weight: &[R],
    bias: &[R],
    o: usize,
) -> Vec<R> {
    let mut out = vec![R::ZERO; b * o];
    for bi in 0..b {
        let in_base = bi * f;
        for oi in 0..o {
            let w_base = oi * f;
            let mut acc = bias[oi].to_f64();
            for fi in 0..f {
                acc += weight[w_base + fi].to_f64() * input[in_base + fi].to_f64();
            }
            out[bi * o + oi] = R::from_f64(acc);
        }
    }
    out
}

/// Dense backward: gradients w.r.t. weight, bias, and input.
pub fn dense_backward<R: Real>(
    input: &[R],
    b: usize,
    f: usize,
    weight: &[R],
    o: usize,
    dout: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut dw = vec![0.0; o * f];
    let mut db = vec![0.0; o];
    let mut din = vec![0.0; b * f];
    for bi in 0..b {
        let in_base = bi * f;
        for oi in 0..o {
            let g = dout[bi * o + oi];
            db[oi] += g;
            if g == 0.0 {
                continue;
            }
            let w_base = oi * f;
            for fi in 0..f {
                dw[w_base + fi] += g * input[in_base + fi].to_f64();
                din[in_base + fi] += g * weight[w_base + fi].to_f64();
            }
        }
    }
    (dw, db, din)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_delta_kernel() {
        // 3x3 input, one 3x3 kernel with centered delta, pad 1 stride 1
        let input: Vec<f64> = (1..=9).map(f64::from).collect();
        let mut weight = vec![0.0f64; 9];
        weight[4] = 1.0;
        let out = conv_forward(&input, 1, 1, 3, 3, &weight, &[0.0], 1, 3, 1, 1);
        assert_eq!(out, input);
    }

    #[test]
    fn conv_one_by_one_identity() {
        let input: Vec<f64> = vec![2.0, -3.0, 4.0, 0.5];
        let out = conv_forward(&input, 1, 1, 2, 2, &[1.0], &[0.0], 1, 1, 0, 1);
        assert_eq!(out, input);
    }

    #[test]
    fn conv_zero_weights_zero_logits() {
        let input = vec![1.0f64; 2 * 3 * 4 * 4];
        let weight = vec![0.0f64; 5 * 3 * 9];
        let bias = vec![0.0f64; 5];
        let out = conv_forward(&input, 2, 3, 4, 4, &weight, &bias, 5, 3, 1, 1);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_known_sum() {
        // 2x2 input of ones, 2x2 kernel of ones, no pad -> single output 4
        let out = conv_forward(&vec![1.0f64; 4], 1, 1, 2, 2, &vec![1.0; 4], &[0.0], 1, 2, 0, 1);
        assert_eq!(out, vec![4.0]);
    }

    #[test]
    fn pool_picks_max_and_routes() {
        let input = vec![1.0f64, 5.0, 3.0, 2.0, 0.0, 0.0, 0.0, 9.0, 4.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let (out, argmax) = pool_forward(&input, 1, 1, 4, 4, 2);
        assert_eq!(out, vec![5.0, 3.0, 9.0, 4.0]);
        assert_eq!(argmax[0], 1);
        let din = pool_backward(&[1.0, 1.0, 1.0, 1.0], &argmax, 16);
        assert_eq!(din.iter().sum::<f64>(), 4.0);
        assert_eq!(din[1], 1.0);
    }

    #[test]
    fn pool_tie_routes_to_first() {
        let input = vec![7.0f64, 7.0, 7.0, 7.0];
        let (_, argmax) = pool_forward(&input, 1, 1, 2, 2, 2);
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn relu_gates_gradient() {
        let x = vec![-1.0f64, 0.0, 2.0];
        assert_eq!(relu_forward(&x), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu_backward(&x, &[5.0, 5.0, 5.0]), vec![0.0, 0.0, 5.0]);
    }

    #[test]
    fn dense_matches_hand_product() {
        // [1 2; 3 4] * [1, 1]^T + [0.5] per row
        let out = dense_forward(&[1.0f64, 1.0], 1, 2, &[1.0, 2.0, 3.0, 4.0], &[0.5, 0.5], 2);
        assert_eq!(out, vec![3.5, 7.5]);
    }

    #[test]
    fn dense_backward_shapes_and_values() {
        let input = vec![1.0f64, 2.0];
        let weight = vec![3.0f64, 4.0];
        let (dw, db, din) = dense_backward(&input, 1, 2, &weight, 1, &[2.0]);
        assert_eq!(dw, vec![2.0, 4.0]);
        assert_eq!(db, vec![2.0]);
        assert_eq!(din, vec![6.0, 8.0]);
    }
}
