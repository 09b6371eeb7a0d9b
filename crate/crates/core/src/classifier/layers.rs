//! Single-sample layer kernels. Activations are HWC, convolution weights are
//! `[ky][kx][c_in][c_out]`, dense weights are `[in][out]`.

use super::Scalar;

/// 3×3 convolution, stride 1, zero "same" padding.
pub fn conv3x3_forward<F: Scalar>(
    input: &[F],
    h: usize,
    w: usize,
    c_in: usize,
    weight: &[F],
    bias: &[F],
) -> Vec<F> {
    let c_out = bias.len();
    debug_assert_eq!(input.len(), h * w * c_in);
    debug_assert_eq!(weight.len(), 9 * c_in * c_out);
    let mut out = vec![F::zero(); h * w * c_out];
    for y in 0..h {
        for x in 0..w {
            let o = &mut out[(y * w + x) * c_out..(y * w + x + 1) * c_out];
            o.copy_from_slice(bias);
            for ky in 0..3 {
                let Some(iy) = (y + ky).checked_sub(1).filter(|&v| v < h) else {
                    continue;
                };
                for kx in 0..3 {
                    let Some(ix) = (x + kx).checked_sub(1).filter(|&v| v < w) else {
                        continue;
                    };
                    let px = &input[(iy * w + ix) * c_in..(iy * w + ix + 1) * c_in];
                    let wk = &weight[(ky * 3 + kx) * c_in * c_out..(ky * 3 + kx + 1) * c_in * c_out];
                    for (ci, &a) in px.iter().enumerate() {
                        if a == F::zero() {
                            continue;
                        }
                        let row = &wk[ci * c_out..(ci + 1) * c_out];
                        for (acc, &wv) in o.iter_mut().zip(row) {
                            *acc += a * wv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of [`conv3x3_forward`]. Adds into `grad_weight` and `grad_bias`;
/// returns the input gradient when `want_input` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv3x3_backward<F: Scalar>(
    input: &[F],
    h: usize,
    w: usize,
    c_in: usize,
    weight: &[F],
    grad_out: &[F],
    grad_weight: &mut [F],
    grad_bias: &mut [F],
    want_input: bool,
) -> Option<Vec<F>> {
    let c_out = grad_bias.len();
    debug_assert_eq!(grad_out.len(), h * w * c_out);
    let mut grad_in = want_input.then(|| vec![F::zero(); h * w * c_in]);
    for y in 0..h {
        for x in 0..w {
            let g = &grad_out[(y * w + x) * c_out..(y * w + x + 1) * c_out];
            if g.iter().all(|&v| v == F::zero()) {
                continue;
            }
            for (gb, &gv) in grad_bias.iter_mut().zip(g) {
                *gb += gv;
            }
            for ky in 0..3 {
                let Some(iy) = (y + ky).checked_sub(1).filter(|&v| v < h) else {
                    continue;
                };
                for kx in 0..3 {
                    let Some(ix) = (x + kx).checked_sub(1).filter(|&v| v < w) else {
                        continue;
                    };
                    let base = (iy * w + ix) * c_in;
                    let koff = (ky * 3 + kx) * c_in * c_out;
                    for ci in 0..c_in {
                        let a = input[base + ci];
                        let range = koff + ci * c_out..koff + (ci + 1) * c_out;
                        if a != F::zero() {
                            for (gw, &gv) in grad_weight[range.clone()].iter_mut().zip(g) {
                                *gw += a * gv;
                            }
                        }
                        if let Some(gi) = grad_in.as_mut() {
                            let dot: F = weight[range].iter().zip(g).map(|(&wv, &gv)| wv * gv).sum();
                            gi[base + ci] += dot;
                        }
                    }
                }
            }
        }
    }
    grad_in
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Returns the pooled map and, per output element, the flat input index that
/// won (first maximum in scan order).
pub fn maxpool2_forward<F: Scalar>(input: &[F], h: usize, w: usize, c: usize) -> (Vec<F>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut arg = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best_i = ((2 * oy) * w + 2 * ox) * c + ch;
                let mut best = input[best_i];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                    if input[i] > best {
                        best = input[i];
                        best_i = i;
                    }
                }
                out.push(best);
                arg.push(best_i as u32);
            }
        }
    }
    (out, arg)
}

pub fn maxpool2_backward<F: Scalar>(grad_out: &[F], argmax: &[u32], input_len: usize) -> Vec<F> {
    let mut grad_in = vec![F::zero(); input_len];
    for (&g, &i) in grad_out.iter().zip(argmax) {
        grad_in[i as usize] += g;
    }
    grad_in
}

/// Mean of each channel over all spatial positions.
pub fn global_avg_pool<F: Scalar>(input: &[F], hw: usize, c: usize) -> Vec<F> {
    let mut out = vec![F::zero(); c];
    for px in input.chunks_exact(c) {
        for (o, &v) in out.iter_mut().zip(px) {
            *o += v;
        }
    }
    let scale = F::one() / F::of(hw as f64);
    out.iter_mut().for_each(|v| *v = *v * scale);
    out
}

pub fn dense_forward<F: Scalar>(input: &[F], weight: &[F], bias: &[F]) -> Vec<F> {
    let n_out = bias.len();
    debug_assert_eq!(weight.len(), input.len() * n_out);
    let mut out = bias.to_vec();
    for (i, &a) in input.iter().enumerate() {
        if a == F::zero() {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(&weight[i * n_out..(i + 1) * n_out]) {
            *o += a * wv;
        }
    }
    out
}

/// Adds weight/bias gradients and returns the input gradient.
pub fn dense_backward<F: Scalar>(
    input: &[F],
    weight: &[F],
    grad_out: &[F],
    grad_weight: &mut [F],
    grad_bias: &mut [F],
) -> Vec<F> {
    let n_out = grad_out.len();
    for (gb, &g) in grad_bias.iter_mut().zip(grad_out) {
        *gb += g;
    }
    let mut grad_in = Vec::with_capacity(input.len());
    for (i, &a) in input.iter().enumerate() {
        let row = i * n_out..(i + 1) * n_out;
        if a != F::zero() {
            for (gw, &g) in grad_weight[row.clone()].iter_mut().zip(grad_out) {
                *gw += a * g;
            }
        }
        grad_in.push(weight[row].iter().zip(grad_out).map(|(&wv, &g)| wv * g).sum());
    }
    grad_in
}

/// Numerically stable softmax.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_kernel() {
        // Center tap 1 on the single channel copies the input.
        let input: Vec<f64> = (0..12).map(f64::from).collect();
        let mut weight = vec![0.0; 9];
        weight[4] = 1.0;
        let out = conv3x3_forward(&input, 3, 4, 1, &weight, &[0.5]);
        let expected: Vec<f64> = input.iter().map(|v| v + 0.5).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn conv_box_sum_with_padding() {
        let input = vec![1.0f64; 9];
        let weight = vec![1.0; 9];
        let out = conv3x3_forward(&input, 3, 3, 1, &weight, &[0.0]);
        assert_eq!(out, vec![4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn maxpool_picks_first_max() {
        let input = vec![1.0f64, 3.0, 3.0, 2.0];
        let (out, arg) = maxpool2_forward(&input, 2, 2, 1);
        assert_eq!(out, vec![3.0]);
        assert_eq!(arg, vec![1]);
        assert_eq!(maxpool2_backward(&[5.0], &arg, 4), vec![0.0, 5.0, 0.0, 0.0]);
    }

    #[test]
    fn maxpool_drops_odd_edge() {
        let input: Vec<f64> = (0..15).map(f64::from).collect();
        let (out, _) = maxpool2_forward(&input, 3, 5, 1);
        assert_eq!(out, vec![6.0, 8.0]);
    }

    #[test]
    fn gap_means_channels() {
        let input = vec![1.0f64, 10.0, 3.0, 20.0];
        assert_eq!(global_avg_pool(&input, 2, 2), vec![2.0, 15.0]);
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        assert_eq!(softmax(&[0.0f64, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1000.0f64, -1000.0]);
        assert!(p[0] == 1.0 && p[1] >= 0.0);
    }

    #[test]
    fn dense_matches_hand_product() {
        let out = dense_forward(&[1.0f64, 2.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.5, 0.0, -0.5]);
        assert_eq!(out, vec![9.5, 12.0, 14.5]);
    }
}
