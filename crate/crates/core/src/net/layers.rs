//! Per-item layer kernels on channels-last `(h, w, c)` feature maps.
//!
//! Every forward kernel has a matching backward kernel that maps the
//! gradient of the output back to the gradient of the input and, where the
//! layer has parameters, accumulates into the parameter gradients.

/// Spatial extent of a channels-last feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Dims {
    pub fn new(h: usize, w: usize, c: usize) -> Self {
        Self { h, w, c }
    }

    pub fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_channels(self, c: usize) -> Self {
        Self { c, ..self }
    }

    pub fn halved(self) -> Self {
        Self {
            h: self.h / 2,
            w: self.w / 2,
            c: self.c,
        }
    }

    pub fn doubled(self) -> Self {
        Self {
            h: self.h * 2,
            w: self.w * 2,
            c: self.c,
        }
    }
}

pub const KERNEL: usize = 3;

/// Number of weights of a 3x3 convolution.
pub fn conv_weight_len(in_c: usize, out_c: usize) -> usize {
    out_c * KERNEL * KERNEL * in_c
}

#[inline]
fn tap(dims: Dims, y: usize, x: usize, ky: usize, kx: usize) -> Option<usize> {
    let iy = (y + ky).checked_sub(1)?;
    let ix = (x + kx).checked_sub(1)?;
    (iy < dims.h && ix < dims.w).then_some(iy * dims.w + ix)
}

/// 3x3 convolution, stride 1, zero "same" padding.
///
/// `weight` is laid out `(out_c, ky, kx, in_c)`.
pub fn conv3x3(input: &[f64], dims: Dims, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let in_c = dims.c;
    let out_c = bias.len();
    debug_assert_eq!(input.len(), dims.len());
    debug_assert_eq!(weight.len(), conv_weight_len(in_c, out_c));
    let mut out = vec![0.0; dims.h * dims.w * out_c];
    for y in 0..dims.h {
        for x in 0..dims.w {
            let o = &mut out[(y * dims.w + x) * out_c..][..out_c];
            o.copy_from_slice(bias);
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let Some(pix) = tap(dims, y, x, ky, kx) else {
                        continue;
                    };
                    let inp = &input[pix * in_c..][..in_c];
                    for (oc, acc) in o.iter_mut().enumerate() {
                        let wk = &weight[((oc * KERNEL + ky) * KERNEL + kx) * in_c..][..in_c];
                        *acc += wk.iter().zip(inp).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
        }
    }
    out
}

/// Backward pass of [`conv3x3`]. Accumulates into `grad_weight` and
/// `grad_bias`; returns the input gradient when `want_input` is set.
pub fn conv3x3_backward(
    input: &[f64],
    dims: Dims,
    weight: &[f64],
    grad_out: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let in_c = dims.c;
    let out_c = grad_bias.len();
    let mut grad_in = want_input.then(|| vec![0.0; input.len()]);
    for y in 0..dims.h {
        for x in 0..dims.w {
            let g = &grad_out[(y * dims.w + x) * out_c..][..out_c];
            for (gb, gv) in grad_bias.iter_mut().zip(g) {
                *gb += gv;
            }
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let Some(pix) = tap(dims, y, x, ky, kx) else {
                        continue;
                    };
                    let inp = &input[pix * in_c..][..in_c];
                    for (oc, &gv) in g.iter().enumerate() {
                        if gv == 0.0 {
                            continue;
                        }
                        let off = ((oc * KERNEL + ky) * KERNEL + kx) * in_c;
                        for (gw, xv) in grad_weight[off..off + in_c].iter_mut().zip(inp) {
                            *gw += gv * xv;
                        }
                        if let Some(gi) = grad_in.as_mut() {
                            let gi = &mut gi[pix * in_c..][..in_c];
                            for (gx, wv) in gi.iter_mut().zip(&weight[off..off + in_c]) {
                                *gx += gv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    grad_in
}

pub fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Masks `grad` by the ReLU derivative, read off the activated output.
pub fn relu_backward_in_place(output: &[f64], grad: &mut [f64]) {
    for (g, &o) in grad.iter_mut().zip(output) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
}

/// 2x2 max-pool with stride 2. Returns the pooled map and, for every
/// output element, the flat input index that won.
pub fn maxpool2(input: &[f64], dims: Dims) -> (Vec<f64>, Vec<usize>) {
    let od = dims.halved();
    let c = dims.c;
    let mut out = vec![0.0; od.len()];
    let mut arg = vec![0usize; od.len()];
    for y in 0..od.h {
        for x in 0..od.w {
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * y + dy) * dims.w + 2 * x + dx) * c + ch;
                    if input[idx] > best {
                        best = input[idx];
                        best_idx = idx;
                    }
                }
                let o = (y * od.w + x) * c + ch;
                out[o] = best;
                arg[o] = best_idx;
            }
        }
    }
    (out, arg)
}

pub fn maxpool2_backward(argmax: &[usize], grad_out: &[f64], input_len: usize) -> Vec<f64> {
    let mut grad = vec![0.0; input_len];
    for (&i, &g) in argmax.iter().zip(grad_out) {
        grad[i] += g;
    }
    grad
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2(input: &[f64], dims: Dims) -> Vec<f64> {
    let od = dims.doubled();
    let c = dims.c;
    let mut out = vec![0.0; od.len()];
    for y in 0..od.h {
        for x in 0..od.w {
            let src = &input[((y / 2) * dims.w + x / 2) * c..][..c];
            out[(y * od.w + x) * c..][..c].copy_from_slice(src);
        }
    }
    out
}

/// Backward of [`upsample2`]; `dims` are the dimensions of the small map.
pub fn upsample2_backward(grad_out: &[f64], dims: Dims) -> Vec<f64> {
    let od = dims.doubled();
    let c = dims.c;
    let mut grad = vec![0.0; dims.len()];
    for y in 0..od.h {
        for x in 0..od.w {
            let dst = &mut grad[((y / 2) * dims.w + x / 2) * c..][..c];
            for (d, g) in dst.iter_mut().zip(&grad_out[(y * od.w + x) * c..][..c]) {
                *d += g;
            }
        }
    }
    grad
}

/// Channel-wise concatenation of two maps with the same spatial extent.
pub fn concat_channels(a: &[f64], ca: usize, b: &[f64], cb: usize) -> Vec<f64> {
    let pixels = a.len() / ca;
    debug_assert_eq!(b.len(), pixels * cb);
    let mut out = Vec::with_capacity(pixels * (ca + cb));
    for p in 0..pixels {
        out.extend_from_slice(&a[p * ca..][..ca]);
        out.extend_from_slice(&b[p * cb..][..cb]);
    }
    out
}

pub fn concat_channels_backward(grad: &[f64], ca: usize, cb: usize) -> (Vec<f64>, Vec<f64>) {
    let pixels = grad.len() / (ca + cb);
    let mut ga = Vec::with_capacity(pixels * ca);
    let mut gb = Vec::with_capacity(pixels * cb);
    for p in 0..pixels {
        let g = &grad[p * (ca + cb)..][..ca + cb];
        ga.extend_from_slice(&g[..ca]);
        gb.extend_from_slice(&g[ca..]);
    }
    (ga, gb)
}

/// `y = W x + b` with `W` laid out `(out, in)`.
pub fn dense(input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let n_in = input.len();
    bias.iter()
        .enumerate()
        .map(|(o, b)| {
            b + weight[o * n_in..][..n_in]
                .iter()
                .zip(input)
                .map(|(w, x)| w * x)
                .sum::<f64>()
        })
        .collect()
}

pub fn dense_backward(
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
) -> Vec<f64> {
    let n_in = input.len();
    let mut grad_in = vec![0.0; n_in];
    for (o, &g) in grad_out.iter().enumerate() {
        grad_bias[o] += g;
        let row = o * n_in;
        for i in 0..n_in {
            grad_weight[row + i] += g * input[i];
            grad_in[i] += g * weight[row + i];
        }
    }
    grad_in
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    /// Checks `grad` against central differences of the scalar `f` at `x`.
    fn check_fd(x: &[f64], grad: &[f64], f: impl Fn(&[f64]) -> f64) {
        let h = 1e-5;
        for i in 0..x.len() {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            assert!(rel_err(grad[i], fd) < 1e-6, "index {i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn conv_identity_kernel_copies_input() {
        let dims = Dims::new(3, 4, 1);
        let input: Vec<f64> = (0..12).map(f64::from).collect();
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        assert_eq!(conv3x3(&input, dims, &w, &[0.0]), input);
    }

    #[test]
    fn conv_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = Dims::new(4, 3, 2);
        let (in_c, out_c) = (2, 3);
        let x = random(dims.len(), &mut rng);
        let w = random(conv_weight_len(in_c, out_c), &mut rng);
        let b = random(out_c, &mut rng);
        let probe = random(dims.h * dims.w * out_c, &mut rng);
        let mut gw = vec![0.0; w.len()];
        let mut gb = vec![0.0; out_c];
        let gx = conv3x3_backward(&x, dims, &w, &probe, &mut gw, &mut gb, true).unwrap();
        check_fd(&x, &gx, |x| dot(&conv3x3(x, dims, &w, &b), &probe));
        check_fd(&w, &gw, |w| dot(&conv3x3(&x, dims, w, &b), &probe));
        check_fd(&b, &gb, |b| dot(&conv3x3(&x, dims, &w, b), &probe));
    }

    #[test]
    fn dense_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(5, &mut rng);
        let w = random(15, &mut rng);
        let b = random(3, &mut rng);
        let probe = random(3, &mut rng);
        let mut gw = vec![0.0; 15];
        let mut gb = vec![0.0; 3];
        let gx = dense_backward(&x, &w, &probe, &mut gw, &mut gb);
        check_fd(&x, &gx, |x| dot(&dense(x, &w, &b), &probe));
        check_fd(&w, &gw, |w| dot(&dense(&x, w, &b), &probe));
        check_fd(&b, &gb, |b| dot(&dense(&x, &w, b), &probe));
    }

    #[test]
    fn relu_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // keep inputs away from the kink
        let x: Vec<f64> = random(20, &mut rng)
            .into_iter()
            .map(|v| if v.abs() < 0.05 { v + 0.1 } else { v })
            .collect();
        let probe = random(20, &mut rng);
        let f = |x: &[f64]| {
            let mut y = x.to_vec();
            relu_in_place(&mut y);
            dot(&y, &probe)
        };
        let mut y = x.clone();
        relu_in_place(&mut y);
        let mut g = probe.clone();
        relu_backward_in_place(&y, &mut g);
        check_fd(&x, &g, f);
    }

    #[test]
    fn sigmoid_gradient_and_stability() {
        for z in [-3.0, -0.2, 0.0, 0.7, 4.0] {
            let h = 1e-6;
            let fd = (sigmoid(z + h) - sigmoid(z - h)) / (2.0 * h);
            let s = sigmoid(z);
            assert!(rel_err(s * (1.0 - s), fd) < 1e-8);
        }
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn pool_upsample_concat_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dims = Dims::new(4, 6, 2);
        let x = random(dims.len(), &mut rng);

        let probe = random(dims.halved().len(), &mut rng);
        let (_, arg) = maxpool2(&x, dims);
        let g = maxpool2_backward(&arg, &probe, x.len());
        check_fd(&x, &g, |x| dot(&maxpool2(x, dims).0, &probe));

        let probe = random(dims.doubled().len(), &mut rng);
        let g = upsample2_backward(&probe, dims);
        check_fd(&x, &g, |x| dot(&upsample2(x, dims), &probe));

        let other = random(dims.h * dims.w * 3, &mut rng);
        let probe = random(dims.h * dims.w * 5, &mut rng);
        let (ga, gb) = concat_channels_backward(&probe, 2, 3);
        check_fd(&x, &ga, |x| dot(&concat_channels(x, 2, &other, 3), &probe));
        check_fd(&other, &gb, |o| dot(&concat_channels(&x, 2, o, 3), &probe));
    }

    #[test]
    fn pool_and_upsample_shapes() {
        let dims = Dims::new(2, 2, 1);
        let (p, arg) = maxpool2(&[1.0, 4.0, 3.0, 2.0], dims);
        assert_eq!(p, vec![4.0]);
        assert_eq!(arg, vec![1]);
        let up = upsample2(&[1.0, 2.0], Dims::new(1, 1, 2));
        assert_eq!(up, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(concat_channels(&[1.0, 2.0], 1, &[3.0, 4.0], 1), vec![1.0, 3.0, 2.0, 4.0]);
    }
}
