//! The operator network: lifting, spectral blocks with a parallel pointwise
//! path, and a per-time-step fully connected head. Forward pass caches every
//! pre-activation so the hand-written backward pass can produce exact
//! reverse-mode gradients.

use super::arch::{ArchConfig, Layout};
use super::spectral::{spectral_backward, spectral_forward, SavedCoeffs, SpectralOps, SpectralScratch};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Smooth activation (tanh-form GELU).
#[inline]
pub fn gelu(x: f64) -> f64 {
    const A: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    const B: f64 = 0.044715;
    0.5 * x * (1.0 + (A * (x + B * x * x * x)).tanh())
}

/// Derivative of [`gelu`].
#[inline]
pub fn dgelu(x: f64) -> f64 {
    const A: f64 = 0.797_884_560_802_865_4;
    const B: f64 = 0.044715;
    let inner = A * (x + B * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * A * (1.0 + 3.0 * B * x * x)
}

/// The approximated solution operator: parameters in one flat vector.
#[derive(Debug, Clone)]
pub struct OperatorModel {
    pub arch: ArchConfig,
    pub layout: Layout,
    pub params: Vec<f64>,
}

/// Deterministic initialization: Glorot-uniform affine layers, zero biases,
/// spectral weights uniform with the 1/(w*w) scale.
pub fn init_model(arch: &ArchConfig, seed: u64) -> Result<OperatorModel> {
    arch.validate()?;
    let layout = Layout::new(arch);
    let mut params = vec![0.0; layout.n_params];
    let mut rng = Rng::new(seed);

    fn glorot(
        rng: &mut Rng,
        params: &mut [f64],
        range: std::ops::Range<usize>,
        fan_in: usize,
        fan_out: usize,
    ) {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for i in range {
            params[i] = rng.uniform_in(-limit, limit);
        }
    }

    glorot(
        &mut rng,
        &mut params,
        layout.lift_w.clone(),
        arch.in_channels,
        arch.width,
    );
    let spectral_scale = 1.0 / (arch.width * arch.width) as f64;
    for b in &layout.blocks {
        for i in b.r_re.clone().chain(b.r_im.clone()) {
            params[i] = rng.uniform_in(-spectral_scale, spectral_scale);
        }
        glorot(&mut rng, &mut params, b.pt_w.clone(), arch.width, arch.width);
    }
    let dims = arch.head_dims();
    for (l, (wr, _)) in layout.head.iter().enumerate() {
        glorot(&mut rng, &mut params, wr.clone(), dims[l], dims[l + 1]);
    }
    Ok(OperatorModel {
        arch: arch.clone(),
        layout,
        params,
    })
}

/// Everything the backward pass needs from one forward evaluation.
pub struct ForwardCache {
    /// Input, `n_t x in_channels`.
    pub input: Vec<f64>,
    /// Output of the lifting layer (input to block 0).
    pub lift_out: Vec<f64>,
    /// Per block: pre-activation sum and the activated output.
    pub block_pre: Vec<Vec<f64>>,
    pub block_out: Vec<Vec<f64>>,
    /// Per block: retained input spectrum for the weight gradient.
    pub block_coeffs: Vec<SavedCoeffs>,
    /// Per head layer: pre-activation output.
    pub head_pre: Vec<Vec<f64>>,
    /// Final output, `n_t x out_channels`, normalized scale.
    pub output: Vec<f64>,
}

fn affine_forward(w: &[f64], b: &[f64], x: &[f64], n: usize, d_in: usize, d_out: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * d_out];
    for t in 0..n {
        let x_row = &x[t * d_in..(t + 1) * d_in];
        let o_row = &mut out[t * d_out..(t + 1) * d_out];
        for (o, ov) in o_row.iter_mut().enumerate() {
            let w_row = &w[o * d_in..(o + 1) * d_in];
            let mut acc = b[o];
            for (wv, xv) in w_row.iter().zip(x_row.iter()) {
                acc += wv * xv;
            }
            *ov = acc;
        }
    }
    out
}

/// Accumulate affine gradients; writes the input gradient if requested.
#[allow(clippy::too_many_arguments)]
fn affine_backward(
    w: &[f64],
    x: &[f64],
    g_out: &[f64],
    n: usize,
    d_in: usize,
    d_out: usize,
    g_w: &mut [f64],
    g_b: &mut [f64],
    mut g_x: Option<&mut [f64]>,
) {
    for t in 0..n {
        let x_row = &x[t * d_in..(t + 1) * d_in];
        let g_row = &g_out[t * d_out..(t + 1) * d_out];
        for (o, &go) in g_row.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            g_b[o] += go;
            let w_grad_row = &mut g_w[o * d_in..(o + 1) * d_in];
            for (gv, xv) in w_grad_row.iter_mut().zip(x_row.iter()) {
                *gv += go * xv;
            }
            if let Some(gx) = g_x.as_deref_mut() {
                let gx_row = &mut gx[t * d_in..(t + 1) * d_in];
                let w_row = &w[o * d_in..(o + 1) * d_in];
                for (g, wv) in gx_row.iter_mut().zip(w_row.iter()) {
                    *g += go * wv;
                }
            }
        }
    }
}

impl OperatorModel {
    pub fn n_params(&self) -> usize {
        self.layout.n_params
    }

    /// Forward pass for one sample. `input` is `n_t x in_channels`,
    /// already normalized and with the time channel appended.
    pub fn forward(
        &self,
        ops: &SpectralOps,
        scratch: &mut SpectralScratch,
        input: &[f64],
    ) -> Result<ForwardCache> {
        let a = &self.arch;
        let n = a.n_t;
        if input.len() != n * a.in_channels {
            return Err(Error::Dimension {
                context: "model forward",
                expected: n * a.in_channels,
                got: input.len(),
            });
        }
        if ops.n != n {
            return Err(Error::Dimension {
                context: "model forward grid",
                expected: n,
                got: ops.n,
            });
        }
        let p = &self.params;
        let w = a.width;

        let lift_out = affine_forward(
            &p[self.layout.lift_w.clone()],
            &p[self.layout.lift_b.clone()],
            input,
            n,
            a.in_channels,
            w,
        );

        let mut block_pre = Vec::with_capacity(a.depth);
        let mut block_out = Vec::with_capacity(a.depth);
        let mut block_coeffs = Vec::with_capacity(a.depth);
        let mut x = lift_out.clone();
        for b in &self.layout.blocks {
            let mut spec = vec![0.0; n * w];
            let coeffs = spectral_forward(
                ops,
                scratch,
                &p[b.r_re.clone()],
                &p[b.r_im.clone()],
                a.k_modes,
                w,
                &x,
                &mut spec,
            );
            let mut pre = affine_forward(&p[b.pt_w.clone()], &p[b.pt_b.clone()], &x, n, w, w);
            for (pv, sv) in pre.iter_mut().zip(spec.iter()) {
                *pv += sv;
            }
            let out: Vec<f64> = pre.iter().map(|&v| gelu(v)).collect();
            block_pre.push(pre);
            block_coeffs.push(coeffs);
            x = out.clone();
            block_out.push(out);
        }

        let dims = a.head_dims();
        let mut head_pre = Vec::with_capacity(a.fc_depth);
        let mut h = x;
        for (l, (wr, br)) in self.layout.head.iter().enumerate() {
            let z = affine_forward(&p[wr.clone()], &p[br.clone()], &h, n, dims[l], dims[l + 1]);
            head_pre.push(z.clone());
            if l + 1 < a.fc_depth {
                h = z.iter().map(|&v| gelu(v)).collect();
            } else {
                h = z;
            }
        }
        let output = h;

        Ok(ForwardCache {
            input: input.to_vec(),
            lift_out,
            block_pre,
            block_out,
            block_coeffs,
            head_pre,
            output,
        })
    }

    /// Reverse-mode pass: accumulates parameter gradients into `grad`
    /// (flat, same layout as `params`) given the loss gradient with respect
    /// to the output.
    pub fn backward(
        &self,
        ops: &SpectralOps,
        scratch: &mut SpectralScratch,
        cache: &ForwardCache,
        g_output: &[f64],
        grad: &mut [f64],
    ) {
        let a = &self.arch;
        let n = a.n_t;
        let w = a.width;
        let p = &self.params;
        debug_assert_eq!(grad.len(), self.layout.n_params);
        debug_assert_eq!(g_output.len(), n * a.out_channels);

        let dims = a.head_dims();
        // Head, last layer first.
        let mut g_z: Vec<f64> = g_output.to_vec();
        for l in (0..a.fc_depth).rev() {
            let (wr, br) = &self.layout.head[l];
            let h_l: &[f64] = if l == 0 {
                &cache.block_out[a.depth - 1]
            } else {
                // Activated output of the previous head layer, rebuilt from
                // its cached pre-activation.
                &cache.head_pre[l - 1]
            };
            let activated;
            let h_ref: &[f64] = if l == 0 {
                h_l
            } else {
                activated = h_l.iter().map(|&v| gelu(v)).collect::<Vec<f64>>();
                &activated
            };
            let mut g_h = vec![0.0; n * dims[l]];
            {
                let (g_head, g_rest) = split_two(grad, wr.clone(), br.clone());
                affine_backward(
                    &p[wr.clone()],
                    h_ref,
                    &g_z,
                    n,
                    dims[l],
                    dims[l + 1],
                    g_head,
                    g_rest,
                    Some(&mut g_h),
                );
            }
            if l > 0 {
                let pre = &cache.head_pre[l - 1];
                g_z = g_h
                    .iter()
                    .zip(pre.iter())
                    .map(|(g, &z)| g * dgelu(z))
                    .collect();
            } else {
                g_z = g_h;
            }
        }

        // Spectral blocks in reverse.
        let mut g_out_block = g_z; // gradient wrt block_out[depth-1]
        for (bi, b) in self.layout.blocks.iter().enumerate().rev() {
            let pre = &cache.block_pre[bi];
            let g_pre: Vec<f64> = g_out_block
                .iter()
                .zip(pre.iter())
                .map(|(g, &z)| g * dgelu(z))
                .collect();
            let x_in: &[f64] = if bi == 0 {
                &cache.lift_out
            } else {
                &cache.block_out[bi - 1]
            };
            let mut g_x = vec![0.0; n * w];
            {
                let (g_w_pt, g_b_pt) = split_two(grad, b.pt_w.clone(), b.pt_b.clone());
                affine_backward(
                    &p[b.pt_w.clone()],
                    x_in,
                    &g_pre,
                    n,
                    w,
                    w,
                    g_w_pt,
                    g_b_pt,
                    Some(&mut g_x),
                );
            }
            {
                let (g_re, g_im) = split_two(grad, b.r_re.clone(), b.r_im.clone());
                let mut g_x_spec = vec![0.0; n * w];
                spectral_backward(
                    ops,
                    scratch,
                    &p[b.r_re.clone()],
                    &p[b.r_im.clone()],
                    a.k_modes,
                    w,
                    &cache.block_coeffs[bi],
                    &g_pre,
                    g_re,
                    g_im,
                    &mut g_x_spec,
                );
                for (g, s) in g_x.iter_mut().zip(g_x_spec.iter()) {
                    *g += s;
                }
            }
            g_out_block = g_x;
        }

        // Lifting.
        let (g_lw, g_lb) = split_two(grad, self.layout.lift_w.clone(), self.layout.lift_b.clone());
        affine_backward(
            &p[self.layout.lift_w.clone()],
            &cache.input,
            &g_out_block,
            n,
            a.in_channels,
            w,
            g_lw,
            g_lb,
            None,
        );
    }
}

/// Disjoint mutable views of two parameter ranges.
fn split_two(
    buf: &mut [f64],
    a: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a.end <= b.start);
    let (head, tail) = buf.split_at_mut(b.start);
    (&mut head[a], &mut tail[..b.len()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_arch() -> ArchConfig {
        ArchConfig {
            width: 4,
            depth: 2,
            k_modes: 3,
            fc_width: 5,
            fc_depth: 2,
            in_channels: 3,
            out_channels: 2,
            n_t: 17,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = tiny_arch();
        let m1 = init_model(&a, 9).unwrap();
        let m2 = init_model(&a, 9).unwrap();
        assert_eq!(m1.params, m2.params);
        let m3 = init_model(&a, 10).unwrap();
        assert_ne!(m1.params, m3.params);
        assert!(m1.params.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let a = tiny_arch();
        let mut model = init_model(&a, 1).unwrap();
        model.params.iter_mut().for_each(|v| *v = 0.0);
        let ops = SpectralOps::new(a.n_t);
        let mut scratch = ops.scratch();
        let input: Vec<f64> = (0..a.n_t * a.in_channels).map(|i| (i as f64).cos()).collect();
        let cache = model.forward(&ops, &mut scratch, &input).unwrap();
        assert!(cache.output.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let a = tiny_arch();
        let model = init_model(&a, 3).unwrap();
        let ops = SpectralOps::new(a.n_t);
        let mut scratch = ops.scratch();
        let input: Vec<f64> = (0..a.n_t * a.in_channels)
            .map(|i| (0.1 * i as f64).sin())
            .collect();
        let c1 = model.forward(&ops, &mut scratch, &input).unwrap();
        let c2 = model.forward(&ops, &mut scratch, &input).unwrap();
        for (x, y) in c1.output.iter().zip(c2.output.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(c1.output.len(), a.n_t * a.out_channels);
    }

    #[test]
    fn gelu_derivative_matches_finite_difference() {
        for &x in &[-3.0, -1.0, -0.1, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((dgelu(x) - fd).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn network_gradient_matches_finite_difference() {
        // Scalar probe loss: L = sum(output * probe). Checks every
        // parameter of a tiny model against central differences.
        let a = tiny_arch();
        let model = init_model(&a, 42).unwrap();
        let ops = SpectralOps::new(a.n_t);
        let mut scratch = ops.scratch();
        let mut rng = Rng::new(7);
        let input: Vec<f64> = (0..a.n_t * a.in_channels)
            .map(|_| rng.uniform_in(-1.0, 1.0))
            .collect();
        let probe: Vec<f64> = (0..a.n_t * a.out_channels)
            .map(|_| rng.uniform_in(-1.0, 1.0))
            .collect();

        let cache = model.forward(&ops, &mut scratch, &input).unwrap();
        let mut grad = vec![0.0; model.n_params()];
        model.backward(&ops, &mut scratch, &cache, &probe, &mut grad);

        let probe_loss = |m: &OperatorModel, scratch: &mut SpectralScratch| -> f64 {
            let c = m.forward(&ops, scratch, &input).unwrap();
            c.output.iter().zip(probe.iter()).map(|(a, b)| a * b).sum()
        };
        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..model.n_params() {
            let mut m = model.clone();
            m.params[i] += h;
            let up = probe_loss(&m, &mut scratch);
            m.params[i] -= 2.0 * h;
            let dn = probe_loss(&m, &mut scratch);
            let fd = (up - dn) / (2.0 * h);
            let err = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(err);
        }
        assert!(worst < 1e-6, "worst relative gradient error {worst}");
    }
}
