//! Conditional patch discriminator: four 4x4 stride-2 convolutions
//! (channels 6 -> 32 -> 64 -> 128 -> 1) with leaky-rectifier activations and
//! a sigmoid patch head, hand-differentiated.
//!
//! Convolutions run on even/odd column phases of each input row, which turns
//! the stride-2 kernel taps into unit-stride fused multiply-adds.

use crate::diff::{
    adam_step, AdamState, DiffError, GradStore, Graph, GraphOp, GroupKind, NodeId, ParamGroup,
    Value,
};
use crate::scene::{ImageGray, ImageRgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const LOG_CLAMP: f64 = 1e-7;
pub const DISC_BETA1: f64 = 0.5;
const LEAKY_SLOPE: f64 = 0.2;
const KERNEL: usize = 4;
pub const MIN_PATCH_INPUT: usize = 16;

#[derive(Debug, Clone)]
pub struct PatchDiscriminator {
    channels: [usize; 5],
}

impl Default for PatchDiscriminator {
    fn default() -> Self {
        Self::new()
    }
}

struct LayerDims {
    c_in: usize,
    c_out: usize,
    w_off: usize,
    b_off: usize,
}

impl PatchDiscriminator {
    pub fn new() -> Self {
        PatchDiscriminator {
            channels: [6, 32, 64, 128, 1],
        }
    }

    fn layers(&self) -> Vec<LayerDims> {
        let mut off = 0;
        let mut out = Vec::with_capacity(4);
        for l in 0..4 {
            let c_in = self.channels[l];
            let c_out = self.channels[l + 1];
            let w_off = off;
            let b_off = off + c_out * c_in * KERNEL * KERNEL;
            off = b_off + c_out;
            out.push(LayerDims {
                c_in,
                c_out,
                w_off,
                b_off,
            });
        }
        out
    }

    pub fn weight_count(&self) -> usize {
        let last = self.layers().pop().unwrap();
        last.b_off + last.c_out
    }

    /// Uniform [-k, k] with k = 1/sqrt(fan_in); biases zero; the final layer
    /// entirely zero so an untrained discriminator outputs exactly 0.5.
    pub fn init_weights(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = vec![0.0; self.weight_count()];
        let layers = self.layers();
        for (l, dims) in layers.iter().enumerate() {
            if l == layers.len() - 1 {
                break; // final layer stays zero
            }
            let k = 1.0 / ((dims.c_in * KERNEL * KERNEL) as f64).sqrt();
            for wv in weights
                .iter_mut()
                .skip(dims.w_off)
                .take(dims.c_out * dims.c_in * KERNEL * KERNEL)
            {
                *wv = rng.gen_range(-k..=k);
            }
        }
        weights
    }

    /// Forward pass over the 6-channel concatenation of `cond` and `img`.
    /// Keeps post-activation planes for the backward pass.
    pub fn forward(
        &self,
        weights: &[f64],
        cond: &ImageRgb,
        img: &ImageRgb,
    ) -> Result<DiscForward, DiffError> {
        assert_eq!(weights.len(), self.weight_count());
        assert!(cond.same_size(img), "discriminator input sizes differ");
        if cond.width < MIN_PATCH_INPUT || cond.height < MIN_PATCH_INPUT {
            return Err(DiffError::InputTooSmall(cond.width, cond.height));
        }
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(5);
        let mut dims: Vec<(usize, usize, usize)> = Vec::with_capacity(5);
        acts.push(assemble_input(cond, img));
        dims.push((6, cond.height, cond.width));
        for (l, layer) in self.layers().iter().enumerate() {
            let (c, h, w) = dims[l];
            debug_assert_eq!(c, layer.c_in);
            let (mut z, od) = conv_forward(
                &acts[l],
                (c, h, w),
                &weights[layer.w_off..layer.b_off],
                &weights[layer.b_off..layer.b_off + layer.c_out],
                layer.c_out,
            );
            if l < 3 {
                for v in &mut z {
                    if *v < 0.0 {
                        *v *= LEAKY_SLOPE;
                    }
                }
            } else {
                for v in &mut z {
                    *v = sigmoid(*v);
                }
            }
            acts.push(z);
            dims.push(od);
        }
        Ok(DiscForward { acts, dims })
    }

    /// Backward from a gradient on the patch probabilities. Returns weight
    /// gradients and/or the gradient with respect to `img` (HWC layout).
    pub fn backward(
        &self,
        weights: &[f64],
        fwd: &DiscForward,
        g_patch: &[f64],
        want_weights: bool,
        want_img: bool,
    ) -> DiscGrads {
        let layers = self.layers();
        let mut g_weights = if want_weights {
            vec![0.0; weights.len()]
        } else {
            Vec::new()
        };
        // sigmoid head: g_z = g_p * p * (1 - p)
        let patch = &fwd.acts[4];
        let mut g_z: Vec<f64> = g_patch
            .iter()
            .zip(patch)
            .map(|(g, p)| g * p * (1.0 - p))
            .collect();
        for l in (0..4).rev() {
            let layer = &layers[l];
            let want_input = l > 0 || want_img;
            let (g_in, g_w, g_b) = conv_backward(
                &fwd.acts[l],
                fwd.dims[l],
                &weights[layer.w_off..layer.b_off],
                layer.c_out,
                &g_z,
                want_weights,
                want_input,
            );
            if want_weights {
                g_weights[layer.w_off..layer.b_off].copy_from_slice(&g_w);
                g_weights[layer.b_off..layer.b_off + layer.c_out].copy_from_slice(&g_b);
            }
            if !want_input {
                break;
            }
            let mut g_a = g_in;
            if l > 0 {
                // leaky-rectifier: slope 1 on the positive side, 0.2 otherwise
                for (g, a) in g_a.iter_mut().zip(&fwd.acts[l]) {
                    if *a <= 0.0 {
                        *g *= LEAKY_SLOPE;
                    }
                }
            }
            g_z = g_a;
        }
        let img_grad = want_img.then(|| {
            let (_, h, w) = fwd.dims[0];
            let mut out = vec![0.0; h * w * 3];
            for c in 0..3 {
                let plane = &g_z[(3 + c) * h * w..(4 + c) * h * w];
                for (i, v) in plane.iter().enumerate() {
                    out[i * 3 + c] = *v;
                }
            }
            out
        });
        DiscGrads {
            weights: want_weights.then_some(g_weights),
            img: img_grad,
        }
    }

    /// Patch probability map of one forward pass.
    pub fn patch_map(&self, fwd: &DiscForward) -> ImageGray {
        let (_, h, w) = fwd.dims[4];
        ImageGray {
            width: w,
            height: h,
            data: fwd.acts[4].clone(),
        }
    }
}

pub struct DiscForward {
    /// Post-activation planes, acts[0] being the 6-channel input.
    acts: Vec<Vec<f64>>,
    dims: Vec<(usize, usize, usize)>,
}

pub struct DiscGrads {
    pub weights: Option<Vec<f64>>,
    pub img: Option<Vec<f64>>,
}

/// Discriminator weights plus their optimizer, persisted across texture
/// stages.
pub struct DiscriminatorState {
    pub arch: PatchDiscriminator,
    pub weights: ParamGroup,
    pub adam: AdamState,
}

impl DiscriminatorState {
    pub fn new(learning_rate: f64, seed: u64) -> Self {
        let arch = PatchDiscriminator::new();
        let weights = ParamGroup::new(
            GroupKind::DiscriminatorWeights,
            arch.init_weights(seed),
            learning_rate,
        );
        let adam = AdamState::with_betas(weights.len(), DISC_BETA1, 0.999);
        DiscriminatorState {
            arch,
            weights,
            adam,
        }
    }

    pub fn apply_gradient(&mut self, grad: &[f64]) -> Result<(), DiffError> {
        adam_step(&mut self.weights, grad, &mut self.adam)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn assemble_input(cond: &ImageRgb, img: &ImageRgb) -> Vec<f64> {
    let (h, w) = (cond.height, cond.width);
    let mut planes = vec![0.0; 6 * h * w];
    for (c, src) in [cond, img].iter().enumerate() {
        for i in 0..h * w {
            for k in 0..3 {
                planes[(c * 3 + k) * h * w + i] = src.data[i * 3 + k];
            }
        }
    }
    planes
}

fn out_dims(h: usize, w: usize) -> (usize, usize) {
    ((h - 2) / 2 + 1, (w - 2) / 2 + 1)
}

/// Split a row into even/odd column phases.
fn split_phases(row: &[f64], e: &mut [f64], o: &mut [f64]) {
    for (i, v) in row.iter().enumerate() {
        if i % 2 == 0 {
            e[i / 2] = *v;
        } else {
            o[i / 2] = *v;
        }
    }
}

/// 4x4 stride-2 pad-1 convolution. Weight layout [oc][ic][ky][kx].
fn conv_forward(
    input: &[f64],
    (c_in, h, w): (usize, usize, usize),
    wgt: &[f64],
    bias: &[f64],
    c_out: usize,
) -> (Vec<f64>, (usize, usize, usize)) {
    let (oh, ow) = out_dims(h, w);
    let we = w.div_ceil(2);
    let wo = w / 2;
    // phase planes for all input channels
    let mut e_planes = vec![0.0; c_in * h * we];
    let mut o_planes = vec![0.0; c_in * h * wo];
    for ic in 0..c_in {
        for iy in 0..h {
            let row = &input[ic * h * w + iy * w..ic * h * w + iy * w + w];
            split_phases(
                row,
                &mut e_planes[(ic * h + iy) * we..(ic * h + iy) * we + we],
                &mut o_planes[(ic * h + iy) * wo..(ic * h + iy) * wo + wo],
            );
        }
    }
    let mut out = vec![0.0; c_out * oh * ow];
    out.par_chunks_mut(oh * ow).enumerate().for_each(|(oc, opl)| {
        for oy in 0..oh {
            let acc = &mut opl[oy * ow..oy * ow + ow];
            for a in acc.iter_mut() {
                *a = bias[oc];
            }
            for ic in 0..c_in {
                for ky in 0..KERNEL {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let iy = iy as usize;
                    let e = &e_planes[(ic * h + iy) * we..(ic * h + iy) * we + we];
                    let o = &o_planes[(ic * h + iy) * wo..(ic * h + iy) * wo + wo];
                    let wbase = ((oc * c_in + ic) * KERNEL + ky) * KERNEL;
                    let (w0, w1, w2, w3) = (wgt[wbase], wgt[wbase + 1], wgt[wbase + 2], wgt[wbase + 3]);
                    // interior: all four taps in range
                    let hi = ow.min(we.saturating_sub(1)).min(wo);
                    for ox in 1..hi {
                        acc[ox] += w0 * o[ox - 1] + w1 * e[ox] + w2 * o[ox] + w3 * e[ox + 1];
                    }
                    // ox = 0: the kx=0 tap reads column -1 (padding)
                    {
                        let mut a = w1 * e[0];
                        if 0 < wo {
                            a += w2 * o[0];
                        }
                        if 1 < we {
                            a += w3 * e[1];
                        }
                        acc[0] += a;
                    }
                    // tail columns clipped by padding on the right
                    for ox in hi.max(1)..ow {
                        let mut a = w0 * o[ox - 1];
                        if ox < we {
                            a += w1 * e[ox];
                        }
                        if ox < wo {
                            a += w2 * o[ox];
                        }
                        if ox + 1 < we {
                            a += w3 * e[ox + 1];
                        }
                        acc[ox] += a;
                    }
                }
            }
        }
    });
    (out, (c_out, oh, ow))
}

/// Backward of [`conv_forward`]: gradients with respect to the input, the
/// weights, and the biases, from the gradient on the pre-activation output.
fn conv_backward(
    input: &[f64],
    (c_in, h, w): (usize, usize, usize),
    wgt: &[f64],
    c_out: usize,
    g_out: &[f64],
    want_weights: bool,
    want_input: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (oh, ow) = out_dims(h, w);
    let we = w.div_ceil(2);
    let wo = w / 2;
    let mut e_planes = vec![0.0; c_in * h * we];
    let mut o_planes = vec![0.0; c_in * h * wo];
    for ic in 0..c_in {
        for iy in 0..h {
            let row = &input[ic * h * w + iy * w..ic * h * w + iy * w + w];
            split_phases(
                row,
                &mut e_planes[(ic * h + iy) * we..(ic * h + iy) * we + we],
                &mut o_planes[(ic * h + iy) * wo..(ic * h + iy) * wo + wo],
            );
        }
    }

    let mut g_bias = vec![0.0; c_out];
    for oc in 0..c_out {
        g_bias[oc] = g_out[oc * oh * ow..(oc + 1) * oh * ow].iter().sum();
    }

    // weight gradients: per (oc, ic, ky, kx) a dot of g_out rows with phase rows
    let mut g_wgt = vec![0.0; wgt.len()];
    if want_weights {
        g_wgt
            .par_chunks_mut(c_in * KERNEL * KERNEL)
            .enumerate()
            .for_each(|(oc, gw)| {
                for oy in 0..oh {
                    let gz = &g_out[oc * oh * ow + oy * ow..oc * oh * ow + oy * ow + ow];
                    for ic in 0..c_in {
                        for ky in 0..KERNEL {
                            let iy = (2 * oy + ky) as isize - 1;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let iy = iy as usize;
                            let e = &e_planes[(ic * h + iy) * we..(ic * h + iy) * we + we];
                            let o = &o_planes[(ic * h + iy) * wo..(ic * h + iy) * wo + wo];
                            let base = (ic * KERNEL + ky) * KERNEL;
                            let mut s0 = 0.0;
                            let mut s1 = 0.0;
                            let mut s2 = 0.0;
                            let mut s3 = 0.0;
                            let hi = ow.min(we.saturating_sub(1)).min(wo);
                            for ox in 1..hi {
                                let g = gz[ox];
                                s0 += g * o[ox - 1];
                                s1 += g * e[ox];
                                s2 += g * o[ox];
                                s3 += g * e[ox + 1];
                            }
                            {
                                let g = gz[0];
                                s1 += g * e[0];
                                if 0 < wo {
                                    s2 += g * o[0];
                                }
                                if 1 < we {
                                    s3 += g * e[1];
                                }
                            }
                            for ox in hi.max(1)..ow {
                                let g = gz[ox];
                                s0 += g * o[ox - 1];
                                if ox < we {
                                    s1 += g * e[ox];
                                }
                                if ox < wo {
                                    s2 += g * o[ox];
                                }
                                if ox + 1 < we {
                                    s3 += g * e[ox + 1];
                                }
                            }
                            gw[base] += s0;
                            gw[base + 1] += s1;
                            gw[base + 2] += s2;
                            gw[base + 3] += s3;
                        }
                    }
                }
            });
    }

    // input gradients: scatter through the same phase structure
    let mut g_in = vec![0.0; if want_input { c_in * h * w } else { 0 }];
    if want_input {
        g_in.par_chunks_mut(h * w).enumerate().for_each(|(ic, gpl)| {
            let mut g_e = vec![0.0; h * we];
            let mut g_o = vec![0.0; h * wo];
            for oc in 0..c_out {
                for oy in 0..oh {
                    let gz = &g_out[oc * oh * ow + oy * ow..oc * oh * ow + oy * ow + ow];
                    for ky in 0..KERNEL {
                        let iy = (2 * oy + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let iy = iy as usize;
                        let ge = &mut g_e[iy * we..iy * we + we];
                        let go = &mut g_o[iy * wo..iy * wo + wo];
                        let wbase = ((oc * c_in + ic) * KERNEL + ky) * KERNEL;
                        let (w0, w1, w2, w3) =
                            (wgt[wbase], wgt[wbase + 1], wgt[wbase + 2], wgt[wbase + 3]);
                        let hi = ow.min(we.saturating_sub(1)).min(wo);
                        for ox in 1..hi {
                            let g = gz[ox];
                            go[ox - 1] += w0 * g;
                            ge[ox] += w1 * g;
                            go[ox] += w2 * g;
                            ge[ox + 1] += w3 * g;
                        }
                        {
                            let g = gz[0];
                            ge[0] += w1 * g;
                            if 0 < wo {
                                go[0] += w2 * g;
                            }
                            if 1 < we {
                                ge[1] += w3 * g;
                            }
                        }
                        for ox in hi.max(1)..ow {
                            let g = gz[ox];
                            go[ox - 1] += w0 * g;
                            if ox < we {
                                ge[ox] += w1 * g;
                            }
                            if ox < wo {
                                go[ox] += w2 * g;
                            }
                            if ox + 1 < we {
                                ge[ox + 1] += w3 * g;
                            }
                        }
                    }
                }
            }
            // interleave the phases back into pixel order
            for iy in 0..h {
                let row = &mut gpl[iy * w..iy * w + w];
                for x in 0..we {
                    row[2 * x] = g_e[iy * we + x];
                }
                for x in 0..wo {
                    row[2 * x + 1] = g_o[iy * wo + x];
                }
            }
        });
    }
    (g_in, g_wgt, g_bias)
}

/// `-mean(log D_real) - mean(log(1 - D_fake))` and the non-saturating
/// generator loss `-mean(log D_fake)`, with logs clamped at 1e-7.
pub fn adversarial_losses(
    disc: &PatchDiscriminator,
    weights: &[f64],
    cond: &ImageRgb,
    real: &ImageRgb,
    fake: &ImageRgb,
) -> Result<(f64, f64), DiffError> {
    let fwd_real = disc.forward(weights, cond, real)?;
    let fwd_fake = disc.forward(weights, cond, fake)?;
    let real_map = &fwd_real.acts[4];
    let fake_map = &fwd_fake.acts[4];
    let n = real_map.len() as f64;
    let mut d_loss = 0.0;
    let mut g_loss = 0.0;
    for p in real_map {
        d_loss -= p.max(LOG_CLAMP).ln();
    }
    for p in fake_map {
        d_loss -= (1.0 - p).max(LOG_CLAMP).ln();
        g_loss -= p.max(LOG_CLAMP).ln();
    }
    Ok((d_loss / n, g_loss / n))
}

// ---------------------------------------------------------------------------
// Graph ops
// ---------------------------------------------------------------------------

/// Image argument of a recorded discriminator pass.
pub enum ImgInput<'a> {
    /// A differentiable node (gradients flow into the image).
    Node(NodeId),
    /// A detached constant.
    Image(&'a ImageRgb),
}

struct PatchMapOp {
    disc: PatchDiscriminator,
    weights: Vec<f64>,
    fwd: DiscForward,
    img_node: Option<NodeId>,
    live_weights: bool,
    output: NodeId,
}

impl GraphOp for PatchMapOp {
    fn backward(&self, _values: &[Value], store: &mut GradStore) {
        let Some(g_patch) = store.buffer_grad(self.output).map(|g| g.to_vec()) else {
            return;
        };
        if g_patch.iter().all(|g| *g == 0.0) {
            return;
        }
        let grads = self.disc.backward(
            &self.weights,
            &self.fwd,
            &g_patch,
            self.live_weights,
            self.img_node.is_some(),
        );
        if let Some(gw) = grads.weights {
            let buf = store.group_grad_mut(GroupKind::DiscriminatorWeights, gw.len());
            for (a, b) in buf.iter_mut().zip(&gw) {
                *a += b;
            }
        }
        if let (Some(node), Some(gi)) = (self.img_node, grads.img) {
            let buf = store.buffer_grad_mut(node);
            for (a, b) in buf.iter_mut().zip(&gi) {
                *a += b;
            }
        }
    }
}

/// Record one discriminator pass D(cond, img); output node is the patch map.
pub fn record_patch_map(
    graph: &mut Graph,
    disc: &PatchDiscriminator,
    weights: &ParamGroup,
    live_weights: bool,
    cond: &ImageRgb,
    img: ImgInput,
) -> Result<NodeId, DiffError> {
    if live_weights {
        graph.register_group(weights);
    }
    let (img_node, fwd) = match img {
        ImgInput::Node(node) => {
            let image = graph.value(node).as_rgb().clone();
            (Some(node), disc.forward(&weights.values, cond, &image)?)
        }
        ImgInput::Image(image) => (None, disc.forward(&weights.values, cond, image)?),
    };
    let map = disc.patch_map(&fwd);
    let op = PatchMapOp {
        disc: disc.clone(),
        weights: weights.values.clone(),
        fwd,
        img_node,
        live_weights,
        output: NodeId(graph.next_node_index()),
    };
    Ok(graph.push_op(Box::new(op), vec![Value::Gray(map)])[0])
}

struct NegMeanLogOp {
    map: NodeId,
    one_minus: bool,
    output: NodeId,
}

impl GraphOp for NegMeanLogOp {
    fn backward(&self, values: &[Value], store: &mut GradStore) {
        let up = store.scalar_grad(self.output);
        if up == 0.0 {
            return;
        }
        let map = values[self.map.0].as_gray().data.clone();
        let n = map.len() as f64;
        let g = store.buffer_grad_mut(self.map);
        for (i, p) in map.iter().enumerate() {
            let x = if self.one_minus { 1.0 - p } else { *p };
            if x > LOG_CLAMP {
                let d = -1.0 / (x * n);
                g[i] += up * if self.one_minus { -d } else { d };
            }
        }
    }
}

/// -mean(log(max(x, 1e-7))) over a patch map node.
pub fn record_neg_mean_log(graph: &mut Graph, map: NodeId) -> NodeId {
    let data = graph.value(map).as_gray().data.clone();
    let n = data.len() as f64;
    let value = -data.iter().map(|p| p.max(LOG_CLAMP).ln()).sum::<f64>() / n;
    let op = NegMeanLogOp {
        map,
        one_minus: false,
        output: NodeId(graph.next_node_index()),
    };
    graph.push_op(Box::new(op), vec![Value::Scalar(value)])[0]
}

/// -mean(log(max(1 - x, 1e-7))) over a patch map node.
pub fn record_neg_mean_log1m(graph: &mut Graph, map: NodeId) -> NodeId {
    let data = graph.value(map).as_gray().data.clone();
    let n = data.len() as f64;
    let value = -data
        .iter()
        .map(|p| (1.0 - p).max(LOG_CLAMP).ln())
        .sum::<f64>()
        / n;
    let op = NegMeanLogOp {
        map,
        one_minus: true,
        output: NodeId(graph.next_node_index()),
    };
    graph.push_op(Box::new(op), vec![Value::Scalar(value)])[0]
}

pub struct AdversarialNodes {
    pub d_loss: NodeId,
    pub g_loss: NodeId,
}

/// Record both adversarial heads in one graph. The discriminator loss sees
/// the rendered image detached; the generator loss keeps gradients flowing
/// into it (and not into the weights).
pub fn record_adversarial_pair(
    graph: &mut Graph,
    disc: &PatchDiscriminator,
    weights: &ParamGroup,
    cond: &ImageRgb,
    real: &ImageRgb,
    fake: NodeId,
) -> Result<AdversarialNodes, DiffError> {
    let fake_image = graph.value(fake).as_rgb().clone();
    let real_map = record_patch_map(graph, disc, weights, true, cond, ImgInput::Image(real))?;
    let fake_map_detached =
        record_patch_map(graph, disc, weights, true, cond, ImgInput::Image(&fake_image))?;
    let l_real = record_neg_mean_log(graph, real_map);
    let l_fake = record_neg_mean_log1m(graph, fake_map_detached);
    let d_loss = graph.add(l_real, l_fake);

    let fake_map_live = record_patch_map(graph, disc, weights, false, cond, ImgInput::Node(fake))?;
    let g_loss = record_neg_mean_log(graph, fake_map_live);
    Ok(AdversarialNodes { d_loss, g_loss })
}
