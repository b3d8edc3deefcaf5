//! Learnable noise-prediction network ε_θ(x_t, t): a small convolutional
//! encoder–decoder with lateral skip connections, group normalization,
//! SiLU activations and a sinusoidal time embedding added per block
//! through a learned projection. Each block also carries a 1×1 residual
//! shortcut — normalization erases input amplitude, and without that
//! path the network could not scale its prediction with the noise level.
//! The final convolution is zero-initialized so a fresh model predicts
//! zero noise.
//!
//! Gradients are written by hand (see `nn`) and validated against
//! central finite differences; there is no autodiff framework behind
//! this module.

mod nn;

use crate::diffusion::{forward_noise, mse, NoisePredictor, NoiseSchedule};
use crate::error::{Error, Result};
use crate::rng::Rng;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

const GN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoiserConfig {
    pub in_channels: usize,
    pub base_width: usize,
    /// Number of 2× down/upsampling levels; input sides must be
    /// divisible by 2^depth.
    pub depth: usize,
    pub time_embed_dim: usize,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig {
            in_channels: 3,
            base_width: 32,
            depth: 3,
            time_embed_dim: 128,
        }
    }
}

impl DenoiserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_width == 0 {
            return Err(Error::InvalidArgument("channel widths must be at least 1"));
        }
        if self.depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1"));
        }
        if self.time_embed_dim < 2 || !self.time_embed_dim.is_multiple_of(2) {
            return Err(Error::OddEmbeddingDim {
                dim: self.time_embed_dim,
            });
        }
        Ok(())
    }

    /// Channel width at each level, index 0 = full resolution,
    /// index `depth` = bottleneck.
    fn widths(&self) -> Vec<usize> {
        (0..=self.depth).map(|i| self.base_width << i).collect()
    }
}

/// Sinusoidal embedding: sin(t·ω_k) for k < dim/2 followed by cos(t·ω_k),
/// with geometrically spaced frequencies ω_k = 10000^(−k/(dim/2)).
pub fn time_embedding(t: usize, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::OddEmbeddingDim { dim });
    }
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    let log_base = libm::log(10000.0);
    for k in 0..half {
        let freq = libm::exp(-log_base * k as f64 / half as f64);
        let arg = t as f64 * freq;
        out[k] = libm::sin(arg);
        out[half + k] = libm::cos(arg);
    }
    Ok(out)
}

fn groups_for(channels: usize) -> usize {
    for g in [8usize, 4, 2] {
        if channels.is_multiple_of(g) {
            return g;
        }
    }
    1
}

/// One named tensor inside the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamTensor {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
enum InitKind {
    ConvWeight,
    LinearWeight,
    Zeros,
    Ones,
}

/// Layout indices of one encoder/decoder block's tensors.
#[derive(Debug, Clone, Copy)]
struct BlockIdx {
    conv_a_w: usize,
    conv_a_b: usize,
    tproj_w: usize,
    tproj_b: usize,
    gn1_g: usize,
    gn1_b: usize,
    conv_b_w: usize,
    conv_b_b: usize,
    gn2_g: usize,
    gn2_b: usize,
    shortcut_w: usize,
    c_in: usize,
    c_out: usize,
}

struct LayoutBuilder {
    layout: Vec<ParamTensor>,
    kinds: Vec<InitKind>,
    offset: usize,
}

impl LayoutBuilder {
    fn new() -> Self {
        LayoutBuilder {
            layout: Vec::new(),
            kinds: Vec::new(),
            offset: 0,
        }
    }

    fn push(&mut self, name: String, shape: Vec<usize>, kind: InitKind) -> usize {
        let len: usize = shape.iter().product();
        self.layout.push(ParamTensor {
            name,
            offset: self.offset,
            len,
            shape,
        });
        self.kinds.push(kind);
        self.offset += len;
        self.layout.len() - 1
    }

    fn push_block(&mut self, prefix: &str, c_in: usize, c_out: usize, temb: usize) -> BlockIdx {
        BlockIdx {
            conv_a_w: self.push(
                format!("{prefix}.conv_a.weight"),
                vec![c_out, c_in, 3, 3],
                InitKind::ConvWeight,
            ),
            conv_a_b: self.push(format!("{prefix}.conv_a.bias"), vec![c_out], InitKind::Zeros),
            tproj_w: self.push(
                format!("{prefix}.time_proj.weight"),
                vec![c_out, temb],
                InitKind::LinearWeight,
            ),
            tproj_b: self.push(
                format!("{prefix}.time_proj.bias"),
                vec![c_out],
                InitKind::Zeros,
            ),
            gn1_g: self.push(format!("{prefix}.norm1.gamma"), vec![c_out], InitKind::Ones),
            gn1_b: self.push(format!("{prefix}.norm1.beta"), vec![c_out], InitKind::Zeros),
            conv_b_w: self.push(
                format!("{prefix}.conv_b.weight"),
                vec![c_out, c_out, 3, 3],
                InitKind::ConvWeight,
            ),
            conv_b_b: self.push(format!("{prefix}.conv_b.bias"), vec![c_out], InitKind::Zeros),
            gn2_g: self.push(format!("{prefix}.norm2.gamma"), vec![c_out], InitKind::Ones),
            gn2_b: self.push(format!("{prefix}.norm2.beta"), vec![c_out], InitKind::Zeros),
            // residual path: normalization erases input amplitude, so the
            // shortcut is what lets predictions scale with the input
            shortcut_w: self.push(
                format!("{prefix}.shortcut.weight"),
                vec![c_out, c_in, 1, 1],
                InitKind::ConvWeight,
            ),
            c_in,
            c_out,
        }
    }
}

/// The network. Parameters live in one flat buffer described by a named
/// layout, which keeps the optimizer, checkpoints and finite-difference
/// probing trivial.
#[derive(Debug, Clone)]
pub struct Denoiser {
    config: DenoiserConfig,
    widths: Vec<usize>,
    params: Vec<f64>,
    layout: Vec<ParamTensor>,
    tm_w: usize,
    tm_b: usize,
    enc: Vec<BlockIdx>,
    mid: BlockIdx,
    dec: Vec<BlockIdx>,
    out_w: usize,
    out_b: usize,
}

/// Per-block forward caches kept for the backward pass.
struct BlockCache {
    x_in: Vec<f64>,
    xhat1: Vec<f64>,
    inv1: Vec<f64>,
    h3: Vec<f64>,
    sig1: Vec<f64>,
    h4: Vec<f64>,
    xhat2: Vec<f64>,
    inv2: Vec<f64>,
    h6: Vec<f64>,
    sig2: Vec<f64>,
    h: usize,
    w: usize,
}

struct Tape {
    temb0: Vec<f64>,
    a1: Vec<f64>,
    temb: Vec<f64>,
    enc: Vec<BlockCache>,
    mid: Option<BlockCache>,
    /// Execution order: level depth−1 first, level 0 last.
    dec: Vec<BlockCache>,
    final_in: Vec<f64>,
}

impl Tape {
    fn new() -> Self {
        Tape {
            temb0: Vec::new(),
            a1: Vec::new(),
            temb: Vec::new(),
            enc: Vec::new(),
            mid: None,
            dec: Vec::new(),
            final_in: Vec::new(),
        }
    }
}

impl Denoiser {
    pub fn new(config: DenoiserConfig, seed: u64) -> Result<Self> {
        let (mut model, kinds) = Self::build(config)?;
        let mut rng = Rng::stream(seed, 0x6d6f64); // model-init stream
        for (tensor, kind) in model.layout.iter().zip(&kinds) {
            let slice = &mut model.params[tensor.offset..tensor.offset + tensor.len];
            match kind {
                InitKind::ConvWeight => {
                    let fan_in: usize = tensor.shape[1..].iter().product();
                    let bound = libm::sqrt(1.0 / fan_in as f64);
                    for v in slice {
                        *v = (2.0 * rng.next_f64() - 1.0) * bound;
                    }
                }
                InitKind::LinearWeight => {
                    let fan_in = tensor.shape[1];
                    let bound = libm::sqrt(1.0 / fan_in as f64);
                    for v in slice {
                        *v = (2.0 * rng.next_f64() - 1.0) * bound;
                    }
                }
                // the output head is zero-initialized: a fresh model
                // predicts zero noise, which doubles as a test hook
                InitKind::Zeros => slice.fill(0.0),
                InitKind::Ones => slice.fill(1.0),
            }
        }
        Ok(model)
    }

    /// Rebuild a model around an existing parameter vector (checkpoint
    /// loading).
    pub fn from_parts(config: DenoiserConfig, params: Vec<f64>) -> Result<Self> {
        let (mut model, _) = Self::build(config)?;
        if params.len() != model.params.len() {
            return Err(Error::ParamCountMismatch {
                expected: model.params.len(),
                got: params.len(),
            });
        }
        model.params = params;
        Ok(model)
    }

    fn build(config: DenoiserConfig) -> Result<(Self, Vec<InitKind>)> {
        config.validate()?;
        let widths = config.widths();
        let d = config.time_embed_dim;
        let mut b = LayoutBuilder::new();
        let tm_w = b.push("time_mlp.weight".into(), vec![d, d], InitKind::LinearWeight);
        let tm_b = b.push("time_mlp.bias".into(), vec![d], InitKind::Zeros);
        let mut enc = Vec::with_capacity(config.depth);
        for i in 0..config.depth {
            let c_in = if i == 0 {
                config.in_channels
            } else {
                widths[i - 1]
            };
            enc.push(b.push_block(&format!("enc{i}"), c_in, widths[i], d));
        }
        let mid = b.push_block("mid", widths[config.depth - 1], widths[config.depth], d);
        let mut dec = vec![None; config.depth];
        for i in (0..config.depth).rev() {
            let c_in = widths[i + 1] + widths[i];
            dec[i] = Some(b.push_block(&format!("dec{i}"), c_in, widths[i], d));
        }
        let dec: Vec<BlockIdx> = dec.into_iter().map(|x| x.unwrap()).collect();
        let out_w = b.push(
            "out.weight".into(),
            vec![config.in_channels, widths[0], 3, 3],
            InitKind::Zeros,
        );
        let out_b = b.push("out.bias".into(), vec![config.in_channels], InitKind::Zeros);
        let total = b.offset;
        let model = Denoiser {
            config,
            widths,
            params: vec![0.0; total],
            layout: b.layout,
            tm_w,
            tm_b,
            enc,
            mid,
            dec,
            out_w,
            out_b,
        };
        Ok((model, b.kinds))
    }

    /// Name of the tensor a flat parameter index belongs to.
    pub fn tensor_name_at(&self, param_index: usize) -> &str {
        let pos = self
            .layout
            .partition_point(|t| t.offset + t.len <= param_index);
        &self.layout[pos.min(self.layout.len() - 1)].name
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn layout(&self) -> &[ParamTensor] {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    #[inline]
    fn p(&self, idx: usize) -> &[f64] {
        let t = &self.layout[idx];
        &self.params[t.offset..t.offset + t.len]
    }

    /// Two disjoint gradient slices; `a` must precede `b` in the layout.
    fn grad_pair<'a>(
        &self,
        grads: &'a mut [f64],
        a: usize,
        b: usize,
    ) -> (&'a mut [f64], &'a mut [f64]) {
        let ta = &self.layout[a];
        let tb = &self.layout[b];
        debug_assert!(ta.offset + ta.len <= tb.offset);
        let (left, right) = grads.split_at_mut(tb.offset);
        (
            &mut left[ta.offset..ta.offset + ta.len],
            &mut right[..tb.len],
        )
    }

    fn check_input(&self, x: &[f64], h: usize, w: usize, t: usize) -> Result<()> {
        if t == 0 {
            return Err(Error::TimestepOutOfRange {
                t,
                timesteps: usize::MAX,
            });
        }
        if x.len() != self.config.in_channels * h * w {
            return Err(Error::LengthMismatch {
                expected: self.config.in_channels * h * w,
                got: x.len(),
            });
        }
        let div = 1usize << self.config.depth;
        if !h.is_multiple_of(div) || !w.is_multiple_of(div) || h == 0 || w == 0 {
            return Err(Error::InvalidArgument(
                "spatial size must be divisible by 2^depth",
            ));
        }
        Ok(())
    }

    /// Predicted noise, same shape as the input. Deterministic in the
    /// parameters and inputs.
    pub fn predict(&self, x: &[f64], h: usize, w: usize, t: usize) -> Result<Vec<f64>> {
        self.check_input(x, h, w, t)?;
        Ok(self.forward(x, h, w, t, None))
    }

    /// Takes ownership of the input so the tape can keep it without a
    /// copy.
    fn block_forward(
        &self,
        idx: &BlockIdx,
        x: Vec<f64>,
        h: usize,
        w: usize,
        temb: &[f64],
        want_cache: bool,
    ) -> (Vec<f64>, Option<BlockCache>) {
        let (c_in, c_out) = (idx.c_in, idx.c_out);
        let hw = h * w;
        let d = self.config.time_embed_dim;
        let mut h1 = nn::conv3x3_forward(
            &x,
            c_in,
            h,
            w,
            self.p(idx.conv_a_w),
            self.p(idx.conv_a_b),
            c_out,
        );
        let proj = nn::linear_forward(temb, self.p(idx.tproj_w), self.p(idx.tproj_b), d, c_out);
        for c in 0..c_out {
            let add = proj[c];
            for v in &mut h1[c * hw..(c + 1) * hw] {
                *v += add;
            }
        }
        let groups = groups_for(c_out);
        let (h3, xhat1, inv1) = nn::group_norm_forward(
            &h1,
            c_out,
            hw,
            groups,
            self.p(idx.gn1_g),
            self.p(idx.gn1_b),
            GN_EPS,
        );
        if !want_cache {
            let h4 = nn::silu_forward(&h3);
            let h5 = nn::conv3x3_forward(
                &h4,
                c_out,
                h,
                w,
                self.p(idx.conv_b_w),
                self.p(idx.conv_b_b),
                c_out,
            );
            let (h6, _, _) = nn::group_norm_forward(
                &h5,
                c_out,
                hw,
                groups,
                self.p(idx.gn2_g),
                self.p(idx.gn2_b),
                GN_EPS,
            );
            let mut out = nn::silu_forward(&h6);
            let res = nn::conv1x1_forward(&x, c_in, hw, self.p(idx.shortcut_w), c_out);
            for (o, r) in out.iter_mut().zip(&res) {
                *o += r;
            }
            return (out, None);
        }
        let (h4, sig1) = nn::silu_forward_cached(&h3);
        let h5 = nn::conv3x3_forward(
            &h4,
            c_out,
            h,
            w,
            self.p(idx.conv_b_w),
            self.p(idx.conv_b_b),
            c_out,
        );
        let (h6, xhat2, inv2) = nn::group_norm_forward(
            &h5,
            c_out,
            hw,
            groups,
            self.p(idx.gn2_g),
            self.p(idx.gn2_b),
            GN_EPS,
        );
        let (mut out, sig2) = nn::silu_forward_cached(&h6);
        let res = nn::conv1x1_forward(&x, c_in, hw, self.p(idx.shortcut_w), c_out);
        for (o, r) in out.iter_mut().zip(&res) {
            *o += r;
        }
        let cache = BlockCache {
            x_in: x,
            xhat1,
            inv1,
            h3,
            sig1,
            h4,
            xhat2,
            inv2,
            h6,
            sig2,
            h,
            w,
        };
        (out, Some(cache))
    }

    fn block_backward(
        &self,
        idx: &BlockIdx,
        cache: &BlockCache,
        gout: &[f64],
        grads: &mut [f64],
        gtemb: &mut [f64],
        temb: &[f64],
    ) -> Vec<f64> {
        let (c_in, c_out) = (idx.c_in, idx.c_out);
        let (h, w) = (cache.h, cache.w);
        let hw = h * w;
        let d = self.config.time_embed_dim;
        let groups = groups_for(c_out);

        let g_h6 = nn::silu_backward_cached(&cache.h6, &cache.sig2, gout);
        let g_h5 = {
            let (gg, gb) = self.grad_pair(grads, idx.gn2_g, idx.gn2_b);
            nn::group_norm_backward(
                &g_h6,
                &cache.xhat2,
                &cache.inv2,
                self.p(idx.gn2_g),
                c_out,
                hw,
                groups,
                gg,
                gb,
            )
        };
        let g_h4 = nn::conv3x3_backward_input(&g_h5, c_out, h, w, self.p(idx.conv_b_w), c_out);
        {
            let (gw, gb) = self.grad_pair(grads, idx.conv_b_w, idx.conv_b_b);
            nn::conv3x3_backward_params(&g_h5, &cache.h4, c_out, c_out, h, w, gw, gb);
        }
        let g_h3 = nn::silu_backward_cached(&cache.h3, &cache.sig1, &g_h4);
        let g_h2 = {
            let (gg, gb) = self.grad_pair(grads, idx.gn1_g, idx.gn1_b);
            nn::group_norm_backward(
                &g_h3,
                &cache.xhat1,
                &cache.inv1,
                self.p(idx.gn1_g),
                c_out,
                hw,
                groups,
                gg,
                gb,
            )
        };
        // per-channel bias from the time projection
        let mut gproj = vec![0.0; c_out];
        for c in 0..c_out {
            gproj[c] = g_h2[c * hw..(c + 1) * hw].iter().sum();
        }
        let gx_temb = {
            let (gw, gb) = self.grad_pair(grads, idx.tproj_w, idx.tproj_b);
            nn::linear_backward(&gproj, temb, self.p(idx.tproj_w), d, c_out, gw, gb)
        };
        for (gt, g) in gtemb.iter_mut().zip(&gx_temb) {
            *gt += g;
        }
        let mut g_x = nn::conv3x3_backward_input(&g_h2, c_out, h, w, self.p(idx.conv_a_w), c_in);
        {
            let (gw, gb) = self.grad_pair(grads, idx.conv_a_w, idx.conv_a_b);
            nn::conv3x3_backward_params(&g_h2, &cache.x_in, c_in, c_out, h, w, gw, gb);
        }
        // residual path: gout flows straight into the shortcut as well
        nn::conv1x1_backward_input(gout, c_out, hw, self.p(idx.shortcut_w), c_in, &mut g_x);
        {
            let gw = {
                let t = &self.layout[idx.shortcut_w];
                &mut grads[t.offset..t.offset + t.len]
            };
            nn::conv1x1_backward_params(gout, &cache.x_in, c_in, c_out, hw, gw);
        }
        g_x
    }

    fn forward(&self, x: &[f64], h: usize, w: usize, t: usize, mut tape: Option<&mut Tape>) -> Vec<f64> {
        let d = self.config.time_embed_dim;
        let depth = self.config.depth;
        let temb0 = time_embedding(t, d).expect("validated dim");
        let a1 = nn::linear_forward(&temb0, self.p(self.tm_w), self.p(self.tm_b), d, d);
        let temb = nn::silu_forward(&a1);
        if let Some(tp) = tape.as_deref_mut() {
            tp.temb0 = temb0;
            tp.a1 = a1;
            tp.temb = temb.clone();
        }

        let want_cache = tape.is_some();
        let mut cur = x.to_vec();
        let (mut rh, mut rw) = (h, w);
        let mut skips: Vec<Vec<f64>> = Vec::with_capacity(depth);
        for i in 0..depth {
            let (out, cache) = self.block_forward(&self.enc[i], cur, rh, rw, &temb, want_cache);
            if let Some(tp) = tape.as_deref_mut() {
                tp.enc.push(cache.unwrap());
            }
            cur = nn::avgpool2_forward(&out, self.widths[i], rh, rw);
            skips.push(out);
            rh /= 2;
            rw /= 2;
        }

        let (mid_out, cache) = self.block_forward(&self.mid, cur, rh, rw, &temb, want_cache);
        if let Some(tp) = tape.as_deref_mut() {
            tp.mid = cache;
        }
        cur = mid_out;
        let mut c_cur = self.widths[depth];

        for i in (0..depth).rev() {
            let up = nn::upsample2_forward(&cur, c_cur, rh, rw);
            rh *= 2;
            rw *= 2;
            let mut xin = up;
            xin.extend_from_slice(&skips[i]);
            let (out, cache) = self.block_forward(&self.dec[i], xin, rh, rw, &temb, want_cache);
            if let Some(tp) = tape.as_deref_mut() {
                tp.dec.push(cache.unwrap());
            }
            cur = out;
            c_cur = self.widths[i];
        }

        if let Some(tp) = tape {
            tp.final_in = cur.clone();
        }
        nn::conv3x3_forward(
            &cur,
            c_cur,
            h,
            w,
            self.p(self.out_w),
            self.p(self.out_b),
            self.config.in_channels,
        )
    }

    fn backward(&self, h: usize, w: usize, tape: &Tape, g_final: &[f64], grads: &mut [f64]) {
        let depth = self.config.depth;
        let d = self.config.time_embed_dim;
        let c0 = self.widths[0];

        {
            let (gw, gb) = self.grad_pair(grads, self.out_w, self.out_b);
            nn::conv3x3_backward_params(
                g_final,
                &tape.final_in,
                c0,
                self.config.in_channels,
                h,
                w,
                gw,
                gb,
            );
        }
        let mut g = nn::conv3x3_backward_input(
            g_final,
            self.config.in_channels,
            h,
            w,
            self.p(self.out_w),
            c0,
        );

        let mut gtemb = vec![0.0; d];
        let mut skip_grads: Vec<Vec<f64>> = (0..depth).map(|_| Vec::new()).collect();

        // decoder blocks in reverse execution order: level 0 first
        for pos in (0..depth).rev() {
            let level = depth - 1 - pos;
            let cache = &tape.dec[pos];
            let gxin =
                self.block_backward(&self.dec[level], cache, &g, grads, &mut gtemb, &tape.temb);
            let hw_l = cache.h * cache.w;
            let c_up = self.widths[level + 1];
            let (g_up, g_skip) = gxin.split_at(c_up * hw_l);
            skip_grads[level] = g_skip.to_vec();
            g = nn::upsample2_backward(g_up, c_up, cache.h / 2, cache.w / 2);
        }

        // bottleneck
        let mid_cache = tape.mid.as_ref().expect("tape filled");
        let g_mid_in =
            self.block_backward(&self.mid, mid_cache, &g, grads, &mut gtemb, &tape.temb);
        g = nn::avgpool2_backward(
            &g_mid_in,
            self.widths[depth - 1],
            mid_cache.h * 2,
            mid_cache.w * 2,
        );

        // encoder blocks, pooling path plus skip path
        for i in (0..depth).rev() {
            for (gv, sv) in g.iter_mut().zip(&skip_grads[i]) {
                *gv += sv;
            }
            let cache = &tape.enc[i];
            let gxin = self.block_backward(&self.enc[i], cache, &g, grads, &mut gtemb, &tape.temb);
            if i > 0 {
                // the pooling feeding block i takes enc_out[i−1] at twice
                // this block's resolution
                g = nn::avgpool2_backward(&gxin, self.widths[i - 1], cache.h * 2, cache.w * 2);
            }
        }

        // time MLP
        let g_a1 = nn::silu_backward(&tape.a1, &gtemb);
        let (gw, gb) = self.grad_pair(grads, self.tm_w, self.tm_b);
        nn::linear_backward(&g_a1, &tape.temb0, self.p(self.tm_w), d, d, gw, gb);
    }

    /// MSE loss between the prediction at a prepared noisy input and the
    /// target noise, plus the gradient w.r.t. every parameter.
    pub fn loss_and_grad_noised(
        &self,
        x_t: &[f64],
        h: usize,
        w: usize,
        t: usize,
        eps_target: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_input(x_t, h, w, t)?;
        if eps_target.len() != x_t.len() {
            return Err(Error::LengthMismatch {
                expected: x_t.len(),
                got: eps_target.len(),
            });
        }
        let mut tape = Tape::new();
        let pred = self.forward(x_t, h, w, t, Some(&mut tape));
        let loss = mse(&pred, eps_target);
        let n = pred.len() as f64;
        let g_out: Vec<f64> = pred
            .iter()
            .zip(eps_target)
            .map(|(&p, &e)| 2.0 * (p - e) / n)
            .collect();
        let mut grads = vec![0.0; self.params.len()];
        self.backward(h, w, &tape, &g_out, &mut grads);
        Ok((loss, grads))
    }

    /// Gradient of the training loss at fixed (t, ε): noise x0 with the
    /// schedule, predict, and differentiate the MSE against ε.
    pub fn param_grads(
        &self,
        x0: &[f64],
        h: usize,
        w: usize,
        t: usize,
        eps: &[f64],
        sched: &NoiseSchedule,
    ) -> Result<(f64, Vec<f64>)> {
        let x_t = forward_noise(x0, t, eps, sched)?;
        self.loss_and_grad_noised(&x_t, h, w, t, eps)
    }
}

impl NoisePredictor for Denoiser {
    fn predict_noise(
        &self,
        x: &[f64],
        channels: usize,
        height: usize,
        width: usize,
        t: usize,
    ) -> Result<Vec<f64>> {
        if channels != self.config.in_channels {
            return Err(Error::InvalidArgument(
                "channel count does not match model config",
            ));
        }
        self.predict(x, height, width, t)
    }
}
