//! Pre-learned unrolled replacements for the per-iterate linear denoiser.
//!
//! Two architectures, both alternating a residual 5-layer CNN denoiser
//! with analytic data-consistency blocks for a fixed number of unrolls,
//! parameters shared across unrolls:
//!
//! - k-space net: one denoiser working on the 2N-real-channel view of
//!   multi-coil k-space;
//! - hybrid net: a second denoiser on the per-coil inverse-FFT images,
//!   fused with the k-space branch inside the DC block.
//!
//! Reverse-mode gradients are hand-rolled: convolutions, ReLUs, the DC
//! closed forms, and the orthonormal FFTs (adjoint = inverse) all
//! differentiate exactly.

pub mod conv;
pub mod train;

use crate::error::{Error, Result};
use crate::fft::{fft2c_multi, ifft2c_multi};
use crate::grid::{ComplexGrid, MultiChannelGrid, SamplingMask};
use crate::pslr::dc_solve;
use crate::rng::SeededRng;
use conv::{
    conv2d_backward_input, conv2d_backward_params, conv2d_forward, relu, relu_backward,
    ConvKernel, RealTensor,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One convolution layer: kernel plus per-output-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    pub kernel: ConvKernel,
    pub bias: Vec<f64>,
}

impl ConvLayerParams {
    pub fn zeros(out_channels: usize, in_channels: usize, size: usize) -> Self {
        ConvLayerParams {
            kernel: ConvKernel::zeros(out_channels, in_channels, size),
            bias: vec![0.0; out_channels],
        }
    }
}

/// The 5-layer residual denoiser body: conv(+ReLU) x4 then a final conv;
/// the block output is input + correction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    layers: Vec<ConvLayerParams>,
}

pub const DENOISER_LAYERS: usize = 5;

impl DenoiserParams {
    pub fn new(layers: Vec<ConvLayerParams>) -> Result<Self> {
        if layers.len() != DENOISER_LAYERS {
            return Err(Error::InvalidParameter(format!(
                "denoiser needs {} conv layers, got {}",
                DENOISER_LAYERS,
                layers.len()
            )));
        }
        let io = layers[0].kernel.in_channels;
        if layers[DENOISER_LAYERS - 1].kernel.out_channels != io {
            return Err(Error::InvalidParameter(
                "first input and last output channel counts must match".into(),
            ));
        }
        for (i, l) in layers.iter().enumerate() {
            l.kernel.validate()?;
            if l.bias.len() != l.kernel.out_channels {
                return Err(Error::Dimension(format!("layer {} bias length", i)));
            }
            if i > 0 && l.kernel.in_channels != layers[i - 1].kernel.out_channels {
                return Err(Error::Dimension(format!(
                    "layer {} input channels {} vs previous output {}",
                    i,
                    l.kernel.in_channels,
                    layers[i - 1].kernel.out_channels
                )));
            }
        }
        Ok(DenoiserParams { layers })
    }

    /// Seeded init: kernels uniform in ±1/√fan_in, biases zero, final
    /// layer zeroed so the block starts as the identity.
    pub fn init(io_channels: usize, hidden: usize, kernel_size: usize, rng: &mut SeededRng) -> Self {
        let plan = Self::channel_plan(io_channels, hidden);
        let mut layers = Vec::with_capacity(DENOISER_LAYERS);
        for (l, &(ic, oc)) in plan.iter().enumerate() {
            let mut layer = ConvLayerParams::zeros(oc, ic, kernel_size);
            if l + 1 < DENOISER_LAYERS {
                let bound = 1.0 / ((ic * kernel_size * kernel_size) as f64).sqrt();
                for w in layer.kernel.weights.iter_mut() {
                    *w = rng.uniform_in(-bound, bound);
                }
            }
            layers.push(layer);
        }
        DenoiserParams { layers }
    }

    pub fn zeros(io_channels: usize, hidden: usize, kernel_size: usize) -> Self {
        let layers = Self::channel_plan(io_channels, hidden)
            .iter()
            .map(|&(ic, oc)| ConvLayerParams::zeros(oc, ic, kernel_size))
            .collect();
        DenoiserParams { layers }
    }

    fn channel_plan(io: usize, hidden: usize) -> [(usize, usize); DENOISER_LAYERS] {
        [
            (io, hidden),
            (hidden, hidden),
            (hidden, hidden),
            (hidden, hidden),
            (hidden, io),
        ]
    }

    #[inline]
    pub fn io_channels(&self) -> usize {
        self.layers[0].kernel.in_channels
    }

    #[inline]
    pub fn hidden_width(&self) -> usize {
        self.layers[0].kernel.out_channels
    }

    #[inline]
    pub fn kernel_size(&self) -> usize {
        self.layers[0].kernel.size
    }

    pub fn layers(&self) -> &[ConvLayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayerParams] {
        &mut self.layers
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Kspace,
    Hybrid,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arch::Kspace => write!(f, "kspace"),
            Arch::Hybrid => write!(f, "hybrid"),
        }
    }
}

/// All learnable state of an unrolled network. DC weights are stored as
/// log-parameters so they stay positive under gradient steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub coils: usize,
    pub k_unrolls: usize,
    pub d_k: DenoiserParams,
    pub d_i: Option<DenoiserParams>,
    pub log_beta_k: f64,
    pub log_beta_i: Option<f64>,
    pub train_dc_weights: bool,
}

impl NetParams {
    pub fn init(
        arch: Arch,
        coils: usize,
        k_unrolls: usize,
        hidden: usize,
        kernel_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if coils == 0 || k_unrolls == 0 {
            return Err(Error::InvalidParameter(
                "coils and unroll count must be >= 1".into(),
            ));
        }
        let mut rng = SeededRng::new(seed);
        let io = 2 * coils;
        let d_k = DenoiserParams::init(io, hidden, kernel_size, &mut rng);
        let d_i = match arch {
            Arch::Kspace => None,
            Arch::Hybrid => Some(DenoiserParams::init(io, hidden, kernel_size, &mut rng)),
        };
        let p = NetParams {
            coils,
            k_unrolls,
            d_k,
            d_i,
            log_beta_k: 0.0,
            log_beta_i: match arch {
                Arch::Kspace => None,
                Arch::Hybrid => Some(0.0),
            },
            train_dc_weights: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn arch(&self) -> Arch {
        if self.d_i.is_some() {
            Arch::Hybrid
        } else {
            Arch::Kspace
        }
    }

    #[inline]
    pub fn beta_k(&self) -> f64 {
        self.log_beta_k.exp()
    }

    #[inline]
    pub fn beta_i(&self) -> Option<f64> {
        self.log_beta_i.map(f64::exp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_k.io_channels() != 2 * self.coils {
            return Err(Error::Dimension(format!(
                "k-space denoiser expects {} channels, got {}",
                2 * self.coils,
                self.d_k.io_channels()
            )));
        }
        if self.d_i.is_some() != self.log_beta_i.is_some() {
            return Err(Error::InvalidParameter(
                "hybrid mode needs both the image denoiser and its DC weight".into(),
            ));
        }
        if let Some(d_i) = &self.d_i {
            if d_i.io_channels() != 2 * self.coils {
                return Err(Error::Dimension("image denoiser channel count".into()));
            }
        }
        if !self.log_beta_k.is_finite() || self.log_beta_i.is_some_and(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("DC weights must be finite".into()));
        }
        Ok(())
    }
}

/// Complex N-channel grid viewed as 2N real channels (re, im per coil).
pub fn complex_to_real(x: &MultiChannelGrid) -> RealTensor {
    let (h, w) = (x.height(), x.width());
    let mut t = RealTensor::zeros(2 * x.num_channels(), h, w);
    for c in 0..x.num_channels() {
        let src = x.channel(c).as_slice();
        let (re_ch, im_ch) = (2 * c, 2 * c + 1);
        for (i, v) in src.iter().enumerate() {
            t.channel_mut(re_ch)[i] = v.re;
            t.channel_mut(im_ch)[i] = v.im;
        }
    }
    t
}

/// Inverse of [`complex_to_real`].
pub fn real_to_complex(t: &RealTensor) -> MultiChannelGrid {
    assert!(t.channels % 2 == 0, "real view needs an even channel count");
    let coils = t.channels / 2;
    let mut out = MultiChannelGrid::zeros(coils, t.height, t.width);
    for c in 0..coils {
        let re = t.channel(2 * c);
        let im = t.channel(2 * c + 1);
        let dst = out.channel_mut(c).as_mut_slice();
        for i in 0..dst.len() {
            dst[i] = Complex64::new(re[i], im[i]);
        }
    }
    out
}

/// Per-layer inputs kept from a denoiser forward pass (a0 = block input,
/// a1..a4 = post-ReLU activations feeding each later conv).
#[derive(Debug, Clone)]
pub struct DenoiserCache {
    activations: Vec<RealTensor>,
}

fn denoiser_apply(p: &DenoiserParams, input: RealTensor) -> (RealTensor, DenoiserCache) {
    let (h, w) = (input.height, input.width);
    let mut activations = Vec::with_capacity(DENOISER_LAYERS);
    let mut cur = input;
    for (l, layer) in p.layers.iter().enumerate() {
        let mut z = RealTensor::zeros(layer.kernel.out_channels, h, w);
        conv2d_forward(&cur, &layer.kernel, &layer.bias, &mut z);
        activations.push(cur);
        cur = if l + 1 < DENOISER_LAYERS { relu(&z) } else { z };
    }
    // residual add: D(x) = x + N(x)
    let mut out = cur;
    for (o, i) in out.data.iter_mut().zip(activations[0].data.iter()) {
        *o += i;
    }
    (out, DenoiserCache { activations })
}

/// Backprop through one denoiser block. Accumulates parameter gradients
/// into `grads` and returns the gradient w.r.t. the block input
/// (residual path included).
fn denoiser_backprop(
    p: &DenoiserParams,
    cache: &DenoiserCache,
    d_out: &RealTensor,
    grads: &mut DenoiserGrads,
) -> RealTensor {
    let mut d = d_out.clone();
    for l in (0..DENOISER_LAYERS).rev() {
        let layer_input = &cache.activations[l];
        let g = &mut grads.layers[l];
        conv2d_backward_params(layer_input, &d, &mut g.kernel, &mut g.bias);
        let mut d_in = RealTensor::zeros(layer_input.channels, layer_input.height, layer_input.width);
        conv2d_backward_input(&p.layers[l].kernel, &d, &mut d_in);
        d = if l > 0 {
            relu_backward(&cache.activations[l], &d_in)
        } else {
            d_in
        };
    }
    for (dv, r) in d.data.iter_mut().zip(d_out.data.iter()) {
        *dv += r;
    }
    d
}

/// Residual CNN denoiser D(x) = x + N(x) on the 2N-real-channel view.
pub fn denoiser_forward(x: &MultiChannelGrid, p: &DenoiserParams) -> Result<MultiChannelGrid> {
    if p.io_channels() != 2 * x.num_channels() {
        return Err(Error::Dimension(format!(
            "denoiser expects {} real channels, grid provides {}",
            p.io_channels(),
            2 * x.num_channels()
        )));
    }
    let (out, _) = denoiser_apply(p, complex_to_real(x));
    Ok(real_to_complex(&out))
}

/// k-space data-consistency block; identical contract to
/// [`crate::pslr::dc_solve`].
pub fn dc_block_k(
    z: &MultiChannelGrid,
    b: &MultiChannelGrid,
    mask: &SamplingMask,
    beta_k: f64,
) -> Result<MultiChannelGrid> {
    dc_solve(z, b, mask, beta_k)
}

/// Joint data-consistency block for the hybrid net: elementwise minimizer
/// of ‖Ax̂−b‖² + β_k‖x̂−z_k‖² + β_I‖x̂−fft2c(z_I)‖².
///
/// β_I = 0 is allowed (reduces to the k-space block); β_k must stay
/// positive so the off-mask entries remain determined.
pub fn dc_block_hybrid(
    z_k: &MultiChannelGrid,
    z_i_image: &MultiChannelGrid,
    b: &MultiChannelGrid,
    mask: &SamplingMask,
    beta_k: f64,
    beta_i: f64,
) -> Result<MultiChannelGrid> {
    if beta_k <= 0.0 || beta_i < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "hybrid DC needs beta_k > 0 and beta_i >= 0 (got {}, {})",
            beta_k, beta_i
        )));
    }
    let same = |g: &MultiChannelGrid| {
        g.num_channels() == b.num_channels() && g.height() == b.height() && g.width() == b.width()
    };
    if !same(z_k) || !same(z_i_image) || (b.height(), b.width()) != mask.shape() {
        return Err(Error::Dimension("hybrid DC operand shapes disagree".into()));
    }
    let z_i_hat = fft2c_multi(z_i_image);
    let mut out = MultiChannelGrid::zeros(b.num_channels(), b.height(), b.width());
    let inv_kept = 1.0 / (1.0 + beta_k + beta_i);
    let inv_miss = 1.0 / (beta_k + beta_i);
    for ch in 0..out.num_channels() {
        let bs = b.channel(ch).as_slice();
        let zk = z_k.channel(ch).as_slice();
        let zi = z_i_hat.channel(ch).as_slice();
        let dst = out.channel_mut(ch).as_mut_slice();
        for (i, &keep) in mask.kept_flags().iter().enumerate() {
            dst[i] = if keep {
                (bs[i] + zk[i] * beta_k + zi[i] * beta_i) * inv_kept
            } else {
                (zk[i] * beta_k + zi[i] * beta_i) * inv_miss
            };
        }
    }
    Ok(out)
}

/// Everything the backward pass needs from one unroll.
#[derive(Debug, Clone)]
pub struct UnrollCache {
    x_in: MultiChannelGrid,
    dk_cache: DenoiserCache,
    z_k: MultiChannelGrid,
    di_cache: Option<DenoiserCache>,
    z_i_hat: Option<MultiChannelGrid>,
}

/// Cached activations of a full forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mask: SamplingMask,
    unrolls: Vec<UnrollCache>,
    output: MultiChannelGrid,
}

impl ForwardCache {
    pub fn output(&self) -> &MultiChannelGrid {
        &self.output
    }
}

fn check_net_inputs(b: &MultiChannelGrid, mask: &SamplingMask, p: &NetParams) -> Result<()> {
    p.validate()?;
    if b.num_channels() != p.coils {
        return Err(Error::Dimension(format!(
            "measurements have {} coils, network expects {}",
            b.num_channels(),
            p.coils
        )));
    }
    if (b.height(), b.width()) != mask.shape() {
        return Err(Error::Dimension("measurements vs mask shape".into()));
    }
    Ok(())
}

/// Run the unrolled network, keeping per-unroll activations for
/// [`backward`].
pub fn forward_with_cache(
    b: &MultiChannelGrid,
    mask: &SamplingMask,
    p: &NetParams,
) -> Result<(MultiChannelGrid, ForwardCache)> {
    check_net_inputs(b, mask, p)?;
    let beta_k = p.beta_k();
    let mut x = b.clone();
    let mut unrolls = Vec::with_capacity(p.k_unrolls);
    for _ in 0..p.k_unrolls {
        let (zk_real, dk_cache) = denoiser_apply(&p.d_k, complex_to_real(&x));
        let z_k = real_to_complex(&zk_real);
        match (&p.d_i, p.beta_i()) {
            (Some(d_i), Some(beta_i)) => {
                let x_img = ifft2c_multi(&x);
                let (zi_real, di_cache) = denoiser_apply(d_i, complex_to_real(&x_img));
                let z_i = real_to_complex(&zi_real);
                let next = dc_block_hybrid(&z_k, &z_i, b, mask, beta_k, beta_i)?;
                unrolls.push(UnrollCache {
                    x_in: x,
                    dk_cache,
                    z_k,
                    di_cache: Some(di_cache),
                    z_i_hat: Some(fft2c_multi(&z_i)),
                });
                x = next;
            }
            _ => {
                let next = dc_block_k(&z_k, b, mask, beta_k)?;
                unrolls.push(UnrollCache {
                    x_in: x,
                    dk_cache,
                    z_k,
                    di_cache: None,
                    z_i_hat: None,
                });
                x = next;
            }
        }
    }
    let cache = ForwardCache {
        mask: mask.clone(),
        unrolls,
        output: x.clone(),
    };
    Ok((x, cache))
}

/// K unrolls of denoise + k-space DC starting from the zero-filled data.
pub fn forward_kspace_net(
    b: &MultiChannelGrid,
    mask: &SamplingMask,
    p: &NetParams,
) -> Result<MultiChannelGrid> {
    if p.arch() != Arch::Kspace {
        return Err(Error::InvalidParameter(
            "forward_kspace_net requires parameters without an image denoiser".into(),
        ));
    }
    forward_with_cache(b, mask, p).map(|(x, _)| x)
}

/// K unrolls of the parallel k-space + image denoisers with the joint DC.
pub fn forward_hybrid_net(
    b: &MultiChannelGrid,
    mask: &SamplingMask,
    p: &NetParams,
) -> Result<MultiChannelGrid> {
    if p.arch() != Arch::Hybrid {
        return Err(Error::InvalidParameter(
            "forward_hybrid_net requires hybrid parameters".into(),
        ));
    }
    forward_with_cache(b, mask, p).map(|(x, _)| x)
}

/// Gradient container mirroring [`DenoiserParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserGrads {
    pub layers: Vec<ConvLayerParams>,
}

impl DenoiserGrads {
    fn zeros_like(p: &DenoiserParams) -> Self {
        DenoiserGrads {
            layers: p
                .layers
                .iter()
                .map(|l| {
                    ConvLayerParams::zeros(
                        l.kernel.out_channels,
                        l.kernel.in_channels,
                        l.kernel.size,
                    )
                })
                .collect(),
        }
    }
}

/// Gradients for every learnable tensor, same shapes as [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub d_k: DenoiserGrads,
    pub d_i: Option<DenoiserGrads>,
    pub d_log_beta_k: f64,
    pub d_log_beta_i: Option<f64>,
}

impl ParamGrads {
    pub fn zeros_like(p: &NetParams) -> Self {
        ParamGrads {
            d_k: DenoiserGrads::zeros_like(&p.d_k),
            d_i: p.d_i.as_ref().map(DenoiserGrads::zeros_like),
            d_log_beta_k: 0.0,
            d_log_beta_i: p.log_beta_i.map(|_| 0.0),
        }
    }

    /// self += other
    pub fn accumulate(&mut self, other: &ParamGrads) {
        let add_denoiser = |dst: &mut DenoiserGrads, src: &DenoiserGrads| {
            for (d, s) in dst.layers.iter_mut().zip(src.layers.iter()) {
                for (a, b) in d.kernel.weights.iter_mut().zip(s.kernel.weights.iter()) {
                    *a += b;
                }
                for (a, b) in d.bias.iter_mut().zip(s.bias.iter()) {
                    *a += b;
                }
            }
        };
        add_denoiser(&mut self.d_k, &other.d_k);
        if let (Some(di), Some(so)) = (self.d_i.as_mut(), other.d_i.as_ref()) {
            add_denoiser(di, so);
        }
        self.d_log_beta_k += other.d_log_beta_k;
        if let (Some(a), Some(b)) = (self.d_log_beta_i.as_mut(), other.d_log_beta_i) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        let scale_denoiser = |d: &mut DenoiserGrads| {
            for l in d.layers.iter_mut() {
                for w in l.kernel.weights.iter_mut() {
                    *w *= factor;
                }
                for b in l.bias.iter_mut() {
                    *b *= factor;
                }
            }
        };
        scale_denoiser(&mut self.d_k);
        if let Some(di) = self.d_i.as_mut() {
            scale_denoiser(di);
        }
        self.d_log_beta_k *= factor;
        if let Some(v) = self.d_log_beta_i.as_mut() {
            *v *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        let den = |d: &DenoiserGrads| {
            d.layers.iter().all(|l| {
                l.kernel.weights.iter().all(|w| w.is_finite())
                    && l.bias.iter().all(|b| b.is_finite())
            })
        };
        den(&self.d_k)
            && self.d_i.as_ref().map_or(true, den)
            && self.d_log_beta_k.is_finite()
            && self.d_log_beta_i.map_or(true, f64::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        let den = |d: &DenoiserGrads| {
            d.layers
                .iter()
                .flat_map(|l| l.kernel.weights.iter().chain(l.bias.iter()))
                .fold(0.0f64, |m, &v| m.max(v.abs()))
        };
        let mut m = den(&self.d_k).max(self.d_log_beta_k.abs());
        if let Some(di) = self.d_i.as_ref() {
            m = m.max(den(di));
        }
        if let Some(v) = self.d_log_beta_i {
            m = m.max(v.abs());
        }
        m
    }
}

/// Real part of conj(a)·b: the chain-rule pairing for complex-as-2-real.
#[inline]
fn re_dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Exact reverse-mode gradients of a scalar loss through all K unrolls.
///
/// `loss_grad` holds ∂L/∂re + i·∂L/∂im of the network output. DC blocks
/// differentiate through their closed forms; β gradients are reported in
/// log-parametrization.
pub fn backward(
    loss_grad: &MultiChannelGrid,
    cache: &ForwardCache,
    p: &NetParams,
) -> Result<ParamGrads> {
    if cache.unrolls.len() != p.k_unrolls {
        return Err(Error::InvalidParameter(format!(
            "cache holds {} unrolls, parameters expect {}",
            cache.unrolls.len(),
            p.k_unrolls
        )));
    }
    if loss_grad.num_channels() != p.coils
        || loss_grad.height() != cache.output.height()
        || loss_grad.width() != cache.output.width()
    {
        return Err(Error::Dimension("loss gradient shape".into()));
    }
    let mut grads = ParamGrads::zeros_like(p);
    let beta_k = p.beta_k();
    let beta_i = p.beta_i();
    let mask = &cache.mask;
    let mut d = loss_grad.clone();
    let mut d_beta_k_raw = 0.0;
    let mut d_beta_i_raw = 0.0;

    for t in (0..cache.unrolls.len()).rev() {
        let u = &cache.unrolls[t];
        let x_out = if t + 1 == cache.unrolls.len() {
            &cache.output
        } else {
            &cache.unrolls[t + 1].x_in
        };

        // through the DC block
        let mut d_z_k = MultiChannelGrid::zeros(p.coils, d.height(), d.width());
        let mut d_z_i_hat = beta_i.map(|_| MultiChannelGrid::zeros(p.coils, d.height(), d.width()));
        match beta_i {
            None => {
                let gain = beta_k / (1.0 + beta_k);
                let dβ_gain = 1.0 / (1.0 + beta_k);
                for ch in 0..p.coils {
                    let dv = d.channel(ch).as_slice();
                    let zk = u.z_k.channel(ch).as_slice();
                    let xo = x_out.channel(ch).as_slice();
                    let dst = d_z_k.channel_mut(ch).as_mut_slice();
                    for (i, &keep) in mask.kept_flags().iter().enumerate() {
                        if keep {
                            dst[i] = dv[i] * gain;
                            d_beta_k_raw += re_dot(dv[i], (zk[i] - xo[i]) * dβ_gain);
                        } else {
                            dst[i] = dv[i];
                        }
                    }
                }
            }
            Some(bi) => {
                let zi_hat = u.z_i_hat.as_ref().expect("hybrid cache");
                let inv_kept = 1.0 / (1.0 + beta_k + bi);
                let inv_miss = 1.0 / (beta_k + bi);
                let dzi = d_z_i_hat.as_mut().unwrap();
                for ch in 0..p.coils {
                    let dv = d.channel(ch).as_slice();
                    let zk = u.z_k.channel(ch).as_slice();
                    let zi = zi_hat.channel(ch).as_slice();
                    let xo = x_out.channel(ch).as_slice();
                    let dk_dst = d_z_k.channel_mut(ch).as_mut_slice();
                    let di_dst = dzi.channel_mut(ch).as_mut_slice();
                    for (i, &keep) in mask.kept_flags().iter().enumerate() {
                        let inv = if keep { inv_kept } else { inv_miss };
                        dk_dst[i] = dv[i] * (beta_k * inv);
                        di_dst[i] = dv[i] * (bi * inv);
                        d_beta_k_raw += re_dot(dv[i], (zk[i] - xo[i]) * inv);
                        d_beta_i_raw += re_dot(dv[i], (zi[i] - xo[i]) * inv);
                    }
                }
            }
        }

        // through the k-space denoiser
        let d_zk_real = complex_to_real(&d_z_k);
        let d_x_real = denoiser_backprop(&p.d_k, &u.dk_cache, &d_zk_real, &mut grads.d_k);
        let mut d_x = real_to_complex(&d_x_real);

        // through the image branch: z_i_hat = fft2c(D_I(ifft2c(x)))
        if let (Some(d_i), Some(dzi_hat)) = (&p.d_i, d_z_i_hat) {
            let d_z_i_img = ifft2c_multi(&dzi_hat);
            let di_grads = grads.d_i.as_mut().expect("hybrid grads");
            let di_cache = u.di_cache.as_ref().expect("hybrid cache");
            let d_ximg_real =
                denoiser_backprop(d_i, di_cache, &complex_to_real(&d_z_i_img), di_grads);
            let d_ximg = real_to_complex(&d_ximg_real);
            let d_from_img = fft2c_multi(&d_ximg);
            for ch in 0..p.coils {
                let add = d_from_img.channel(ch).as_slice();
                let dst = d_x.channel_mut(ch).as_mut_slice();
                for i in 0..dst.len() {
                    dst[i] += add[i];
                }
            }
        }
        d = d_x;
    }

    // log-parametrization chain: dL/d(log β) = β · dL/dβ
    grads.d_log_beta_k = beta_k * d_beta_k_raw;
    if let Some(bi) = beta_i {
        grads.d_log_beta_i = Some(bi * d_beta_i_raw);
    }
    Ok(grads)
}
