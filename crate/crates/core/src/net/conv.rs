//! Real-valued conv primitives for the unrolled networks.
//!
//! Plain channel-major f64 tensors and direct 3x3-style convolutions
//! (zero padding, stride 1) with hand-rolled reverse-mode passes. Inner
//! loops run along contiguous rows.

use crate::error::{Error, Result};

/// Channel-major dense tensor: data[(ch*H + y)*W + x].
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl RealTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        RealTensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[f64] {
        let stride = self.height * self.width;
        &self.data[c * stride..(c + 1) * stride]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let stride = self.height * self.width;
        &mut self.data[c * stride..(c + 1) * stride]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Conv kernel weights: weights[((o*in + i)*k + ky)*k + kx].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: usize,
    pub weights: Vec<f64>,
}

impl ConvKernel {
    pub fn zeros(out_channels: usize, in_channels: usize, size: usize) -> Self {
        ConvKernel {
            out_channels,
            in_channels,
            size,
            weights: vec![0.0; out_channels * in_channels * size * size],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size % 2 == 0 || self.size == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd and positive, got {}",
                self.size
            )));
        }
        if self.weights.len() != self.out_channels * self.in_channels * self.size * self.size {
            return Err(Error::Dimension("kernel weight length mismatch".into()));
        }
        if !self.weights.iter().all(|w| w.is_finite()) {
            return Err(Error::InvalidParameter("kernel weights must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * self.size + ky) * self.size + kx]
    }

    #[inline]
    pub fn at_mut(&mut self, o: usize, i: usize, ky: usize, kx: usize) -> &mut f64 {
        &mut self.weights[((o * self.in_channels + i) * self.size + ky) * self.size + kx]
    }
}

/// Clipped row/column ranges so that y+dy and x+dx stay on the grid.
#[inline]
fn valid_span(extent: usize, delta: isize) -> (usize, usize) {
    let lo = if delta < 0 { (-delta) as usize } else { 0 };
    let hi = if delta > 0 {
        extent - delta as usize
    } else {
        extent
    };
    (lo, hi)
}

/// out[o][y][x] = bias[o] + Σ_{i,ky,kx} w[o,i,ky,kx]·in[i][y+ky−p][x+kx−p]
pub fn conv2d_forward(
    input: &RealTensor,
    kernel: &ConvKernel,
    bias: &[f64],
    out: &mut RealTensor,
) {
    debug_assert_eq!(input.channels, kernel.in_channels);
    debug_assert_eq!(out.channels, kernel.out_channels);
    debug_assert_eq!(bias.len(), kernel.out_channels);
    debug_assert_eq!((input.height, input.width), (out.height, out.width));
    let (h, w) = (input.height, input.width);
    let pad = (kernel.size / 2) as isize;
    for o in 0..kernel.out_channels {
        out.channel_mut(o).fill(bias[o]);
    }
    for o in 0..kernel.out_channels {
        for i in 0..kernel.in_channels {
            let src_ch = input.channel(i);
            for ky in 0..kernel.size {
                let dy = ky as isize - pad;
                let (y0, y1) = valid_span(h, dy);
                for kx in 0..kernel.size {
                    let wgt = kernel.at(o, i, ky, kx);
                    if wgt == 0.0 {
                        continue;
                    }
                    let dx = kx as isize - pad;
                    let (x0, x1) = valid_span(w, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    let dst_ch = out.channel_mut(o);
                    for y in y0..y1 {
                        let src_row = ((y as isize + dy) as usize) * w;
                        let src =
                            &src_ch[src_row + ((x0 as isize + dx) as usize)..src_row + ((x1 as isize + dx) as usize)];
                        let dst = &mut dst_ch[y * w + x0..y * w + x1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wgt * s;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulate the input gradient: d_in[i][y+dy][x+dx] += w·d_out[o][y][x].
pub fn conv2d_backward_input(kernel: &ConvKernel, d_out: &RealTensor, d_in: &mut RealTensor) {
    debug_assert_eq!(d_in.channels, kernel.in_channels);
    debug_assert_eq!(d_out.channels, kernel.out_channels);
    let (h, w) = (d_out.height, d_out.width);
    let pad = (kernel.size / 2) as isize;
    for o in 0..kernel.out_channels {
        let src_ch = d_out.channel(o);
        for i in 0..kernel.in_channels {
            for ky in 0..kernel.size {
                let dy = ky as isize - pad;
                let (y0, y1) = valid_span(h, dy);
                for kx in 0..kernel.size {
                    let wgt = kernel.at(o, i, ky, kx);
                    if wgt == 0.0 {
                        continue;
                    }
                    let dx = kx as isize - pad;
                    let (x0, x1) = valid_span(w, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    let dst_ch = d_in.channel_mut(i);
                    for y in y0..y1 {
                        let dst_row = ((y as isize + dy) as usize) * w;
                        let dst = &mut dst_ch
                            [dst_row + ((x0 as isize + dx) as usize)..dst_row + ((x1 as isize + dx) as usize)];
                        let src = &src_ch[y * w + x0..y * w + x1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wgt * s;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulate kernel and bias gradients for one sample.
pub fn conv2d_backward_params(
    input: &RealTensor,
    d_out: &RealTensor,
    d_kernel: &mut ConvKernel,
    d_bias: &mut [f64],
) {
    debug_assert_eq!(input.channels, d_kernel.in_channels);
    debug_assert_eq!(d_out.channels, d_kernel.out_channels);
    let (h, w) = (input.height, input.width);
    let pad = (d_kernel.size / 2) as isize;
    for o in 0..d_kernel.out_channels {
        let g_ch = d_out.channel(o);
        d_bias[o] += g_ch.iter().sum::<f64>();
        for i in 0..d_kernel.in_channels {
            let src_ch = input.channel(i);
            for ky in 0..d_kernel.size {
                let dy = ky as isize - pad;
                let (y0, y1) = valid_span(h, dy);
                for kx in 0..d_kernel.size {
                    let dx = kx as isize - pad;
                    let (x0, x1) = valid_span(w, dx);
                    if x0 >= x1 || y0 >= y1 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let src_row = ((y as isize + dy) as usize) * w;
                        let src = &src_ch
                            [src_row + ((x0 as isize + dx) as usize)..src_row + ((x1 as isize + dx) as usize)];
                        let grd = &g_ch[y * w + x0..y * w + x1];
                        for (s, g) in src.iter().zip(grd) {
                            acc += s * g;
                        }
                    }
                    *d_kernel.at_mut(o, i, ky, kx) += acc;
                }
            }
        }
    }
}

pub fn relu(x: &RealTensor) -> RealTensor {
    RealTensor {
        channels: x.channels,
        height: x.height,
        width: x.width,
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// d_z = d_a where the post-activation is positive, else 0.
pub fn relu_backward(post_activation: &RealTensor, d_a: &RealTensor) -> RealTensor {
    RealTensor {
        channels: d_a.channels,
        height: d_a.height,
        width: d_a.width,
        data: post_activation
            .data
            .iter()
            .zip(d_a.data.iter())
            .map(|(&a, &g)| if a > 0.0 { g } else { 0.0 })
            .collect(),
    }
}
