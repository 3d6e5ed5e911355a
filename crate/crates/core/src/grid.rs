//! Complex 2D rasters and the sampling operator.
//!
//! `ComplexGrid` is the universal carrier for images, coil images and
//! k-space data. `MultiChannelGrid` stacks one grid per coil.
//! `SamplingMask` is the undersampling operator: keep-and-zero-fill,
//! which is self-adjoint in this representation.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Dense 2D complex raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        ComplexGrid {
            height,
            width,
            data: vec![Complex64::ZERO; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "grid data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::Dimension("grid dimensions must be positive".into()));
        }
        Ok(ComplexGrid {
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut Complex64 {
        &mut self.data[row * self.width + col]
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    /// Squared l2 norm.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Standard complex inner product, conjugate-linear in `self`.
    pub fn inner(&self, other: &ComplexGrid) -> Complex64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Stack of same-shaped complex grids, one per coil/channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelGrid {
    channels: Vec<ComplexGrid>,
}

impl MultiChannelGrid {
    pub fn new(channels: Vec<ComplexGrid>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Dimension("channel count must be positive".into()));
        }
        let shape = channels[0].shape();
        if channels.iter().any(|c| c.shape() != shape) {
            return Err(Error::Dimension(
                "all channel grids must share height/width".into(),
            ));
        }
        Ok(MultiChannelGrid { channels })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        assert!(channels > 0, "channel count must be positive");
        MultiChannelGrid {
            channels: (0..channels).map(|_| ComplexGrid::zeros(height, width)).collect(),
        }
    }

    #[inline]
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    #[inline]
    pub fn channel(&self, i: usize) -> &ComplexGrid {
        &self.channels[i]
    }

    #[inline]
    pub fn channel_mut(&mut self, i: usize) -> &mut ComplexGrid {
        &mut self.channels[i]
    }

    pub fn channels(&self) -> &[ComplexGrid] {
        &self.channels
    }

    pub fn iter(&self) -> impl Iterator<Item = &ComplexGrid> {
        self.channels.iter()
    }

    /// Apply `f` to every channel, producing a new stack.
    pub fn map<F: FnMut(&ComplexGrid) -> ComplexGrid>(&self, mut f: F) -> MultiChannelGrid {
        MultiChannelGrid {
            channels: self.channels.iter().map(|c| f(c)).collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.channels.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.channels.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.channels.iter().all(|c| c.is_finite())
    }

    pub fn inner(&self, other: &MultiChannelGrid) -> Complex64 {
        debug_assert_eq!(self.num_channels(), other.num_channels());
        self.channels
            .iter()
            .zip(other.channels.iter())
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    /// Relative l2 distance `‖self − other‖ / ‖other‖` (absolute when `other` is zero).
    pub fn rel_dist(&self, other: &MultiChannelGrid) -> f64 {
        let mut diff = 0.0;
        for (a, b) in self.channels.iter().zip(other.channels.iter()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice().iter()) {
                diff += (x - y).norm_sqr();
            }
        }
        let denom = other.norm();
        if denom > 0.0 {
            diff.sqrt() / denom
        } else {
            diff.sqrt()
        }
    }
}

/// Boolean undersampling pattern over a k-space grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    kept: Vec<bool>,
}

impl SamplingMask {
    pub fn new(height: usize, width: usize, kept: Vec<bool>) -> Result<Self> {
        if kept.len() != height * width {
            return Err(Error::Dimension(format!(
                "mask length {} does not match {}x{}",
                kept.len(),
                height,
                width
            )));
        }
        if !kept.iter().any(|&k| k) {
            return Err(Error::InvalidParameter(
                "mask must keep at least one location".into(),
            ));
        }
        Ok(SamplingMask {
            height,
            width,
            kept,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        SamplingMask {
            height,
            width,
            kept: vec![true; height * width],
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn is_kept(&self, row: usize, col: usize) -> bool {
        self.kept[row * self.width + col]
    }

    #[inline]
    pub fn kept_flags(&self) -> &[bool] {
        &self.kept
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    /// total / kept; always ≥ 1 because at least one location is kept.
    pub fn acceleration(&self) -> f64 {
        (self.height * self.width) as f64 / self.kept_count() as f64
    }
}

/// Mask-and-zero-fill sampling operator, applied identically per channel.
///
/// Self-adjoint in this representation, so it serves as both A and A^H.
pub fn apply_mask(x: &MultiChannelGrid, mask: &SamplingMask) -> Result<MultiChannelGrid> {
    if (x.height(), x.width()) != mask.shape() {
        return Err(Error::Dimension(format!(
            "grid {}x{} vs mask {}x{}",
            x.height(),
            x.width(),
            mask.height(),
            mask.width()
        )));
    }
    let mut out = x.clone();
    for ch in 0..out.num_channels() {
        let grid = out.channel_mut(ch);
        for (v, &keep) in grid.as_mut_slice().iter_mut().zip(mask.kept_flags()) {
            if !keep {
                *v = Complex64::ZERO;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_stack() -> MultiChannelGrid {
        let mut g = ComplexGrid::zeros(2, 3);
        for (i, v) in g.as_mut_slice().iter_mut().enumerate() {
            *v = Complex64::new(i as f64 + 1.0, -(i as f64));
        }
        MultiChannelGrid::new(vec![g.clone(), g]).unwrap()
    }

    #[test]
    fn grid_rejects_bad_length() {
        assert!(ComplexGrid::from_vec(2, 2, vec![Complex64::ZERO; 3]).is_err());
    }

    #[test]
    fn channels_must_share_shape() {
        let a = ComplexGrid::zeros(2, 2);
        let b = ComplexGrid::zeros(2, 3);
        assert!(MultiChannelGrid::new(vec![a, b]).is_err());
    }

    #[test]
    fn mask_requires_kept_location() {
        assert!(SamplingMask::new(2, 2, vec![false; 4]).is_err());
        let m = SamplingMask::new(2, 2, vec![true, false, false, false]).unwrap();
        assert_eq!(m.kept_count(), 1);
        assert!((m.acceleration() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn all_kept_mask_is_identity() {
        let x = demo_stack();
        let m = SamplingMask::full(2, 3);
        let y = apply_mask(&x, &m).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn single_keep_zeroes_rest() {
        let x = demo_stack();
        let mut kept = vec![false; 6];
        kept[0] = true;
        let m = SamplingMask::new(2, 3, kept).unwrap();
        let y = apply_mask(&x, &m).unwrap();
        for ch in 0..y.num_channels() {
            assert_eq!(y.channel(ch).at(0, 0), x.channel(ch).at(0, 0));
            assert_eq!(y.channel(ch).as_slice()[1..], vec![Complex64::ZERO; 5]);
        }
    }

    #[test]
    fn mask_shape_mismatch_is_error() {
        let x = demo_stack();
        let m = SamplingMask::full(3, 3);
        assert!(apply_mask(&x, &m).is_err());
    }

    #[test]
    fn apply_mask_is_idempotent() {
        let x = demo_stack();
        let mut kept = vec![true; 6];
        kept[1] = false;
        kept[4] = false;
        let m = SamplingMask::new(2, 3, kept).unwrap();
        let once = apply_mask(&x, &m).unwrap();
        let twice = apply_mask(&once, &m).unwrap();
        assert_eq!(once, twice);
    }
}
