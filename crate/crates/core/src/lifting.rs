//! Block-Hankel lifting of multi-channel k-space and the commuted
//! filter-bank operators.
//!
//! `lift` arranges overlapping k-space patches so that a matrix–vector
//! product with stacked filter taps equals valid 2D linear convolution;
//! patch entries are therefore stored flipped. Filters are ordered
//! coil-major, taps row-major within each coil block. The same product
//! seen from the other side is `filterbank_apply`: convolution of the
//! multichannel input with one multichannel filter per column.

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, MultiChannelGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Shapes for a lifting: filter window, coil count, and grid size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftConfig {
    pub filter_height: usize,
    pub filter_width: usize,
    pub coils: usize,
    pub grid_height: usize,
    pub grid_width: usize,
}

impl LiftConfig {
    pub fn new(
        filter_height: usize,
        filter_width: usize,
        coils: usize,
        grid_height: usize,
        grid_width: usize,
    ) -> Result<Self> {
        if filter_height == 0 || filter_width == 0 || coils == 0 {
            return Err(Error::InvalidParameter(
                "filter dims and coil count must be >= 1".into(),
            ));
        }
        if filter_height > grid_height || filter_width > grid_width {
            return Err(Error::Dimension(format!(
                "filter {}x{} exceeds grid {}x{}",
                filter_height, filter_width, grid_height, grid_width
            )));
        }
        Ok(LiftConfig {
            filter_height,
            filter_width,
            coils,
            grid_height,
            grid_width,
        })
    }

    /// Output rows of one valid-convolution block: (H−f1+1)(W−f2+1).
    #[inline]
    pub fn rows(&self) -> usize {
        (self.grid_height - self.filter_height + 1) * (self.grid_width - self.filter_width + 1)
    }

    #[inline]
    pub fn out_height(&self) -> usize {
        self.grid_height - self.filter_height + 1
    }

    #[inline]
    pub fn out_width(&self) -> usize {
        self.grid_width - self.filter_width + 1
    }

    /// Taps per coil block.
    #[inline]
    pub fn taps_per_coil(&self) -> usize {
        self.filter_height * self.filter_width
    }

    /// Total columns N·f1·f2.
    #[inline]
    pub fn cols(&self) -> usize {
        self.coils * self.taps_per_coil()
    }

    pub fn matches(&self, x: &MultiChannelGrid) -> Result<()> {
        if x.num_channels() != self.coils
            || x.height() != self.grid_height
            || x.width() != self.grid_width
        {
            return Err(Error::Dimension(format!(
                "stack {}ch {}x{} does not match lift config {}ch {}x{}",
                x.num_channels(),
                x.height(),
                x.width(),
                self.coils,
                self.grid_height,
                self.grid_width
            )));
        }
        Ok(())
    }
}

/// Bank of multichannel k-space filters: one column per filter, each of
/// length N·f1·f2 (coil-major, row-major taps inside a coil block).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    config: LiftConfig,
    /// taps × filters, column-major storage.
    data: DMatrix<Complex64>,
}

impl FilterBank {
    pub fn new(config: LiftConfig, data: DMatrix<Complex64>) -> Result<Self> {
        if data.nrows() != config.cols() {
            return Err(Error::Dimension(format!(
                "filter length {} does not match N·f1·f2 = {}",
                data.nrows(),
                config.cols()
            )));
        }
        Ok(FilterBank { config, data })
    }

    pub fn zeros(config: LiftConfig, num_filters: usize) -> Self {
        let rows = config.cols();
        FilterBank {
            config,
            data: DMatrix::zeros(rows, num_filters),
        }
    }

    #[inline]
    pub fn config(&self) -> &LiftConfig {
        &self.config
    }

    #[inline]
    pub fn num_filters(&self) -> usize {
        self.data.ncols()
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.data
    }

    /// Tap (p, q) of coil block `coil` in filter `col`.
    #[inline]
    pub fn tap(&self, col: usize, coil: usize, p: usize, q: usize) -> Complex64 {
        let idx = coil * self.config.taps_per_coil() + p * self.config.filter_width + q;
        self.data[(idx, col)]
    }
}

/// Build the dense lifted matrix T(x̂) = [H(x̂_1) … H(x̂_N)].
///
/// Row (a, b) of coil block i holds the flipped patch
/// x̂_i[a+f1−1−p, b+f2−1−q], so `lift(x)·vec(ŝ)` is the valid linear
/// convolution x̂_i ∗ ŝ flattened row-major.
pub fn lift(x: &MultiChannelGrid, cfg: &LiftConfig) -> Result<DMatrix<Complex64>> {
    cfg.matches(x)?;
    let (f1, f2) = (cfg.filter_height, cfg.filter_width);
    let (oh, ow) = (cfg.out_height(), cfg.out_width());
    let mut t = DMatrix::zeros(cfg.rows(), cfg.cols());
    for coil in 0..cfg.coils {
        let grid = x.channel(coil);
        let block0 = coil * cfg.taps_per_coil();
        for a in 0..oh {
            for b in 0..ow {
                let row = a * ow + b;
                for p in 0..f1 {
                    for q in 0..f2 {
                        t[(row, block0 + p * f2 + q)] = grid.at(a + f1 - 1 - p, b + f2 - 1 - q);
                    }
                }
            }
        }
    }
    Ok(t)
}

/// Exact adjoint of [`lift`] under the entrywise complex inner product:
/// accumulates each matrix entry back onto the grid position it sampled.
pub fn lift_adjoint(y: &DMatrix<Complex64>, cfg: &LiftConfig) -> Result<MultiChannelGrid> {
    if y.nrows() != cfg.rows() || y.ncols() != cfg.cols() {
        return Err(Error::Dimension(format!(
            "matrix {}x{} does not match lift output {}x{}",
            y.nrows(),
            y.ncols(),
            cfg.rows(),
            cfg.cols()
        )));
    }
    let (f1, f2) = (cfg.filter_height, cfg.filter_width);
    let (oh, ow) = (cfg.out_height(), cfg.out_width());
    let mut out = MultiChannelGrid::zeros(cfg.coils, cfg.grid_height, cfg.grid_width);
    for coil in 0..cfg.coils {
        let grid = out.channel_mut(coil);
        let block0 = coil * cfg.taps_per_coil();
        for a in 0..oh {
            for b in 0..ow {
                let row = a * ow + b;
                for p in 0..f1 {
                    for q in 0..f2 {
                        *grid.at_mut(a + f1 - 1 - p, b + f2 - 1 - q) +=
                            y[(row, block0 + p * f2 + q)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gram matrix T(x̂)^H T(x̂), Hermitian PSD of size N·f1·f2.
pub fn gram(x: &MultiChannelGrid, cfg: &LiftConfig) -> Result<DMatrix<Complex64>> {
    let t = lift(x, cfg)?;
    let n = cfg.cols();
    let mut g = DMatrix::zeros(n, n);
    // Upper triangle by column dot products (columns are contiguous in
    // nalgebra storage), mirrored so the result is exactly Hermitian.
    for j in 0..n {
        let cj = t.column(j);
        for i in 0..=j {
            let ci = t.column(i);
            let mut acc = Complex64::ZERO;
            for r in 0..t.nrows() {
                acc += ci[r].conj() * cj[r];
            }
            if i == j {
                g[(i, j)] = Complex64::new(acc.re, 0.0);
            } else {
                g[(i, j)] = acc;
                g[(j, i)] = acc.conj();
            }
        }
    }
    Ok(g)
}

/// Apply the filter bank as a multichannel convolution:
/// output channel r = Σ_i valid-conv(x̂_i, ŝ_i^{(r)}).
/// Columnwise equal to `lift(x̂)·S`.
pub fn filterbank_apply(s: &FilterBank, x: &MultiChannelGrid) -> Result<MultiChannelGrid> {
    let cfg = s.config();
    cfg.matches(x)?;
    let (f1, f2) = (cfg.filter_height, cfg.filter_width);
    let (oh, ow) = (cfg.out_height(), cfg.out_width());
    let taps = cfg.taps_per_coil();
    let mut out = MultiChannelGrid::zeros(s.num_filters(), oh, ow);
    for col in 0..s.num_filters() {
        let filter = s.matrix().column(col);
        let acc = out.channel_mut(col);
        for coil in 0..cfg.coils {
            let grid = x.channel(coil);
            let block0 = coil * taps;
            for p in 0..f1 {
                for q in 0..f2 {
                    let w = filter[block0 + p * f2 + q];
                    if w == Complex64::ZERO {
                        continue;
                    }
                    let (src_r0, src_c0) = (f1 - 1 - p, f2 - 1 - q);
                    for a in 0..oh {
                        let src_row = grid.row(a + src_r0);
                        let dst_row = &mut acc.as_mut_slice()[a * ow..(a + 1) * ow];
                        for b in 0..ow {
                            dst_row[b] += src_row[src_c0 + b] * w;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact adjoint of [`filterbank_apply`]: correlation with conjugated
/// filters, accumulated back onto the full grid per coil.
pub fn filterbank_adjoint(s: &FilterBank, y: &MultiChannelGrid) -> Result<MultiChannelGrid> {
    let cfg = s.config();
    let (f1, f2) = (cfg.filter_height, cfg.filter_width);
    let (oh, ow) = (cfg.out_height(), cfg.out_width());
    if y.num_channels() != s.num_filters() || y.height() != oh || y.width() != ow {
        return Err(Error::Dimension(format!(
            "stack {}ch {}x{} does not match filterbank output {}ch {}x{}",
            y.num_channels(),
            y.height(),
            y.width(),
            s.num_filters(),
            oh,
            ow
        )));
    }
    let taps = cfg.taps_per_coil();
    let mut out = MultiChannelGrid::zeros(cfg.coils, cfg.grid_height, cfg.grid_width);
    for coil in 0..cfg.coils {
        let grid = out.channel_mut(coil);
        let block0 = coil * taps;
        for col in 0..s.num_filters() {
            let filter = s.matrix().column(col);
            let src = y.channel(col);
            for p in 0..f1 {
                for q in 0..f2 {
                    let w = filter[block0 + p * f2 + q].conj();
                    if w == Complex64::ZERO {
                        continue;
                    }
                    let (dst_r0, dst_c0) = (f1 - 1 - p, f2 - 1 - q);
                    for a in 0..oh {
                        let src_row = src.row(a);
                        let dst_row = &mut grid.as_mut_slice()
                            [(a + dst_r0) * cfg.grid_width..(a + dst_r0 + 1) * cfg.grid_width];
                        for b in 0..ow {
                            dst_row[dst_c0 + b] += src_row[b] * w;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
