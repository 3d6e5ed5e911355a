//! Synthetic multi-coil acquisition: phantoms, bandlimited coil
//! sensitivities, variable-density Cartesian masks, and noisy
//! undersampled measurements.
//!
//! Everything here is a deterministic function of (spec, seed), so a
//! dataset can be regenerated bit-for-bit from its manifest.

use crate::error::{Error, Result};
use crate::fft::{fft2c, ifft2c};
use crate::grid::{apply_mask, ComplexGrid, MultiChannelGrid, SamplingMask};
use crate::rng::SeededRng;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One ellipse of a piecewise-constant phantom. Coordinates live in the
/// [-1, 1] square: `center` and `semi_axes` are fractions of the half
/// field of view, `rotation` is in radians, `amplitude` is complex.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    #[serde(default)]
    pub rotation: f64,
    /// (re, im)
    pub amplitude: [f64; 2],
}

impl Ellipse {
    /// Point-in-ellipse test at normalized coordinates (x, y).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let (sin, cos) = self.rotation.sin_cos();
        let u = (dx * cos + dy * sin) / self.semi_axes[0];
        let v = (-dx * sin + dy * cos) / self.semi_axes[1];
        u * u + v * v <= 1.0
    }
}

/// Rasterization spec for a synthetic object: overlapping ellipses summed,
/// then multiplied by a global linear phase ramp exp(i(ax + by)).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub ellipses: Vec<Ellipse>,
    /// Phase ramp coefficients (a, b) applied as exp(i(a·x + b·y)).
    #[serde(default)]
    pub phase_ramp: [f64; 2],
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidParameter("phantom grid must be positive".into()));
        }
        if self.ellipses.is_empty() {
            return Err(Error::InvalidParameter("phantom needs at least one ellipse".into()));
        }
        for (i, e) in self.ellipses.iter().enumerate() {
            if e.semi_axes[0] <= 0.0 || e.semi_axes[1] <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "ellipse {} has nonpositive semi-axis",
                    i
                )));
            }
        }
        Ok(())
    }

    /// A fixed head-like arrangement of ellipses on the given grid,
    /// loosely following the classic CT phantom layout.
    pub fn head_preset(height: usize, width: usize) -> PhantomSpec {
        let e = |cx: f64, cy: f64, a: f64, b: f64, rot: f64, amp: f64| Ellipse {
            center: [cx, cy],
            semi_axes: [a, b],
            rotation: rot,
            amplitude: [amp, 0.0],
        };
        PhantomSpec {
            height,
            width,
            ellipses: vec![
                e(0.0, 0.0, 0.72, 0.92, 0.0, 1.0),
                e(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.3),
                e(0.22, 0.0, 0.11, 0.31, -0.4, -0.15),
                e(-0.22, 0.0, 0.16, 0.41, 0.4, -0.15),
                e(0.0, 0.35, 0.21, 0.25, 0.0, 0.2),
                e(0.0, 0.1, 0.046, 0.046, 0.0, 0.2),
                e(0.0, -0.1, 0.046, 0.046, 0.0, 0.2),
                e(-0.08, -0.605, 0.046, 0.023, 0.0, 0.25),
                e(0.0, -0.605, 0.023, 0.023, 0.0, 0.25),
                e(0.06, -0.605, 0.023, 0.046, 0.0, 0.25),
            ],
            phase_ramp: [0.0, 0.0],
        }
    }
}

/// Normalized pixel-center coordinates for column c / row r.
#[inline]
fn norm_coords(r: usize, c: usize, h: usize, w: usize) -> (f64, f64) {
    let x = 2.0 * (c as f64 + 0.5) / w as f64 - 1.0;
    let y = 2.0 * (r as f64 + 0.5) / h as f64 - 1.0;
    (x, y)
}

/// Rasterize a phantom by pixel-center evaluation (no anti-aliasing).
pub fn make_phantom(spec: &PhantomSpec) -> Result<ComplexGrid> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut out = ComplexGrid::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let (x, y) = norm_coords(r, c, h, w);
            let mut v = Complex64::ZERO;
            for e in &spec.ellipses {
                if e.contains(x, y) {
                    v += Complex64::new(e.amplitude[0], e.amplitude[1]);
                }
            }
            if v != Complex64::ZERO && (spec.phase_ramp[0] != 0.0 || spec.phase_ramp[1] != 0.0) {
                let phase = spec.phase_ramp[0] * x + spec.phase_ramp[1] * y;
                v *= Complex64::new(phase.cos(), phase.sin());
            }
            *out.at_mut(r, c) = v;
        }
    }
    Ok(out)
}

/// Coil sensitivity generator spec. The Fourier support window is
/// `support` (odd per axis), centered at DC; coefficients inside it are
/// i.i.d. complex Gaussian from `seed`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySpec {
    pub coils: usize,
    /// (f1, f2): rows x cols of the centered k-space support window.
    pub support: [usize; 2],
    pub seed: u64,
    /// Scale so the sum-of-squares magnitude is 1 at every pixel.
    /// Note this breaks the exact bandlimit.
    #[serde(default)]
    pub normalize: bool,
}

impl SensitivitySpec {
    pub fn validate(&self) -> Result<()> {
        if self.coils == 0 {
            return Err(Error::InvalidParameter("coil count must be >= 1".into()));
        }
        if self.support[0] == 0 || self.support[1] == 0 {
            return Err(Error::InvalidParameter("support must be >= 1 per axis".into()));
        }
        if self.support[0] % 2 == 0 || self.support[1] % 2 == 0 {
            return Err(Error::InvalidParameter("support must be odd per axis".into()));
        }
        Ok(())
    }
}

/// Top-left corner of the centered f1 x f2 window on an HxW grid.
pub fn centered_window_origin(h: usize, w: usize, f1: usize, f2: usize) -> (usize, usize) {
    (h / 2 - f1 / 2, w / 2 - f2 / 2)
}

/// Generate spatial-domain coil sensitivities with exactly bandlimited
/// spectra (pre-normalization). Deterministic in (spec, shape).
pub fn make_sensitivities(
    spec: &SensitivitySpec,
    height: usize,
    width: usize,
) -> Result<MultiChannelGrid> {
    spec.validate()?;
    let (f1, f2) = (spec.support[0], spec.support[1]);
    if f1 > height || f2 > width {
        return Err(Error::Dimension(format!(
            "support {}x{} exceeds grid {}x{}",
            f1, f2, height, width
        )));
    }
    let (r0, c0) = centered_window_origin(height, width, f1, f2);
    let mut rng = SeededRng::new(spec.seed);
    let mut coils = Vec::with_capacity(spec.coils);
    for _ in 0..spec.coils {
        let mut kspace = ComplexGrid::zeros(height, width);
        for dr in 0..f1 {
            for dc in 0..f2 {
                *kspace.at_mut(r0 + dr, c0 + dc) = rng.complex_normal();
            }
        }
        coils.push(ifft2c(&kspace));
    }
    let mut sens = MultiChannelGrid::new(coils)?;
    if spec.normalize {
        let n = sens.num_channels();
        for idx in 0..height * width {
            let sos: f64 = (0..n)
                .map(|i| sens.channel(i).as_slice()[idx].norm_sqr())
                .sum();
            let scale = 1.0 / sos.sqrt();
            for i in 0..n {
                sens.channel_mut(i).as_mut_slice()[idx] *= scale;
            }
        }
    }
    Ok(sens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    /// Independent Bernoulli draw per k-space location.
    #[default]
    Pointwise,
    /// Full readout rows, variable density across phase encodes.
    ReadoutLines,
}

/// Variable-density Cartesian mask spec. Keep probability at radius r is
/// proportional to exp(−r² / (2(σ·r_max)²)), scaled so the expected kept
/// count is total/R. No calibration region is ever forced.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub acceleration: f64,
    #[serde(default = "default_mask_sigma")]
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub kind: MaskKind,
}

fn default_mask_sigma() -> f64 {
    0.25
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.acceleration < 1.0 {
            return Err(Error::InvalidParameter("acceleration must be >= 1".into()));
        }
        if self.sigma <= 0.0 {
            return Err(Error::InvalidParameter("mask sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome details for a generated mask.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MaskStats {
    pub kept: usize,
    pub total: usize,
    pub realized_acceleration: f64,
    /// Set when the density was infeasible and the largest-probability
    /// locations were kept instead of Bernoulli draws.
    pub density_saturated: bool,
}

/// Squared distance of every candidate cell (or line) from the k-space
/// center, plus the max squared radius for normalization.
fn center_sq_distances(h: usize, w: usize, kind: MaskKind) -> (Vec<f64>, f64) {
    let (ch, cw) = ((h / 2) as f64, (w / 2) as f64);
    match kind {
        MaskKind::Pointwise => {
            let mut d = Vec::with_capacity(h * w);
            let mut max = 0.0f64;
            for r in 0..h {
                for c in 0..w {
                    let v = (r as f64 - ch).powi(2) + (c as f64 - cw).powi(2);
                    max = max.max(v);
                    d.push(v);
                }
            }
            (d, max)
        }
        MaskKind::ReadoutLines => {
            let mut d = Vec::with_capacity(h);
            let mut max = 0.0f64;
            for r in 0..h {
                let v = (r as f64 - ch).powi(2);
                max = max.max(v);
                d.push(v);
            }
            (d, max)
        }
    }
}

/// Generate a variable-density mask. Deterministic in (spec, shape).
pub fn make_mask(spec: &MaskSpec, height: usize, width: usize) -> Result<(SamplingMask, MaskStats)> {
    spec.validate()?;
    let total = height * width;
    if spec.acceleration > total as f64 {
        return Err(Error::InvalidParameter(format!(
            "acceleration {} exceeds grid size {}",
            spec.acceleration, total
        )));
    }
    let (dist_sq, max_sq) = center_sq_distances(height, width, spec.kind);
    let n_cells = dist_sq.len();
    let cell_weight = match spec.kind {
        MaskKind::Pointwise => 1.0,
        MaskKind::ReadoutLines => width as f64,
    };
    let target = total as f64 / spec.acceleration / cell_weight;

    // Unnormalized Gaussian density over cells.
    let r_max_sq = max_sq.max(1.0);
    let denom = 2.0 * spec.sigma * spec.sigma * r_max_sq;
    let g: Vec<f64> = dist_sq.iter().map(|&d| (-d / denom).exp()).collect();

    // Solve sum(min(1, scale*g)) = target for the density scale by bisection.
    let expected = |scale: f64| -> f64 { g.iter().map(|&v| (scale * v).min(1.0)).sum() };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let cap = 1e15;
    while expected(hi) < target && hi < cap {
        hi *= 2.0;
    }
    let density_saturated = expected(hi) < target - 0.5;
    let probs: Vec<f64> = if density_saturated {
        Vec::new()
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if expected(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let scale = 0.5 * (lo + hi);
        g.iter().map(|&v| (scale * v).min(1.0)).collect()
    };

    let mut cell_kept = vec![false; n_cells];
    if density_saturated {
        // Keep the largest-density cells outright.
        let mut order: Vec<usize> = (0..n_cells).collect();
        order.sort_by(|&a, &b| g[b].partial_cmp(&g[a]).unwrap().then(a.cmp(&b)));
        for &i in order.iter().take((target.round() as usize).max(1)) {
            cell_kept[i] = true;
        }
    } else {
        let mut rng = SeededRng::new(spec.seed);
        // Signed margin per cell: how close the draw was to flipping.
        let mut margins: Vec<(f64, usize)> = Vec::with_capacity(n_cells);
        for (i, &p) in probs.iter().enumerate() {
            let u = rng.uniform();
            cell_kept[i] = u < p;
            margins.push((p - u, i));
        }
        // Bernoulli totals fluctuate; nudge the closest calls until the
        // realized acceleration sits within 10% of the target.
        let lo_cells = ((target / 1.1).ceil() as usize).max(1);
        let hi_cells = (target * 1.1).floor() as usize;
        let mut kept_cells = cell_kept.iter().filter(|&&k| k).count();
        if kept_cells < lo_cells || kept_cells > hi_cells.max(lo_cells) {
            margins.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let mut add_iter = margins.iter().filter(|(_, i)| !cell_kept[*i]).map(|&(_, i)| i).collect::<Vec<_>>().into_iter();
            while kept_cells < lo_cells {
                let idx = add_iter.next().expect("cells available to add");
                cell_kept[idx] = true;
                kept_cells += 1;
            }
            let mut drop_iter = margins.iter().rev().filter(|(_, i)| cell_kept[*i]).map(|&(_, i)| i).collect::<Vec<_>>().into_iter();
            while kept_cells > hi_cells.max(lo_cells) {
                let idx = drop_iter.next().expect("cells available to drop");
                cell_kept[idx] = false;
                kept_cells -= 1;
            }
        }
        if kept_cells == 0 {
            // Degenerate draw: force the densest cell.
            let best = (0..n_cells)
                .max_by(|&a, &b| g[a].partial_cmp(&g[b]).unwrap().then(b.cmp(&a)))
                .unwrap();
            cell_kept[best] = true;
        }
    }

    let kept: Vec<bool> = match spec.kind {
        MaskKind::Pointwise => cell_kept,
        MaskKind::ReadoutLines => {
            let mut flags = vec![false; total];
            for (r, &keep) in cell_kept.iter().enumerate() {
                if keep {
                    flags[r * width..(r + 1) * width].fill(true);
                }
            }
            flags
        }
    };
    let mask = SamplingMask::new(height, width, kept)?;
    let stats = MaskStats {
        kept: mask.kept_count(),
        total,
        realized_acceleration: mask.acceleration(),
        density_saturated,
    };
    Ok((mask, stats))
}

/// Measurement noise spec: σ per real/imag component at kept locations.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::InvalidParameter("noise sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Simulate the acquisition b_i = A(fft2c(ρ·s_i)) + n_i with complex
/// Gaussian noise drawn at kept locations only.
pub fn acquire(
    image: &ComplexGrid,
    sens: &MultiChannelGrid,
    mask: &SamplingMask,
    noise: &NoiseSpec,
) -> Result<MultiChannelGrid> {
    noise.validate()?;
    if image.shape() != (sens.height(), sens.width()) || image.shape() != mask.shape() {
        return Err(Error::Dimension(format!(
            "image {}x{}, sensitivities {}x{}, mask {}x{} must agree",
            image.height(),
            image.width(),
            sens.height(),
            sens.width(),
            mask.height(),
            mask.width()
        )));
    }
    let coil_ksp = coil_kspace(image, sens)?;
    let mut b = apply_mask(&coil_ksp, mask)?;
    if noise.sigma > 0.0 {
        let mut rng = SeededRng::new(noise.seed);
        for ch in 0..b.num_channels() {
            let grid = b.channel_mut(ch);
            for (v, &keep) in grid.as_mut_slice().iter_mut().zip(mask.kept_flags()) {
                if keep {
                    let (re, im) = rng.normal_pair();
                    *v += Complex64::new(noise.sigma * re, noise.sigma * im);
                }
            }
        }
    }
    Ok(b)
}

/// Full (unmasked, noiseless) coil k-space fft2c(ρ·s_i); the training
/// target and the reference for annihilation checks.
pub fn coil_kspace(image: &ComplexGrid, sens: &MultiChannelGrid) -> Result<MultiChannelGrid> {
    if image.shape() != (sens.height(), sens.width()) {
        return Err(Error::Dimension("image vs sensitivities shape".into()));
    }
    Ok(sens.map(|s| {
        let mut prod = image.clone();
        for (p, sv) in prod.as_mut_slice().iter_mut().zip(s.as_slice()) {
            *p *= sv;
        }
        fft2c(&prod)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big_ellipse(amp: f64) -> Ellipse {
        Ellipse {
            center: [0.0, 0.0],
            semi_axes: [2.0, 2.0],
            rotation: 0.0,
            amplitude: [amp, 0.0],
        }
    }

    #[test]
    fn covering_ellipse_gives_all_ones() {
        let spec = PhantomSpec {
            height: 8,
            width: 8,
            ellipses: vec![big_ellipse(1.0)],
            phase_ramp: [0.0, 0.0],
        };
        let p = make_phantom(&spec).unwrap();
        for v in p.as_slice() {
            assert_eq!(*v, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn outside_all_ellipses_is_exactly_zero() {
        let spec = PhantomSpec {
            height: 16,
            width: 16,
            ellipses: vec![Ellipse {
                center: [0.0, 0.0],
                semi_axes: [0.3, 0.3],
                rotation: 0.0,
                amplitude: [1.0, 0.0],
            }],
            phase_ramp: [0.3, -0.1],
        };
        let p = make_phantom(&spec).unwrap();
        // corner pixels are well outside the r=0.3 disc
        assert_eq!(p.at(0, 0), Complex64::ZERO);
        assert_eq!(p.at(15, 15), Complex64::ZERO);
    }

    #[test]
    fn overlap_sums_amplitudes_per_pointwise_oracle() {
        let e1 = Ellipse {
            center: [-0.2, 0.0],
            semi_axes: [0.5, 0.4],
            rotation: 0.3,
            amplitude: [1.0, 0.0],
        };
        let e2 = Ellipse {
            center: [0.2, 0.1],
            semi_axes: [0.45, 0.5],
            rotation: -0.2,
            amplitude: [0.5, 0.0],
        };
        let spec = PhantomSpec {
            height: 24,
            width: 20,
            ellipses: vec![e1.clone(), e2.clone()],
            phase_ramp: [0.0, 0.0],
        };
        let p = make_phantom(&spec).unwrap();
        let mut overlap_seen = false;
        for r in 0..24 {
            for c in 0..20 {
                let (x, y) = norm_coords(r, c, 24, 20);
                let mut want = 0.0f64;
                if e1.contains(x, y) {
                    want += 1.0;
                }
                if e2.contains(x, y) {
                    want += 0.5;
                }
                if (want - 1.5).abs() < 1e-12 {
                    overlap_seen = true;
                }
                assert!((p.at(r, c).re - want).abs() < 1e-12);
                assert_eq!(p.at(r, c).im, 0.0);
            }
        }
        assert!(overlap_seen, "test geometry should overlap somewhere");
    }

    #[test]
    fn single_coil_dc_support_is_constant() {
        let spec = SensitivitySpec {
            coils: 1,
            support: [1, 1],
            seed: 5,
            normalize: false,
        };
        let s = make_sensitivities(&spec, 8, 8).unwrap();
        let first = s.channel(0).at(0, 0);
        for v in s.channel(0).as_slice() {
            assert!((v - first).norm() < 1e-13);
        }
    }

    #[test]
    fn unnormalized_spectra_vanish_outside_window() {
        let spec = SensitivitySpec {
            coils: 3,
            support: [5, 3],
            seed: 42,
            normalize: false,
        };
        let s = make_sensitivities(&spec, 16, 12).unwrap();
        let (r0, c0) = centered_window_origin(16, 12, 5, 3);
        for i in 0..3 {
            let k = fft2c(s.channel(i));
            for r in 0..16 {
                for c in 0..12 {
                    let inside = (r0..r0 + 5).contains(&r) && (c0..c0 + 3).contains(&c);
                    if !inside {
                        assert!(
                            k.at(r, c).norm() < 1e-13,
                            "leakage at ({}, {}): {}",
                            r,
                            c,
                            k.at(r, c)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn sensitivities_reproducible_from_seed() {
        let spec = SensitivitySpec {
            coils: 2,
            support: [7, 7],
            seed: 42,
            normalize: true,
        };
        let a = make_sensitivities(&spec, 32, 32).unwrap();
        let b = make_sensitivities(&spec, 32, 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sos_normalization_is_flat() {
        let spec = SensitivitySpec {
            coils: 4,
            support: [7, 7],
            seed: 11,
            normalize: true,
        };
        let s = make_sensitivities(&spec, 24, 24).unwrap();
        for idx in 0..24 * 24 {
            let sos: f64 = (0..4)
                .map(|i| s.channel(i).as_slice()[idx].norm_sqr())
                .sum();
            assert!((sos - 1.0).abs() < 1e-10, "sos {} at {}", sos, idx);
        }
    }

    #[test]
    fn window_larger_than_grid_rejected() {
        let spec = SensitivitySpec {
            coils: 1,
            support: [9, 9],
            seed: 0,
            normalize: false,
        };
        assert!(make_sensitivities(&spec, 8, 8).is_err());
    }

    #[test]
    fn unit_acceleration_keeps_everything() {
        let spec = MaskSpec {
            acceleration: 1.0,
            sigma: 0.25,
            seed: 3,
            kind: MaskKind::Pointwise,
        };
        let (m, stats) = make_mask(&spec, 12, 10).unwrap();
        assert_eq!(m.kept_count(), 120);
        assert!((stats.realized_acceleration - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kept_count_near_target() {
        let spec = MaskSpec {
            acceleration: 4.0,
            sigma: 0.25,
            seed: 7,
            kind: MaskKind::Pointwise,
        };
        let (m, stats) = make_mask(&spec, 64, 64).unwrap();
        assert!(
            (924..=1124).contains(&m.kept_count()),
            "kept {} outside 1024 +/- 10%",
            m.kept_count()
        );
        assert!(!stats.density_saturated);
    }

    #[test]
    fn masks_are_deterministic() {
        let spec = MaskSpec {
            acceleration: 3.0,
            sigma: 0.3,
            seed: 21,
            kind: MaskKind::Pointwise,
        };
        let (a, _) = make_mask(&spec, 32, 32).unwrap();
        let (b, _) = make_mask(&spec, 32, 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn acceleration_pinned_within_ten_percent() {
        for seed in 0..20 {
            let spec = MaskSpec {
                acceleration: 6.0,
                sigma: 0.2,
                seed,
                kind: MaskKind::Pointwise,
            };
            let (m, _) = make_mask(&spec, 32, 32).unwrap();
            let r = m.acceleration();
            assert!(
                (6.0 / 1.1..=6.0 * 1.1).contains(&r),
                "seed {}: acceleration {}",
                seed,
                r
            );
        }
    }

    #[test]
    fn readout_lines_keep_full_rows() {
        let spec = MaskSpec {
            acceleration: 2.0,
            sigma: 0.3,
            seed: 9,
            kind: MaskKind::ReadoutLines,
        };
        let (m, _) = make_mask(&spec, 32, 16).unwrap();
        for r in 0..32 {
            let row: Vec<bool> = (0..16).map(|c| m.is_kept(r, c)).collect();
            assert!(row.iter().all(|&k| k) || row.iter().all(|&k| !k));
        }
        let rows_kept = (0..32).filter(|&r| m.is_kept(r, 0)).count();
        // 16 rows expected at R=2, 10% band
        assert!((14..=18).contains(&rows_kept), "{} rows", rows_kept);
    }

    #[test]
    fn acquire_reduces_to_fft_on_trivial_setup() {
        let spec = PhantomSpec {
            height: 8,
            width: 8,
            ellipses: vec![big_ellipse(1.0)],
            phase_ramp: [0.1, 0.2],
        };
        let rho = make_phantom(&spec).unwrap();
        let ones =
            ComplexGrid::from_vec(8, 8, vec![Complex64::new(1.0, 0.0); 64]).unwrap();
        let sens = MultiChannelGrid::new(vec![ones]).unwrap();
        let mask = SamplingMask::full(8, 8);
        let noise = NoiseSpec { sigma: 0.0, seed: 0 };
        let b = acquire(&rho, &sens, &mask, &noise).unwrap();
        let want = fft2c(&rho);
        for (x, y) in b.channel(0).as_slice().iter().zip(want.as_slice()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn acquire_is_zero_off_mask() {
        let spec = MaskSpec {
            acceleration: 2.0,
            sigma: 0.25,
            seed: 13,
            kind: MaskKind::Pointwise,
        };
        let (mask, _) = make_mask(&spec, 16, 16).unwrap();
        let rho = make_phantom(&PhantomSpec::head_preset(16, 16)).unwrap();
        let sens = make_sensitivities(
            &SensitivitySpec {
                coils: 2,
                support: [5, 5],
                seed: 2,
                normalize: true,
            },
            16,
            16,
        )
        .unwrap();
        let b = acquire(&rho, &sens, &mask, &NoiseSpec { sigma: 0.01, seed: 4 }).unwrap();
        for ch in 0..2 {
            for r in 0..16 {
                for c in 0..16 {
                    if !mask.is_kept(r, c) {
                        assert_eq!(b.channel(ch).at(r, c), Complex64::ZERO);
                    }
                }
            }
        }
    }

    #[test]
    fn noise_variance_matches_spec() {
        let rho = make_phantom(&PhantomSpec::head_preset(64, 64)).unwrap();
        let sens = make_sensitivities(
            &SensitivitySpec {
                coils: 2,
                support: [7, 7],
                seed: 8,
                normalize: true,
            },
            64,
            64,
        )
        .unwrap();
        let mask = SamplingMask::full(64, 64);
        let sigma = 0.01;
        let clean = acquire(&rho, &sens, &mask, &NoiseSpec { sigma: 0.0, seed: 0 }).unwrap();
        let noisy = acquire(&rho, &sens, &mask, &NoiseSpec { sigma, seed: 77 }).unwrap();
        let mut sum_sq = 0.0;
        let mut n = 0usize;
        for ch in 0..2 {
            for (a, b) in noisy
                .channel(ch)
                .as_slice()
                .iter()
                .zip(clean.channel(ch).as_slice())
            {
                let d = a - b;
                sum_sq += d.re * d.re + d.im * d.im;
                n += 2;
            }
        }
        assert!(n >= 2 * 4096, "need >= 4096 kept complex samples");
        let var = sum_sq / n as f64;
        let rel = (var - sigma * sigma).abs() / (sigma * sigma);
        assert!(rel < 0.2, "variance off by {}", rel);
    }

    #[test]
    fn annihilation_holds_for_bandlimited_coils() {
        // valid-convolution cross-check of coil k-spaces against the
        // windowed sensitivity spectra, straight from the acquisition
        // model; naive double-loop convolution.
        let (h, w, f) = (24usize, 24usize, 5usize);
        let rho = make_phantom(&PhantomSpec::head_preset(h, w)).unwrap();
        let sens = make_sensitivities(
            &SensitivitySpec {
                coils: 3,
                support: [f, f],
                seed: 31,
                normalize: false,
            },
            h,
            w,
        )
        .unwrap();
        let ksp = coil_kspace(&rho, &sens).unwrap();
        let (r0, c0) = centered_window_origin(h, w, f, f);
        let window = |i: usize| -> Vec<Complex64> {
            let k = fft2c(sens.channel(i));
            let mut taps = Vec::with_capacity(f * f);
            for dr in 0..f {
                for dc in 0..f {
                    taps.push(k.at(r0 + dr, c0 + dc));
                }
            }
            taps
        };
        let valid_conv = |x: &ComplexGrid, taps: &[Complex64]| -> Vec<Complex64> {
            let mut out = Vec::new();
            for a in 0..=(h - f) {
                for b in 0..=(w - f) {
                    let mut acc = Complex64::ZERO;
                    for p in 0..f {
                        for q in 0..f {
                            acc += x.at(a + f - 1 - p, b + f - 1 - q) * taps[p * f + q];
                        }
                    }
                    out.push(acc);
                }
            }
            out
        };
        let scale = ksp.max_abs();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let ci = valid_conv(ksp.channel(i), &window(j));
                let cj = valid_conv(ksp.channel(j), &window(i));
                let worst = ci
                    .iter()
                    .zip(cj.iter())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(
                    worst < 1e-9 * scale,
                    "pair ({}, {}): residual {} vs scale {}",
                    i,
                    j,
                    worst,
                    scale
                );
            }
        }
    }
}
