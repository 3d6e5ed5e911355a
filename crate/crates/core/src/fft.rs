//! Centered orthonormal 2D Fourier transforms.
//!
//! Convention: DC sits at index (⌊H/2⌋, ⌊W/2⌋) in both domains, and both
//! directions carry a 1/√(HW) scale, so the pair is unitary and
//! `ifft2c(fft2c(x)) = x`. Realized as shift–transform–shift.

use crate::grid::{ComplexGrid, MultiChannelGrid};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn rustfft::Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// out[j] = in[(j + ⌊n/2⌋) mod n] per axis: moves the centered DC to index 0.
fn ifftshift2(x: &ComplexGrid) -> ComplexGrid {
    let (h, w) = x.shape();
    let (sh, sw) = (h / 2, w / 2);
    let mut out = ComplexGrid::zeros(h, w);
    for r in 0..h {
        let src_r = (r + sh) % h;
        for c in 0..w {
            *out.at_mut(r, c) = x.at(src_r, (c + sw) % w);
        }
    }
    out
}

/// out[(j + ⌊n/2⌋) mod n] = in[j] per axis: moves index 0 back to the center.
fn fftshift2(x: &ComplexGrid) -> ComplexGrid {
    let (h, w) = x.shape();
    let (sh, sw) = (h / 2, w / 2);
    let mut out = ComplexGrid::zeros(h, w);
    for r in 0..h {
        let dst_r = (r + sh) % h;
        for c in 0..w {
            *out.at_mut(dst_r, (c + sw) % w) = x.at(r, c);
        }
    }
    out
}

/// Unnormalized separable 2D DFT over a row-major buffer, in place.
fn fft2_raw(data: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    // Rows are contiguous: one batched pass.
    let row_fft = plan(w, inverse);
    row_fft.process(data);
    // Columns via gather/scatter.
    let col_fft = plan(h, inverse);
    let mut col = vec![Complex64::ZERO; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = data[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            data[r * w + c] = col[r];
        }
    }
}

fn transform(x: &ComplexGrid, inverse: bool) -> ComplexGrid {
    let (h, w) = x.shape();
    let mut shifted = ifftshift2(x);
    fft2_raw(shifted.as_mut_slice(), h, w, inverse);
    let mut out = fftshift2(&shifted);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    for v in out.as_mut_slice() {
        *v *= scale;
    }
    out
}

/// Centered orthonormal forward 2D DFT.
pub fn fft2c(x: &ComplexGrid) -> ComplexGrid {
    transform(x, false)
}

/// Centered orthonormal inverse 2D DFT; exact inverse of [`fft2c`].
pub fn ifft2c(x: &ComplexGrid) -> ComplexGrid {
    transform(x, true)
}

/// [`fft2c`] applied independently per channel.
pub fn fft2c_multi(x: &MultiChannelGrid) -> MultiChannelGrid {
    x.map(fft2c)
}

/// [`ifft2c`] applied independently per channel.
pub fn ifft2c_multi(x: &MultiChannelGrid) -> MultiChannelGrid {
    x.map(ifft2c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_grid(h: usize, w: usize, seed: u64) -> ComplexGrid {
        let mut rng = SeededRng::new(seed);
        let data = (0..h * w).map(|_| rng.complex_normal()).collect();
        ComplexGrid::from_vec(h, w, data).unwrap()
    }

    /// Direct O(N^2) centered DFT: the summation oracle the implementation
    /// must match. Kept independent of the shift/rustfft path.
    fn dft2c_oracle(x: &ComplexGrid, inverse: bool) -> ComplexGrid {
        let (h, w) = x.shape();
        let (ch, cw) = ((h / 2) as isize, (w / 2) as isize);
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut out = ComplexGrid::zeros(h, w);
        for k1 in 0..h as isize {
            for k2 in 0..w as isize {
                let mut acc = Complex64::ZERO;
                for n1 in 0..h as isize {
                    for n2 in 0..w as isize {
                        let phase = sign
                            * 2.0
                            * std::f64::consts::PI
                            * (((k1 - ch) * (n1 - ch)) as f64 / h as f64
                                + ((k2 - cw) * (n2 - cw)) as f64 / w as f64);
                        acc += x.at(n1 as usize, n2 as usize)
                            * Complex64::new(phase.cos(), phase.sin());
                    }
                }
                *out.at_mut(k1 as usize, k2 as usize) =
                    acc / ((h * w) as f64).sqrt();
            }
        }
        out
    }

    fn assert_close(a: &ComplexGrid, b: &ComplexGrid, tol: f64) {
        let scale = b.norm().max(1.0);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!(
                (x - y).norm() <= tol * scale,
                "mismatch: {} vs {} (tol {})",
                x,
                y,
                tol
            );
        }
    }

    #[test]
    fn centered_delta_becomes_flat_quarter() {
        let mut x = ComplexGrid::zeros(4, 4);
        *x.at_mut(2, 2) = Complex64::new(1.0, 0.0);
        let y = fft2c(&x);
        for v in y.as_slice() {
            assert!((v - Complex64::new(0.25, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_becomes_centered_delta() {
        let c = Complex64::new(0.3, -1.2);
        let mut x = ComplexGrid::zeros(6, 5);
        for v in x.as_mut_slice() {
            *v = c;
        }
        let y = ifft2c(&x);
        let expect = c * (30.0f64).sqrt();
        for r in 0..6 {
            for c2 in 0..5 {
                let want = if (r, c2) == (3, 2) { expect } else { Complex64::ZERO };
                assert!((y.at(r, c2) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn roundtrip_identity_even_and_odd() {
        for &(h, w) in &[(1usize, 1usize), (2, 3), (5, 5), (8, 8), (7, 12)] {
            let x = random_grid(h, w, 17 + (h * 100 + w) as u64);
            let y = ifft2c(&fft2c(&x));
            let z = fft2c(&ifft2c(&x));
            assert!(sub_norm(&y, &x) < 1e-12 * x.norm().max(1.0));
            assert!(sub_norm(&z, &x) < 1e-12 * x.norm().max(1.0));
        }
    }

    fn sub_norm(a: &ComplexGrid, b: &ComplexGrid) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn two_by_two_matches_summation_oracle() {
        let x = ComplexGrid::from_vec(
            2,
            2,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(3.0, 0.0),
                Complex64::new(4.0, 0.0),
            ],
        )
        .unwrap();
        let got = fft2c(&x);
        let want = dft2c_oracle(&x, false);
        assert_close(&got, &want, 1e-14);
    }

    #[test]
    fn random_grids_match_summation_oracle_both_directions() {
        for &(h, w) in &[(3usize, 3usize), (4, 6), (5, 2)] {
            let x = random_grid(h, w, 99 + (h * 10 + w) as u64);
            assert_close(&fft2c(&x), &dft2c_oracle(&x, false), 1e-13);
            assert_close(&ifft2c(&x), &dft2c_oracle(&x, true), 1e-13);
        }
    }

    #[test]
    fn parseval_across_shapes() {
        for h in 1..=16 {
            for w in 1..=16 {
                let x = random_grid(h, w, (h * 64 + w) as u64);
                let y = fft2c(&x);
                let rel = (y.norm() - x.norm()).abs() / x.norm();
                assert!(rel < 1e-12, "Parseval failed at {}x{}: rel {}", h, w, rel);
            }
        }
        // spot-check the larger end of the contracted range
        for &(h, w) in &[(33usize, 64usize), (64, 64), (64, 1), (1, 64), (63, 63)] {
            let x = random_grid(h, w, (h * 1000 + w) as u64);
            let y = fft2c(&x);
            let rel = (y.norm() - x.norm()).abs() / x.norm();
            assert!(rel < 1e-12, "Parseval failed at {}x{}: rel {}", h, w, rel);
        }
    }

    #[test]
    fn one_by_one_is_identity() {
        let x = ComplexGrid::from_vec(1, 1, vec![Complex64::new(-2.5, 0.75)]).unwrap();
        assert_eq!(fft2c(&x).at(0, 0), x.at(0, 0));
        assert_eq!(ifft2c(&x).at(0, 0), x.at(0, 0));
    }
}
