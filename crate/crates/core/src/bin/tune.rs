// scratch tuning harness; not part of the deliverable
use num_complex::Complex64;
use pmri::fft::ifft2c_multi;
use pmri::grid::{ComplexGrid, MultiChannelGrid, SamplingMask};
use pmri::pslr::{pslr_reconstruct, EpsSchedule, PslrConfig};
use pmri::sim::*;

fn sos(x: &MultiChannelGrid) -> Vec<f64> {
    let n = x.height() * x.width();
    (0..n)
        .map(|i| {
            (0..x.num_channels())
                .map(|c| x.channel(c).as_slice()[i].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn snr_vs(gt: &[f64], rec: &[f64]) -> f64 {
    let num: f64 = gt.iter().map(|v| v * v).sum::<f64>().sqrt();
    let den: f64 = gt
        .iter()
        .zip(rec)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    20.0 * (num / den).log10()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lam: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1e-9);
    let beta_ratio: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100.0);
    let floor: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-9);
    let iters: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(30);
    let accel: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(2.0);

    let (h, w, n) = (64usize, 64usize, 4usize);
    let rho = make_phantom(&PhantomSpec::head_preset(h, w)).unwrap();
    let sens = make_sensitivities(
        &SensitivitySpec {
            coils: n,
            support: [7, 7],
            seed: 42,
            normalize: true,
        },
        h,
        w,
    )
    .unwrap();
    let (mask, stats) = make_mask(
        &MaskSpec {
            acceleration: accel,
            sigma: 0.25,
            seed: 7,
            kind: MaskKind::Pointwise,
        },
        h,
        w,
    )
    .unwrap();
    println!("mask kept {} / {} (R = {:.3})", stats.kept, stats.total, stats.realized_acceleration);
    let b = acquire(&rho, &sens, &mask, &NoiseSpec { sigma: 0.0, seed: 0 }).unwrap();

    let gt_img: Vec<f64> = rho.as_slice().iter().map(|v| v.norm()).collect();
    let zf_img = sos(&ifft2c_multi(&b));
    let zf_snr = snr_vs(&gt_img, &zf_img);
    println!("zero-filled SNR: {:.3} dB", zf_snr);

    let cfg = PslrConfig {
        filter: [7, 7],
        lambda: lam,
        beta: lam * beta_ratio,
        eps: EpsSchedule {
            initial: None,
            decay: 0.5,
            floor_ratio: floor,
        },
        max_outer: iters,
        tol: 1e-7,
    };
    let t0 = std::time::Instant::now();
    let (x, trace) = pslr_reconstruct(&b, &mask, &cfg).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let rec_img = sos(&ifft2c_multi(&x));
    let snr = snr_vs(&gt_img, &rec_img);
    println!(
        "pslr SNR: {:.3} dB (gain {:+.3} dB), {} iters, {:.1}s total",
        snr,
        snr - zf_snr,
        trace.iterations.len(),
        dt
    );
    let mut worst_up: f64 = 0.0;
    for win in trace.iterations.windows(2) {
        let up = (win[1].cost_total - win[0].cost_total) / win[0].cost_total.max(1e-300);
        worst_up = worst_up.max(up);
    }
    println!("worst relative cost increase: {:.3e}", worst_up);
    for r in &trace.iterations {
        println!(
            "  it {:2}: eps {:.3e} cost {:.6e} (data {:.3e}, nuc {:.3e}) dx {:.3e} {:.2}s",
            r.iteration, r.eps, r.cost_total, r.cost_data, r.cost_nuclear, r.rel_change, r.seconds
        );
    }
    // keep the compiler from dropping rho-based values
    let _ = Complex64::ZERO;
    let _ = ComplexGrid::zeros(1, 1);
    let _ = SamplingMask::full(2, 2);
}
