//! `Λψ₂` from the singular quadrature against an independent spectral
//! evaluation: the square root of the 5-point Laplacian on a padded
//! periodic lattice, applied through its Fourier eigenvalues.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use sqgo_core::fraclap::lambda_psi2_at;
use sqgo_core::green::ObstacleGeometry;
use sqgo_core::motion::{motion_eval, psi2_eval, FrameSnapshot, RigidMotionSpec, Trajectory};
use sqgo_core::Vec2;

const N: usize = 256;
const HALF_WIDTH: f64 = 8.0;
const CUTOFF: f64 = 0.5;

fn fft_2d(data: &mut [Complex<f64>], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(N) } else { planner.plan_fft_forward(N) };
    for row in data.chunks_mut(N) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); N];
    for j in 0..N {
        for i in 0..N {
            col[i] = data[i * N + j];
        }
        fft.process(&mut col);
        for i in 0..N {
            data[i * N + j] = col[i];
        }
    }
}

fn lattice_point(i: usize, j: usize) -> Vec2 {
    let h = 2.0 * HALF_WIDTH / N as f64;
    Vec2::new(-HALF_WIDTH + i as f64 * h, -HALF_WIDTH + j as f64 * h)
}

/// Spectral `Λu` on the whole periodic lattice.
fn periodic_half_laplacian(u: impl Fn(Vec2) -> f64) -> Vec<f64> {
    let h = 2.0 * HALF_WIDTH / N as f64;
    let mut data: Vec<Complex<f64>> =
        (0..N * N).map(|idx| Complex::new(u(lattice_point(idx / N, idx % N)), 0.0)).collect();
    fft_2d(&mut data, false);
    let s2: Vec<f64> = (0..N).map(|k| (std::f64::consts::PI * k as f64 / N as f64).sin().powi(2)).collect();
    for i in 0..N {
        for j in 0..N {
            data[i * N + j] *= (4.0 / (h * h) * (s2[i] + s2[j])).sqrt();
        }
    }
    fft_2d(&mut data, true);
    data.iter().map(|z| z.re / (N * N) as f64).collect()
}

fn relative_l2(snap: &FrameSnapshot) -> f64 {
    let geom = ObstacleGeometry::new(1.0).unwrap();
    let reference = periodic_half_laplacian(|y| psi2_eval(snap, y, &geom, CUTOFF));
    let (mut num, mut den) = (0.0, 0.0);
    let c = N / 2;
    let mut count = 0;
    for i in c - 32..c + 32 {
        for j in c - 32..c + 32 {
            let p = lattice_point(i, j);
            if p.norm() <= geom.radius() {
                continue;
            }
            count += 1;
            if count % 7 != 0 {
                continue;
            }
            let q = lambda_psi2_at(snap, p, &geom, CUTOFF);
            let o = reference[i * N + j];
            num += (q - o) * (q - o);
            den += o * o;
        }
    }
    (num / den).sqrt()
}

#[test]
fn spin_profile_matches_spectral_oracle() {
    let snap = motion_eval(&RigidMotionSpec::spin(1.0), 0.0).unwrap();
    let err = relative_l2(&snap);
    assert!(err <= 0.03, "relative L2 {err}");
}

#[test]
fn translation_profile_matches_spectral_oracle() {
    let mut spec = RigidMotionSpec::stationary();
    spec.center_y = Trajectory::constant_rate(1.0);
    let snap = motion_eval(&spec, 0.0).unwrap();
    let err = relative_l2(&snap);
    assert!(err <= 0.03, "relative L2 {err}");
}
