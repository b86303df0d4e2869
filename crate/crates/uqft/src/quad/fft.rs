//! Centered three-dimensional Fourier sums on uniform grids.
//!
//! Given samples `g[j] = g(p⃗_j)` on the product grid
//! `p_j = p₀ + j·Δp` (the same step and point count on every axis, but an
//! arbitrary per-axis origin `p₀`), [`CenteredFft::transform`] computes
//!
//! ```text
//! h(u⃗_l) = Δp³ · Σ_j g(p⃗_j) e^{−i p⃗_j · u⃗_l},   u_l = (l − N/2) Δu,
//! ```
//!
//! the Riemann approximation of `∫ d³p g(p⃗) e^{−i p⃗·u⃗}`, with the conjugate
//! step fixed by `Δp·Δu = 2π/N`. The arbitrary origins reduce to pre- and
//! post-multiplied separable phases around a standard in-order FFT, so the
//! cost is three passes of one-dimensional FFTs.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Planned centered FFT for an `N×N×N` grid.
pub struct CenteredFft {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl CenteredFft {
    /// Plans transforms for the given per-axis point count.
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        CenteredFft { n, fft }
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// In-place centered transform of row-major samples (`data[x][y][z]`
    /// flattened, length `N³`). `dp` and `du` are the conjugate steps
    /// (`dp·du = 2π/N`), `p0` the per-axis momentum origins. On return,
    /// `data[l]` holds `h(u⃗_l)` with `u_l = (l − N/2)·du` per axis.
    pub fn transform(&self, data: &mut [Complex64], dp: f64, du: f64, p0: [f64; 3]) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "sample buffer must hold N^3 points");
        let u_start = -((n / 2) as f64) * du;

        // Pre-phase e^{−i j Δp u_start} along every axis (identical tables
        // since step and origin of the u-grid are shared by the axes).
        let pre: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, -(j as f64) * dp * u_start))
            .collect();
        for (ix, vx) in pre.iter().enumerate() {
            for (iy, vy) in pre.iter().enumerate() {
                let row = (ix * n + iy) * n;
                let fxy = vx * vy;
                for (iz, vz) in pre.iter().enumerate() {
                    data[row + iz] *= fxy * vz;
                }
            }
        }

        // FFT along z (contiguous), then y and x through gather/scatter.
        for chunk in data.chunks_exact_mut(n) {
            self.fft.process(chunk);
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        for ix in 0..n {
            for iz in 0..n {
                for iy in 0..n {
                    scratch[iy] = data[(ix * n + iy) * n + iz];
                }
                self.fft.process(&mut scratch);
                for iy in 0..n {
                    data[(ix * n + iy) * n + iz] = scratch[iy];
                }
            }
        }
        for iy in 0..n {
            for iz in 0..n {
                for ix in 0..n {
                    scratch[ix] = data[(ix * n + iy) * n + iz];
                }
                self.fft.process(&mut scratch);
                for ix in 0..n {
                    data[(ix * n + iy) * n + iz] = scratch[ix];
                }
            }
        }

        // Post-phase e^{−i p0 · u_l} per axis and the measure Δp³.
        let vol = dp * dp * dp;
        let post = |origin: f64| -> Vec<Complex64> {
            (0..n)
                .map(|l| {
                    let u = u_start + du * l as f64;
                    Complex64::from_polar(1.0, -origin * u)
                })
                .collect::<Vec<_>>()
        };
        let (px, py, pz) = (post(p0[0]), post(p0[1]), post(p0[2]));
        for (lx, vx) in px.iter().enumerate() {
            for (ly, vy) in py.iter().enumerate() {
                let row = (lx * n + ly) * n;
                let fxy = vx * vy * vol;
                for (lz, vz) in pz.iter().enumerate() {
                    data[row + lz] *= fxy * vz;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(N⁶) evaluation of the same centered sum.
    fn direct_sum(
        samples: &[Complex64],
        n: usize,
        dp: f64,
        du: f64,
        p0: [f64; 3],
    ) -> Vec<Complex64> {
        let u = |l: usize| (l as f64 - (n / 2) as f64) * du;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n * n];
        for lx in 0..n {
            for ly in 0..n {
                for lz in 0..n {
                    let ul = [u(lx), u(ly), u(lz)];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for jx in 0..n {
                        for jy in 0..n {
                            for jz in 0..n {
                                let p = [
                                    p0[0] + dp * jx as f64,
                                    p0[1] + dp * jy as f64,
                                    p0[2] + dp * jz as f64,
                                ];
                                let phase = -(p[0] * ul[0] + p[1] * ul[1] + p[2] * ul[2]);
                                acc += samples[(jx * n + jy) * n + jz]
                                    * Complex64::from_polar(1.0, phase);
                            }
                        }
                    }
                    out[(lx * n + ly) * n + lz] = acc * dp * dp * dp;
                }
            }
        }
        out
    }

    #[test]
    fn centered_fft_matches_the_direct_sum_on_random_data() {
        let n = 8;
        let dp = 0.37;
        let du = 2.0 * std::f64::consts::PI / (n as f64 * dp);
        let p0 = [-1.3, 0.4, -0.9];
        // Deterministic pseudo-random samples (no RNG dependency needed).
        let mut samples = Vec::with_capacity(n * n * n);
        let mut state = 0x243f_6a88_85a3_08d3_u64;
        for _ in 0..n * n * n {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            samples.push(Complex64::new(a, b));
        }
        let expect = direct_sum(&samples, n, dp, du, p0);
        let fft = CenteredFft::new(n);
        let mut got = samples;
        fft.transform(&mut got, dp, du, p0);
        let mut worst = 0.0f64;
        for (g, e) in got.iter().zip(expect.iter()) {
            worst = worst.max((g - e).norm());
        }
        assert!(worst < 1e-10, "centered FFT deviates from direct sum by {worst:.3e}");
    }

    #[test]
    fn centered_fft_reproduces_the_analytic_gaussian_transform() {
        // ∫ d³p e^{−L²(p−q)²} e^{−i p·u} = (√π/L)³ e^{−i q·u} e^{−u²/(4L²)}.
        let n = 64;
        let l = 2.0;
        let q = [0.45, -0.2, 0.1];
        let halfspan = 14.0 / l;
        let dp = 2.0 * halfspan / n as f64;
        let du = 2.0 * std::f64::consts::PI / (n as f64 * dp);
        let p0 = [
            q[0] - 0.5 * (n as f64 - 1.0) * dp,
            q[1] - 0.5 * (n as f64 - 1.0) * dp,
            q[2] - 0.5 * (n as f64 - 1.0) * dp,
        ];
        let mut samples = Vec::with_capacity(n * n * n);
        for jx in 0..n {
            for jy in 0..n {
                for jz in 0..n {
                    let p = [p0[0] + dp * jx as f64, p0[1] + dp * jy as f64, p0[2] + dp * jz as f64];
                    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                    samples.push(Complex64::new((-l * l * d2).exp(), 0.0));
                }
            }
        }
        let fft = CenteredFft::new(n);
        fft.transform(&mut samples, dp, du, p0);
        let u = |idx: usize| (idx as f64 - (n / 2) as f64) * du;
        let amp = (std::f64::consts::PI.sqrt() / l).powi(3);
        let mut worst = 0.0f64;
        // Check interior points where the Gaussian is non-negligible.
        for lx in n / 2 - 4..n / 2 + 5 {
            for ly in n / 2 - 4..n / 2 + 5 {
                for lz in n / 2 - 4..n / 2 + 5 {
                    let uu = [u(lx), u(ly), u(lz)];
                    let u2 = uu[0] * uu[0] + uu[1] * uu[1] + uu[2] * uu[2];
                    let phase = -(q[0] * uu[0] + q[1] * uu[1] + q[2] * uu[2]);
                    let expect =
                        Complex64::from_polar(amp * (-u2 / (4.0 * l * l)).exp(), phase);
                    let got = samples[(lx * n + ly) * n + lz];
                    let rel = (got - expect).norm() / expect.norm();
                    worst = worst.max(rel);
                }
            }
        }
        assert!(worst < 1e-10, "Gaussian transform off by relative {worst:.3e}");
    }
}
