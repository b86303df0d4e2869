//! Single-particle shell transforms.
//!
//! For a slot value `v(σ, p⃗)` supported on frequency sheet `σ`, the shell
//! transform is
//!
//! ```text
//! h(υ, u⃗) = ∫ d³p/(2ω(p⃗)) e^{i(σ ω(p⃗) υ − p⃗·u⃗)} v(σ, p⃗),
//! ```
//!
//! sampled here on a uniform position grid by a centered FFT for each
//! relative-time slice. For a lifted label the `2ω` lift cancels the shell
//! Jacobian, so the transform is the free evolution of the bare profile.
//!
//! Conventions fixed by this module (and relied on by the contraction
//! integral): the spatial phase is `e^{−i p⃗·u⃗}` on both sheets, so
//! multiplying a product of transforms over `(υ, u⃗)` and integrating
//! reproduces `δ(Σ_j σ_j ω_j) δ³(Σ_j p⃗_j)`; a spatial translation of the
//! packet by `d⃗` shifts the position argument to `u⃗ + d⃗`; and the starred
//! transform on the negative sheet is the pointwise conjugate of the plain
//! transform on the positive sheet.

use super::{
    slot_momentum_peak, slot_vanishes_on, CenteredFft, Grid1, QuadConfig, QuadError,
};
use num_complex::Complex64;
use rayon::prelude::*;
use uqft_core::algebra::{GaussianPacket, Kinematics, Slot};

/// Shell-transform samples of one packet on one frequency sheet.
#[derive(Clone, Debug)]
pub struct ShellTransform {
    /// Frequency sheet: `+1` transforms the plain label, `−1` the starred
    /// label (supported on the negative sheet).
    pub sign: i8,
    /// Relative-time grid.
    pub upsilon: Grid1,
    /// Points per position axis.
    pub n: usize,
    /// Position step (common to the three axes, grid centred on zero).
    pub du: f64,
    /// Momentum step used to produce the samples.
    pub dp: f64,
    /// Momentum origin per axis.
    pub p0: [f64; 3],
    /// Row-major samples `[υ][x][y][z]`, length `upsilon.n · n³`.
    pub samples: Vec<Complex64>,
}

impl ShellTransform {
    /// Position coordinate of index `l` on any axis.
    pub fn u_coord(&self, l: usize) -> f64 {
        (l as f64 - (self.n / 2) as f64) * self.du
    }

    /// Sample at relative-time index `it` and position indices `(ix, iy, iz)`.
    pub fn at(&self, it: usize, ix: usize, iy: usize, iz: usize) -> Complex64 {
        self.samples[((it * self.n + ix) * self.n + iy) * self.n + iz]
    }
}

/// Momentum origin placing the slot's envelope peak at the half-integer
/// centre of an `n`-point grid. The half-integer choice makes the point set
/// of a starred slot's grid the exact reflection of the plain slot's grid,
/// which keeps conjugate-pair identities exact at the sample level.
pub fn centred_origin(peak: &[f64; 3], n: usize, dp: f64) -> [f64; 3] {
    let off = 0.5 * (n as f64 - 1.0) * dp;
    [peak[0] - off, peak[1] - off, peak[2] - off]
}

/// One relative-time slice of the shell transform of `slot` on `sheet`,
/// as position samples on the centered grid fixed by `(n, dp, p0)`.
pub fn shell_slice(
    slot: &Slot,
    sheet: i8,
    upsilon: f64,
    n: usize,
    dp: f64,
    p0: [f64; 3],
    fft: &CenteredFft,
    kin: &Kinematics,
) -> Vec<Complex64> {
    let du = 2.0 * std::f64::consts::PI / (n as f64 * dp);
    let mut data = vec![Complex64::new(0.0, 0.0); n * n * n];
    if slot_vanishes_on(slot, sheet) {
        return data;
    }
    let sig = f64::from(sheet);
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let p = [
                    p0[0] + dp * ix as f64,
                    p0[1] + dp * iy as f64,
                    p0[2] + dp * iz as f64,
                ];
                let omega = kin.omega(&p);
                let v = slot.on_shell_value(kin, sheet, &p);
                data[(ix * n + iy) * n + iz] =
                    v * Complex64::from_polar(1.0, sig * omega * upsilon) / (2.0 * omega);
            }
        }
    }
    fft.transform(&mut data, dp, du, p0);
    data
}

/// The full shell transform of a packet on one sheet, sampled over the
/// configured relative-time and position grids.
///
/// `sign = +1` transforms the plain label; `sign = −1` transforms the
/// starred label, whose support is the negative sheet.
pub fn shell_transform(
    packet: &GaussianPacket,
    sign: i8,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<ShellTransform, QuadError> {
    if sign != 1 && sign != -1 {
        return Err(QuadError::Config("sign must be +1 or -1"));
    }
    let slot = if sign > 0 {
        Slot::plain(packet.clone())
    } else {
        Slot { packet: packet.clone(), starred: true }
    };
    let n = cfg.momentum_points;
    let halfspan = cfg.momentum_halfspan_widths / packet.width;
    let needed = 6.0 / packet.width;
    if halfspan < needed {
        return Err(QuadError::GridCoverage { extent: halfspan, needed });
    }
    let dp = 2.0 * halfspan / n as f64;
    let du = 2.0 * std::f64::consts::PI / (n as f64 * dp);
    let peak = slot_momentum_peak(&slot, kin, sign);
    let p0 = centred_origin(&peak, n, dp);
    let upsilon = Grid1::symmetric(
        cfg.upsilon_step_mass / kin.mass(),
        cfg.upsilon_halfspan_mass / kin.mass(),
    );
    let fft = CenteredFft::new(n);
    let slices: Vec<Vec<Complex64>> = (0..upsilon.n)
        .into_par_iter()
        .map(|it| shell_slice(&slot, sign, upsilon.point(it), n, dp, p0, &fft, kin))
        .collect();
    let mut samples = Vec::with_capacity(upsilon.n * n * n * n);
    for slice in slices {
        samples.extend_from_slice(&slice);
    }
    Ok(ShellTransform { sign, upsilon, n, du, dp, p0, samples })
}

/// Pointwise cross-check of the shell transform: the defining momentum
/// integral at a single `(υ, u⃗)`, evaluated with Gauss–Hermite nodes
/// centred on the slot's envelope.
pub fn pointwise_shell_value(
    slot: &Slot,
    sheet: i8,
    upsilon: f64,
    u: &[f64; 3],
    kin: &Kinematics,
    nodes_per_axis: usize,
) -> Complex64 {
    if slot_vanishes_on(slot, sheet) {
        return Complex64::new(0.0, 0.0);
    }
    let peak = slot_momentum_peak(slot, kin, sheet);
    let width = slot.packet.width;
    let scale = 1.0 / width; // envelope e^{−L²(p−peak)²} has std 1/(L√2)
    let (nodes, weights) = super::gauss_hermite(nodes_per_axis);
    let boosted: Vec<f64> =
        weights.iter().zip(nodes.iter()).map(|(w, x)| w * (x * x).exp()).collect();
    let sig = f64::from(sheet);
    let mut acc = Complex64::new(0.0, 0.0);
    for (xi, wi) in nodes.iter().zip(boosted.iter()) {
        for (xj, wj) in nodes.iter().zip(boosted.iter()) {
            for (xk, wk) in nodes.iter().zip(boosted.iter()) {
                let p = [peak[0] + scale * xi, peak[1] + scale * xj, peak[2] + scale * xk];
                let omega = kin.omega(&p);
                let phase = sig * omega * upsilon - (p[0] * u[0] + p[1] * u[1] + p[2] * u[2]);
                acc += slot.on_shell_value(kin, sheet, &p)
                    * Complex64::from_polar(1.0, phase)
                    * (wi * wj * wk)
                    / (2.0 * omega);
            }
        }
    }
    acc * scale.powi(3)
}
