//! Two-point factor evaluation.
//!
//! A two-point factor with the negative-frequency delta on slot `a` and the
//! positive one on slot `b` evaluates to
//!
//! ```text
//! ⟨a|b⟩ = ∫ d³p/(2ω(p⃗)) · v_a(−1, −p⃗) · v_b(+1, p⃗),
//! ```
//!
//! which for lifted labels is `∫ d³p 2ω conj(φ̂_a) φ̂_b`. Both slot values
//! are Gaussians times bounded phases, so the product is integrated with
//! Gauss–Hermite nodes centred on the combined envelope; a node-count
//! refinement supplies the error estimate. A plain Riemann variant on a
//! shared box ([`pair_overlap_on_box`]) is used wherever many overlaps must
//! form an exact Gram family.

use super::{slot_momentum_peak, slot_vanishes_on, Estimate, QuadConfig, QuadError};
use num_complex::Complex64;
use uqft_core::algebra::{GaussianPacket, Kinematics, Slot};

/// Gauss–Hermite nodes and weights for `∫ e^{−x²} f(x) dx ≈ Σ w_i f(x_i)`.
///
/// Nodes are the roots of the degree-`n` Hermite polynomial, found by
/// Newton iteration on the orthonormal recurrence; weights use the
/// Christoffel sum of squares, which stays well-scaled for large `n`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "at least two nodes required");
    // Orthonormal Hermite values p_0..p_n at x plus the derivative of p_n.
    let eval = |x: f64| -> (f64, f64, f64) {
        let mut pkm1 = 0.0f64;
        let mut pk = std::f64::consts::PI.powf(-0.25);
        let mut sumsq = pk * pk;
        for k in 0..n {
            let kf = k as f64;
            let next = x * (2.0 / (kf + 1.0)).sqrt() * pk - (kf / (kf + 1.0)).sqrt() * pkm1;
            pkm1 = pk;
            pk = next;
            if k + 1 < n {
                sumsq += pk * pk;
            }
        }
        let deriv = (2.0 * n as f64).sqrt() * pkm1;
        (pk, deriv, sumsq)
    };
    let nf = n as f64;
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let half = n / 2;
    // Outermost-to-innermost initial guesses from the previous roots,
    // then Newton on the orthonormal polynomial.
    let mut roots: Vec<f64> = Vec::with_capacity(half + n % 2);
    for i in 0..half + n % 2 {
        let guess = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => roots[0] - 1.14 * nf.powf(0.426) / roots[0],
            2 => 1.86 * roots[1] - 0.86 * roots[0],
            3 => 1.91 * roots[2] - 0.91 * roots[1],
            _ => 2.0 * roots[i - 1] - roots[i - 2],
        };
        let mut root = guess;
        for _ in 0..60 {
            let (p, dp, _) = eval(root);
            let step = p / dp;
            root -= step;
            if step.abs() < 1e-15 * (1.0 + root.abs()) {
                break;
            }
        }
        roots.push(root);
        let (_, _, sumsq) = eval(root);
        let w = 1.0 / sumsq;
        nodes[i] = root;
        weights[i] = w;
        nodes[n - 1 - i] = -root;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[half] = 0.0;
        let (_, _, sumsq) = eval(0.0);
        weights[half] = 1.0 / sumsq;
    }
    (nodes, weights)
}

/// The two-point factor value `∫ d³p/(2ω) v_a(−1, −p⃗) v_b(+1, p⃗)` with a
/// node-refinement error estimate.
///
/// Structural zeros (a lifted label asked for its absent sheet) return
/// exactly zero without quadrature. Errors are judged relative to the mass
/// of `|integrand|`, so genuinely tiny overlaps (distant packets) converge
/// rather than failing the relative test.
pub fn pair_overlap(
    a: &Slot,
    b: &Slot,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<Estimate, QuadError> {
    if slot_vanishes_on(a, -1) || slot_vanishes_on(b, 1) {
        return Ok(Estimate::zero());
    }
    let (lo, lo_scale) = hermite_pass(a, b, kin, cfg.hermite_points);
    let (hi, hi_scale) = hermite_pass(a, b, kin, cfg.hermite_points + 12);
    let err = (hi - lo).norm();
    let scale = hi_scale.max(lo_scale).max(f64::MIN_POSITIVE);
    if err > cfg.cubature_rel_tol * scale {
        return Err(QuadError::Unconverged {
            achieved: err / scale,
            requested: cfg.cubature_rel_tol,
        });
    }
    Ok(Estimate { value: hi, error: err })
}

/// One Gauss–Hermite pass; returns (value, mass of |integrand|).
fn hermite_pass(a: &Slot, b: &Slot, kin: &Kinematics, n: usize) -> (Complex64, f64) {
    // Envelope centres as functions of the integration variable p⃗.
    let pa = slot_momentum_peak(a, kin, -1);
    let ca = [-pa[0], -pa[1], -pa[2]];
    let cb = slot_momentum_peak(b, kin, 1);
    let (aa, ab) = (a.packet.width * a.packet.width, b.packet.width * b.packet.width);
    let alpha = aa + ab;
    let scale = alpha.sqrt().recip();
    let c = [
        (aa * ca[0] + ab * cb[0]) / alpha,
        (aa * ca[1] + ab * cb[1]) / alpha,
        (aa * ca[2] + ab * cb[2]) / alpha,
    ];
    let (nodes, weights) = gauss_hermite(n);
    // Fold e^{x²} into the node factor so the weights see the bare integrand.
    let boosted: Vec<f64> = weights
        .iter()
        .zip(nodes.iter())
        .map(|(w, x)| w * (x * x).exp())
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mass = 0.0f64;
    for (xi, wi) in nodes.iter().zip(boosted.iter()) {
        for (xj, wj) in nodes.iter().zip(boosted.iter()) {
            for (xk, wk) in nodes.iter().zip(boosted.iter()) {
                let p = [c[0] + scale * xi, c[1] + scale * xj, c[2] + scale * xk];
                let neg = [-p[0], -p[1], -p[2]];
                let f = a.on_shell_value(kin, -1, &neg) * b.on_shell_value(kin, 1, &p)
                    / (2.0 * kin.omega(&p));
                let w = wi * wj * wk;
                acc += f * w;
                mass += f.norm() * w;
            }
        }
    }
    let vol = scale * scale * scale;
    (acc * vol, mass * vol)
}

/// The two-point overlap of two lifted labels,
/// `∫ d³p 2ω(p⃗) conj(φ̂_f)(p⃗) φ̂_g(p⃗)`.
pub fn two_point_overlap(
    f: &GaussianPacket,
    g: &GaussianPacket,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<Estimate, QuadError> {
    if !f.lifted || !g.lifted {
        return Err(QuadError::Config("two_point_overlap requires lifted packets"));
    }
    let a = Slot { packet: f.clone(), starred: true };
    let b = Slot::plain(g.clone());
    pair_overlap(&a, &b, kin, cfg)
}

/// A shared cubic momentum box with uniform step, used when a whole family
/// of overlaps must be evaluated on identical nodes (exact Gram structure).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxGrid {
    /// First sample per axis.
    pub start: [f64; 3],
    /// Step, common to all axes.
    pub step: f64,
    /// Points per axis.
    pub n: usize,
}

impl BoxGrid {
    /// A box covering every given centre to the stated radius, with at
    /// most `n` points per axis.
    pub fn covering(centres: &[[f64; 3]], radius: f64, n: usize) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in centres {
            for a in 0..3 {
                lo[a] = lo[a].min(c[a] - radius);
                hi[a] = hi[a].max(c[a] + radius);
            }
        }
        let span = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
        let step = span / (n as f64 - 1.0);
        // Centre each axis range inside the common cubic span.
        let mut start = [0.0; 3];
        for a in 0..3 {
            let mid = 0.5 * (lo[a] + hi[a]);
            start[a] = mid - 0.5 * span;
        }
        BoxGrid { start, step, n }
    }

    /// Verifies the box covers `centre ± radius` on every axis.
    pub fn covers(&self, centre: &[f64; 3], radius: f64) -> bool {
        (0..3).all(|a| {
            self.start[a] <= centre[a] - radius
                && self.start[a] + self.step * (self.n as f64 - 1.0) >= centre[a] + radius
        })
    }
}

/// The same two-point factor as [`pair_overlap`], summed by the Riemann
/// rule on a shared box. For Gaussian integrands the uniform sum is
/// spectrally accurate, and using one box for a whole matrix of overlaps
/// makes the family an exact Gram form.
pub fn pair_overlap_on_box(a: &Slot, b: &Slot, grid: &BoxGrid, kin: &Kinematics) -> Complex64 {
    if slot_vanishes_on(a, -1) || slot_vanishes_on(b, 1) {
        return Complex64::new(0.0, 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..grid.n {
        for j in 0..grid.n {
            for k in 0..grid.n {
                let p = [
                    grid.start[0] + grid.step * i as f64,
                    grid.start[1] + grid.step * j as f64,
                    grid.start[2] + grid.step * k as f64,
                ];
                let neg = [-p[0], -p[1], -p[2]];
                acc += a.on_shell_value(kin, -1, &neg) * b.on_shell_value(kin, 1, &p)
                    / (2.0 * kin.omega(&p));
            }
        }
    }
    acc * grid.step.powi(3)
}
