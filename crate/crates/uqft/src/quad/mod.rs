//! Deterministic quadrature for the three integral primitives behind every
//! functional evaluation, plus an independent Monte-Carlo oracle.
//!
//! The primitives are:
//!
//! - [`two_point_overlap`] / [`pair_overlap`] — the two-point factor
//!   `∫ d³p/(2ω) v_a(−shell, −p⃗) v_b(+shell, p⃗)`, which for lifted packets
//!   reduces to `∫ d³p 2ω conj(φ̂_f) φ̂_g`.
//! - [`shell_transform`] — the single-particle transform
//!   `h(υ, u⃗) = ∫ d³p/(2ω) e^{i(σωυ − p⃗·u⃗)} v(σ, p⃗)` sampled on a
//!   position-frequency grid by centered FFTs.
//! - [`eval_conjoined`] — one kernel term: the conjoined block evaluates to
//!   `c_η ∫ dυ d³u/(2π)⁴ Π_j h_j(υ, u⃗)` and each remaining two-point factor
//!   to a pair overlap.
//! - [`oracle_eval`] — the same term estimated by importance-sampled Monte
//!   Carlo with a smoothed energy delta, extrapolated in the smoothing width.
//!
//! All deterministic reductions run in a fixed order (parallel slices are
//! accumulated by slice index), so results are bit-reproducible for a fixed
//! configuration and thread-count-independent.

mod conjoined;
mod fft;
mod oracle;
mod overlap;
mod shell;

pub use conjoined::{
    contraction_integral, eval_conjoined, eval_conjoined_with_plan, pooled_contractions,
    slot_fingerprint, GridPlan,
};
pub use fft::CenteredFft;
pub use oracle::{oracle_block, oracle_eval, oracle_pair_overlap, OracleReport};
pub use overlap::{gauss_hermite, pair_overlap, pair_overlap_on_box, two_point_overlap, BoxGrid};
pub use shell::{pointwise_shell_value, shell_slice, shell_transform, ShellTransform};

use num_complex::Complex64;
use uqft_core::algebra::{GaussianPacket, Kinematics, Slot};

/// A numeric result together with a conservative error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    /// The computed value.
    pub value: Complex64,
    /// Absolute error estimate (grid-refinement or statistical).
    pub error: f64,
}

impl Estimate {
    /// An exactly-known value (zero error bar).
    pub fn exact(value: Complex64) -> Self {
        Estimate { value, error: 0.0 }
    }

    /// The exact zero produced by structural shortcuts.
    pub fn zero() -> Self {
        Estimate::exact(Complex64::new(0.0, 0.0))
    }
}

/// Error raised by quadrature routines.
#[derive(Debug, thiserror::Error)]
pub enum QuadError {
    /// Refinement stalled above the requested tolerance.
    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Unconverged {
        /// Error estimate actually reached.
        achieved: f64,
        /// Tolerance that was requested.
        requested: f64,
    },
    /// The momentum grid fails to cover a packet's support.
    #[error("momentum grid half-extent {extent:.3} does not cover packet support radius {needed:.3}")]
    GridCoverage {
        /// Half-extent of the grid per axis.
        extent: f64,
        /// Required support radius (six inverse widths).
        needed: f64,
    },
    /// A configuration value is unusable.
    #[error("invalid quadrature configuration: {0}")]
    Config(&'static str),
    /// Conjoined blocks are only evaluated up to six legs.
    #[error("conjoined block has {got} legs; at most {max} are supported")]
    TooManyLegs {
        /// Number of legs requested.
        got: usize,
        /// Supported maximum.
        max: usize,
    },
}

/// Pinned default: momentum-grid points per axis.
pub const DEFAULT_MOMENTUM_POINTS: usize = 64;
/// Pinned default: momentum half-span per axis, in units of the inverse
/// packet width 1/L (covers the profile to `e^{−196}`, and the induced
/// position step `Δu = 2π/(N·Δp)` then resolves total-momentum phases).
pub const DEFAULT_MOMENTUM_HALFSPAN_WIDTHS: f64 = 14.0;
/// Pinned default: contraction integrals keep position samples inside a
/// ball of this radius, in units of the packet width L.
pub const DEFAULT_CONTRACTION_RADIUS_WIDTHS: f64 = 5.0;
/// Pinned default: relative-time step, in units of 1/m.
pub const DEFAULT_UPSILON_STEP_MASS: f64 = 0.2;
/// Pinned default: relative-time half-span, in units of 1/m.
pub const DEFAULT_UPSILON_HALFSPAN_MASS: f64 = 30.0;
/// Pinned default: Gauss–Hermite nodes per axis for pair overlaps.
pub const DEFAULT_HERMITE_POINTS: usize = 48;
/// Pinned default: relative tolerance for pair-overlap refinement.
pub const DEFAULT_CUBATURE_REL_TOL: f64 = 1e-7;
/// Pinned default: Monte-Carlo samples per smoothing width.
pub const DEFAULT_MC_SAMPLES: usize = 200_000;
/// Pinned default: smoothing-width ladder for the energy delta, as
/// multipliers of the estimated on-shell energy spread of the sampled
/// legs (descending, halving; the last two rungs drive the Richardson
/// extrapolation, earlier rungs diagnose the quadratic bias model).
pub const DEFAULT_EPSILON_LADDER: [f64; 3] = [0.8, 0.4, 0.2];

/// Quadrature configuration; every tolerance and grid density is pinned
/// here rather than scattered through call sites.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadConfig {
    /// Momentum-grid points per axis (also fixes the position grid).
    pub momentum_points: usize,
    /// Momentum half-span per axis in units of 1/L.
    pub momentum_halfspan_widths: f64,
    /// Position-sample ball radius in units of L.
    pub contraction_radius_widths: f64,
    /// Relative-time step in units of 1/m.
    pub upsilon_step_mass: f64,
    /// Relative-time half-span in units of 1/m.
    pub upsilon_halfspan_mass: f64,
    /// Gauss–Hermite nodes per axis.
    pub hermite_points: usize,
    /// Relative tolerance for refinement checks on pair overlaps.
    pub cubature_rel_tol: f64,
    /// Monte-Carlo samples per smoothing width.
    pub mc_samples: usize,
    /// Monte-Carlo seed.
    pub mc_seed: u64,
    /// Smoothing-width ladder as multipliers of the estimated energy
    /// spread (descending, each rung half the previous).
    pub epsilon_ladder: Vec<f64>,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            momentum_points: DEFAULT_MOMENTUM_POINTS,
            momentum_halfspan_widths: DEFAULT_MOMENTUM_HALFSPAN_WIDTHS,
            contraction_radius_widths: DEFAULT_CONTRACTION_RADIUS_WIDTHS,
            upsilon_step_mass: DEFAULT_UPSILON_STEP_MASS,
            upsilon_halfspan_mass: DEFAULT_UPSILON_HALFSPAN_MASS,
            hermite_points: DEFAULT_HERMITE_POINTS,
            cubature_rel_tol: DEFAULT_CUBATURE_REL_TOL,
            mc_samples: DEFAULT_MC_SAMPLES,
            mc_seed: 0x5eed_cafe,
            epsilon_ladder: DEFAULT_EPSILON_LADDER.to_vec(),
        }
    }
}

impl QuadConfig {
    /// A coarsened copy for fast structural tests (half-resolution grids,
    /// shorter relative-time window). The momentum half-span shrinks with
    /// the point count so the position box keeps covering the envelope.
    pub fn coarse() -> Self {
        QuadConfig {
            momentum_points: 32,
            momentum_halfspan_widths: 10.0,
            upsilon_step_mass: 0.4,
            upsilon_halfspan_mass: 18.0,
            hermite_points: 32,
            ..QuadConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        if self.momentum_points < 8 || self.momentum_points % 2 != 0 {
            return Err(QuadError::Config("momentum_points must be even and at least 8"));
        }
        if !(self.momentum_halfspan_widths > 0.0) || !(self.contraction_radius_widths > 0.0) {
            return Err(QuadError::Config("grid spans must be positive"));
        }
        if !(self.upsilon_step_mass > 0.0) || !(self.upsilon_halfspan_mass > 0.0) {
            return Err(QuadError::Config("relative-time grid must be positive"));
        }
        if self.hermite_points < 8 {
            return Err(QuadError::Config("hermite_points must be at least 8"));
        }
        if self.epsilon_ladder.len() < 2 {
            return Err(QuadError::Config("epsilon_ladder needs at least two rungs"));
        }
        for pair in self.epsilon_ladder.windows(2) {
            if !(pair[1] > 0.0) || (pair[0] / pair[1] - 2.0).abs() > 1e-9 {
                return Err(QuadError::Config("epsilon_ladder must halve between rungs"));
            }
        }
        if self.mc_samples < 1600 {
            return Err(QuadError::Config("mc_samples must be at least 1600"));
        }
        Ok(())
    }
}

/// A uniform one-dimensional grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1 {
    /// First sample point.
    pub start: f64,
    /// Step between samples.
    pub step: f64,
    /// Number of samples.
    pub n: usize,
}

impl Grid1 {
    /// The `i`-th sample point.
    pub fn point(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    /// A symmetric grid with `n` points, step `step`, centred on zero.
    pub fn symmetric(step: f64, halfspan: f64) -> Self {
        let half = (halfspan / step).ceil() as usize;
        Grid1 { start: -(half as f64) * step, step, n: 2 * half + 1 }
    }
}

/// Whether a slot's label function vanishes identically on the given
/// frequency sheet (a lifted label is supported on its natural sheet only).
pub fn slot_vanishes_on(slot: &Slot, sheet: i8) -> bool {
    slot.packet.lifted && sheet != slot.shell_sign()
}

/// The momentum at which `|v(sheet, p⃗)|` peaks for this slot: the packet
/// centre pushed through the slot's Poincaré tag and star reflection.
pub fn slot_momentum_peak(slot: &Slot, kin: &Kinematics, sheet: i8) -> [f64; 3] {
    let q = peak_of_packet(&slot.packet, kin, if slot.starred { -sheet } else { sheet });
    if slot.starred {
        [-q[0], -q[1], -q[2]]
    } else {
        q
    }
}

/// Peak momentum of the packet's value on the given sheet: the tag's
/// Lorentz part applied to the on-shell centre.
fn peak_of_packet(packet: &GaussianPacket, kin: &Kinematics, sheet: i8) -> [f64; 3] {
    let q = packet.center;
    match &packet.transform {
        None => q,
        Some(tag) => {
            let e = f64::from(sheet) * kin.omega(&q);
            let image = tag.lorentz.apply(&uqft_core::algebra::FourVector::new(e, q));
            image.x
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use uqft_core::algebra::{FourVector, Lorentz, PoincareTag};

    fn kin() -> Kinematics {
        Kinematics::new(1.0).expect("unit mass is valid")
    }

    #[test]
    fn lifted_slots_vanish_exactly_off_their_natural_sheet() {
        let packet = GaussianPacket::new([0.3, 0.0, 0.0], 5.0, 0.0)
            .and_then(|p| p.lift())
            .expect("valid lifted packet");
        let plain = Slot::plain(packet.clone());
        let starred = Slot { packet, starred: true };
        assert!(slot_vanishes_on(&plain, -1), "lifted unstarred slot has no negative sheet");
        assert!(!slot_vanishes_on(&plain, 1), "lifted unstarred slot lives on the positive sheet");
        assert!(slot_vanishes_on(&starred, 1), "starred lifted slot has no positive sheet");
        assert!(!slot_vanishes_on(&starred, -1), "starred lifted slot lives on the negative sheet");
    }

    #[test]
    fn momentum_peak_tracks_star_reflection_and_rotations() {
        let k = kin();
        let q = [0.4, 0.1, -0.2];
        let packet =
            GaussianPacket::new(q, 5.0, 0.0).and_then(|p| p.lift()).expect("valid lifted packet");
        let plain = Slot::plain(packet.clone());
        let starred = Slot { packet: packet.clone(), starred: true };
        assert_eq!(slot_momentum_peak(&plain, &k, 1), q, "untagged peak is the centre");
        assert_eq!(
            slot_momentum_peak(&starred, &k, -1),
            [-q[0], -q[1], -q[2]],
            "starred slot peaks at the reflected centre"
        );

        let rot = Lorentz::rotation([0.0, 0.0, 1.0], core::f64::consts::FRAC_PI_2)
            .expect("z-rotation is valid");
        let tag = PoincareTag { translation: FourVector::zero(), lorentz: rot.clone() };
        let tagged = Slot::plain(packet.transformed(&tag));
        let peak = slot_momentum_peak(&tagged, &k, 1);
        let expect = rot.apply(&FourVector::new(k.omega(&q), q)).x;
        for a in 0..3 {
            assert!(
                (peak[a] - expect[a]).abs() < 1e-12,
                "rotated peak component {a}: {} vs {}",
                peak[a],
                expect[a]
            );
        }
    }

    #[test]
    fn config_validation_rejects_degenerate_grids() {
        let mut cfg = QuadConfig::default();
        cfg.momentum_points = 7;
        assert!(cfg.validate().is_err(), "odd point count must be rejected");
        let mut cfg = QuadConfig::default();
        cfg.upsilon_step_mass = 0.0;
        assert!(cfg.validate().is_err(), "zero time step must be rejected");
        assert!(QuadConfig::default().validate().is_ok(), "defaults must validate");
    }
}
