//! Mass-shell kinematics and Gaussian wave-packet state labels.
//!
//! A packet is the momentum-space label of a one-argument test function: a
//! normalized Gaussian profile centered at q⃗ with width parameter L, an
//! internal phase-time τ (entering as e^{iωτ}), an optional lift flag (the
//! factor ω + E that removes the negative-shell component), and an optional
//! Poincaré tag applied lazily at evaluation time. Kernels only ever read
//! restrictions to the two mass-shell sheets, so a packet stores exactly its
//! on-shell data: [`GaussianPacket::on_shell_value`] is the whole numeric
//! interface.

use core::f64::consts::PI;
use core::fmt;

use libm::{cos, exp, sin, sqrt};
use num_complex::Complex64;

use super::lorentz::{dot3, FourVector, PoincareTag, LORENTZ_CHECK_TOL};

/// Single-particle kinematics: the mass and the shell map ω(p⃗) = √(m² + p⃗²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    mass: f64,
}

impl Kinematics {
    /// Builds kinematics for mass m > 0 (finite).
    pub fn new(mass: f64) -> Result<Self, PacketError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(PacketError::NonPositiveMass { mass });
        }
        Ok(Kinematics { mass })
    }

    /// The particle mass m.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// On-shell energy ω(p⃗) = √(m² + p⃗²).
    pub fn omega(&self, p: &[f64; 3]) -> f64 {
        sqrt(self.mass * self.mass + dot3(p, p))
    }
}

/// Error raised by packet construction and shell-data operations.
#[derive(Clone, Debug, PartialEq)]
pub enum PacketError {
    /// Mass must be strictly positive and finite.
    NonPositiveMass {
        /// Offending value.
        mass: f64,
    },
    /// Width must be strictly positive and finite.
    NonPositiveWidth {
        /// Offending value.
        width: f64,
    },
    /// The lift was applied to an already lifted label.
    AlreadyLifted,
}

impl fmt::Display for PacketError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PacketError::NonPositiveMass { mass } => {
                write!(f, "mass must be positive and finite, got {mass}")
            }
            PacketError::NonPositiveWidth { width } => {
                write!(f, "width must be positive and finite, got {width}")
            }
            PacketError::AlreadyLifted => write!(f, "label is already lifted"),
        }
    }
}

/// Gaussian wave-packet label. See the module docs for the represented
/// momentum-space function.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPacket {
    /// Momentum-space center q⃗.
    pub center: [f64; 3],
    /// Width parameter L > 0 (position-space scale; the momentum-space
    /// standard deviation per axis is 1/(L√2)).
    pub width: f64,
    /// Phase-time parameter τ: the label carries e^{iω(p⃗)τ}.
    pub tau: f64,
    /// Whether the shell lift ω + E has been applied.
    pub lifted: bool,
    /// Optional lazily applied Poincaré transformation.
    pub transform: Option<PoincareTag>,
}

impl GaussianPacket {
    /// Builds an unlifted, untransformed packet centered at q⃗ with width L
    /// and phase-time τ.
    pub fn new(center: [f64; 3], width: f64, tau: f64) -> Result<Self, PacketError> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(PacketError::NonPositiveWidth { width });
        }
        Ok(GaussianPacket { center, width, tau, lifted: false, transform: None })
    }

    /// The normalized Gaussian profile (L/√π)³ e^{−L²(p⃗ − q⃗)²}, which
    /// integrates to 1 over d³p.
    pub fn profile(&self, p: &[f64; 3]) -> f64 {
        let l = self.width;
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let norm = l / sqrt(PI);
        norm * norm * norm * exp(-l * l * dot3(&d, &d))
    }

    /// Value of the represented function at the on-shell four-momentum with
    /// energy sign `shell` (+1 for E = +ω(p⃗), −1 for E = −ω(p⃗)) and spatial
    /// momentum p⃗.
    ///
    /// - Untagged, unlifted: e^{iω(p⃗)τ} · profile(p⃗) on both sheets (the
    ///   label's energy dependence is trivial before lifting).
    /// - Lifted: the factor ω + E multiplies in, giving 2ω(p⃗) on the positive
    ///   sheet and an exact zero on the negative sheet.
    /// - Tagged with (a, Λ): e^{ip·a} times the untagged value at Λ⁻¹p, which
    ///   stays on the same sheet because Λ is orthochronous.
    pub fn on_shell_value(&self, kin: &Kinematics, shell: i8, p: &[f64; 3]) -> Complex64 {
        debug_assert!(shell == 1 || shell == -1, "shell sign must be ±1");
        match &self.transform {
            None => self.untagged_value(kin, shell, p),
            Some(tag) => {
                let omega = kin.omega(p);
                let p4 = FourVector::new(f64::from(shell) * omega, *p);
                let phase_arg = p4.dot(&tag.translation);
                let phase = Complex64::new(cos(phase_arg), sin(phase_arg));
                let back = tag.lorentz.inverse().apply(&p4);
                debug_assert!(
                    back.t * f64::from(shell) > 0.0,
                    "orthochronous transformations preserve the shell sheet"
                );
                phase * self.untagged_value(kin, shell, &back.x)
            }
        }
    }

    /// On-shell value ignoring any Poincaré tag.
    fn untagged_value(&self, kin: &Kinematics, shell: i8, p: &[f64; 3]) -> Complex64 {
        if self.lifted && shell < 0 {
            // ω + E vanishes identically on the negative sheet.
            return Complex64::new(0.0, 0.0);
        }
        let omega = kin.omega(p);
        let arg = omega * self.tau;
        let mut value = Complex64::new(cos(arg), sin(arg)) * self.profile(p);
        if self.lifted {
            value *= 2.0 * omega;
        }
        value
    }

    /// Applies the shell lift ω + E, rejecting a second application.
    pub fn lift(&self) -> Result<Self, PacketError> {
        if self.lifted {
            return Err(PacketError::AlreadyLifted);
        }
        let mut out = self.clone();
        out.lifted = true;
        Ok(out)
    }

    /// Prepends a Poincaré transformation (applied after any existing tag),
    /// dropping the tag entirely when the composition is the identity.
    pub fn transformed(&self, tag: &PoincareTag) -> Self {
        let mut out = self.clone();
        let composed = match &self.transform {
            None => tag.clone(),
            Some(existing) => tag.compose(existing),
        };
        out.transform =
            if composed.is_identity(LORENTZ_CHECK_TOL) { None } else { Some(composed) };
        out
    }
}
