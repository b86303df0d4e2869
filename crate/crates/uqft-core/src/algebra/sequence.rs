//! The graded *-algebra of terminating test-function sequences.
//!
//! An element is a finite linear combination of tensor products of Gaussian
//! packet labels; the degree-n component collects the products with n
//! factors and the degree-0 component is a complex scalar. The product is
//! the (non-commutative) tensor concatenation, extended bilinearly; the
//! involution conjugates coefficients, reverses factor order, and stars each
//! factor. Starring is tracked per factor as metadata: a starred factor
//! evaluates through conj ∘ (argument reflection), so lifted factors support
//! on the negative shell exactly.
//!
//! Sequences are kept canonical (factors-lexicographic term order, like
//! terms merged, exact zeros dropped), which makes the algebraic laws that
//! hold exactly in floating point — involution, anti-homomorphism, grading,
//! unit neutrality — testable as structural equality.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_complex::Complex64;

use super::lorentz::{FourVector, Lorentz, LorentzError, PoincareTag, LORENTZ_CHECK_TOL};
use super::packet::{GaussianPacket, Kinematics, PacketError};

/// One tensor factor: a packet label plus the star flag.
///
/// An unstarred factor is the label itself; a starred factor represents the
/// involution applied to the label, with momentum-space values
/// conj(f̃)(−p). For lifted labels this flips the supporting shell sheet.
#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    /// The packet label.
    pub packet: GaussianPacket,
    /// Whether the involution has been applied to this factor.
    pub starred: bool,
}

impl Slot {
    /// An unstarred factor.
    pub fn plain(packet: GaussianPacket) -> Self {
        Slot { packet, starred: false }
    }

    /// Value at the on-shell point with energy sign `shell` and spatial
    /// momentum p⃗, accounting for the star:
    /// a starred factor evaluates as conj of the label at (−shell, −p⃗).
    pub fn on_shell_value(&self, kin: &Kinematics, shell: i8, p: &[f64; 3]) -> Complex64 {
        if self.starred {
            self.packet.on_shell_value(kin, -shell, &[-p[0], -p[1], -p[2]]).conj()
        } else {
            self.packet.on_shell_value(kin, shell, p)
        }
    }

    /// The shell sheet on which a lifted factor supports: +1 unstarred,
    /// −1 starred.
    pub fn shell_sign(&self) -> i8 {
        if self.starred {
            -1
        } else {
            1
        }
    }
}

/// One term of a sequence: a complex coefficient times a tensor product of
/// factors (empty product = scalar term).
#[derive(Clone, Debug, PartialEq)]
pub struct SeqTerm {
    /// Complex coefficient.
    pub coeff: Complex64,
    /// Tensor factors in order; the term's degree is the factor count.
    pub slots: Vec<Slot>,
}

/// A terminating sequence: finitely many terms across all degrees, held in
/// canonical form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FunctionSequence {
    terms: Vec<SeqTerm>,
}

/// Error raised by sequence-level operations.
#[derive(Clone, Debug, PartialEq)]
pub enum AlgebraError {
    /// The operation requires an element of the positive-shell subalgebra.
    NotInPositiveSubalgebra,
    /// Shell resolution requires every factor to be lifted.
    NotShellResolved,
    /// The operation expects only scalar and single-factor terms.
    NotSingleArgument,
    /// The homogeneous part failed the restricted-Lorentz checks.
    Lorentz(LorentzError),
    /// A packet-level operation failed.
    Packet(PacketError),
}

impl fmt::Display for AlgebraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraError::NotInPositiveSubalgebra => {
                write!(f, "element is not in the positive-shell subalgebra")
            }
            AlgebraError::NotShellResolved => {
                write!(f, "decomposition requires every factor to be lifted")
            }
            AlgebraError::NotSingleArgument => {
                write!(f, "operation expects only scalar and single-factor terms")
            }
            AlgebraError::Lorentz(e) => write!(f, "{e}"),
            AlgebraError::Packet(e) => write!(f, "{e}"),
        }
    }
}

impl From<LorentzError> for AlgebraError {
    fn from(e: LorentzError) -> Self {
        AlgebraError::Lorentz(e)
    }
}

impl From<PacketError> for AlgebraError {
    fn from(e: PacketError) -> Self {
        AlgebraError::Packet(e)
    }
}

/// Total order on f64 slices via IEEE total ordering, for canonical sorting.
fn cmp_f64s(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.total_cmp(y);
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

fn cmp_four(a: &FourVector, b: &FourVector) -> Ordering {
    cmp_f64s(&[a.t, a.x[0], a.x[1], a.x[2]], &[b.t, b.x[0], b.x[1], b.x[2]])
}

fn cmp_lorentz(a: &Lorentz, b: &Lorentz) -> Ordering {
    for i in 0..4 {
        let ord = cmp_f64s(&a.matrix()[i], &b.matrix()[i]);
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

fn cmp_tag(a: &Option<PoincareTag>, b: &Option<PoincareTag>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => cmp_four(&x.translation, &y.translation)
            .then_with(|| cmp_lorentz(&x.lorentz, &y.lorentz)),
    }
}

fn cmp_slot(a: &Slot, b: &Slot) -> Ordering {
    a.starred
        .cmp(&b.starred)
        .then_with(|| a.packet.lifted.cmp(&b.packet.lifted))
        .then_with(|| {
            cmp_f64s(
                &[
                    a.packet.center[0],
                    a.packet.center[1],
                    a.packet.center[2],
                    a.packet.width,
                    a.packet.tau,
                ],
                &[
                    b.packet.center[0],
                    b.packet.center[1],
                    b.packet.center[2],
                    b.packet.width,
                    b.packet.tau,
                ],
            )
        })
        .then_with(|| cmp_tag(&a.packet.transform, &b.packet.transform))
}

fn cmp_slots(a: &[Slot], b: &[Slot]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        for (x, y) in a.iter().zip(b) {
            let ord = cmp_slot(x, y);
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    })
}

impl FunctionSequence {
    /// The zero sequence.
    pub fn zero() -> Self {
        FunctionSequence { terms: Vec::new() }
    }

    /// The unit: scalar 1 in degree zero.
    pub fn unit() -> Self {
        FunctionSequence::scalar(Complex64::new(1.0, 0.0))
    }

    /// A pure scalar (degree-0) element.
    pub fn scalar(c: Complex64) -> Self {
        FunctionSequence::from_terms(vec![SeqTerm { coeff: c, slots: Vec::new() }])
    }

    /// A single unstarred factor with coefficient 1.
    pub fn from_packet(packet: GaussianPacket) -> Self {
        FunctionSequence::from_terms(vec![SeqTerm {
            coeff: Complex64::new(1.0, 0.0),
            slots: vec![Slot::plain(packet)],
        }])
    }

    /// Builds a sequence from raw terms, canonicalizing (sorting terms,
    /// merging equal factor lists, dropping exact zeros).
    pub fn from_terms(mut terms: Vec<SeqTerm>) -> Self {
        terms.sort_by(|a, b| cmp_slots(&a.slots, &b.slots));
        let mut merged: Vec<SeqTerm> = Vec::with_capacity(terms.len());
        for term in terms {
            match merged.last_mut() {
                Some(last) if cmp_slots(&last.slots, &term.slots) == Ordering::Equal => {
                    last.coeff += term.coeff;
                }
                _ => merged.push(term),
            }
        }
        merged.retain(|t| t.coeff.re != 0.0 || t.coeff.im != 0.0);
        FunctionSequence { terms: merged }
    }

    /// The canonical term list.
    pub fn terms(&self) -> &[SeqTerm] {
        &self.terms
    }

    /// Largest degree with a nonzero term (0 for the zero sequence).
    pub fn max_degree(&self) -> usize {
        self.terms.iter().map(|t| t.slots.len()).max().unwrap_or(0)
    }

    /// The terms of exactly degree n.
    pub fn component(&self, n: usize) -> Vec<&SeqTerm> {
        self.terms.iter().filter(|t| t.slots.len() == n).collect()
    }

    /// Sum of two sequences.
    pub fn add(&self, other: &FunctionSequence) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        FunctionSequence::from_terms(terms)
    }

    /// Scalar multiple.
    pub fn scale(&self, c: Complex64) -> Self {
        FunctionSequence::from_terms(
            self.terms
                .iter()
                .map(|t| SeqTerm { coeff: c * t.coeff, slots: t.slots.clone() })
                .collect(),
        )
    }

    /// True when every factor is lifted and unstarred, i.e. the element lies
    /// in the positive-shell subalgebra (scalars included).
    pub fn in_positive_subalgebra(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.slots.iter().all(|s| s.packet.lifted && !s.starred))
    }
}

/// Tensor-product composition (f, g) ↦ f ⊗ g extended bilinearly over terms.
/// Degrees add; the scalar term of either side acts multiplicatively.
pub fn seq_product(f: &FunctionSequence, g: &FunctionSequence) -> FunctionSequence {
    let mut terms = Vec::with_capacity(f.terms().len() * g.terms().len());
    for tf in f.terms() {
        for tg in g.terms() {
            let mut slots = Vec::with_capacity(tf.slots.len() + tg.slots.len());
            slots.extend(tf.slots.iter().cloned());
            slots.extend(tg.slots.iter().cloned());
            terms.push(SeqTerm { coeff: tf.coeff * tg.coeff, slots });
        }
    }
    FunctionSequence::from_terms(terms)
}

/// The involution: conjugates coefficients, reverses factor order, and stars
/// each factor. An involutive anti-homomorphism for [`seq_product`].
pub fn star(f: &FunctionSequence) -> FunctionSequence {
    FunctionSequence::from_terms(
        f.terms()
            .iter()
            .map(|t| {
                let mut slots: Vec<Slot> = t
                    .slots
                    .iter()
                    .map(|s| Slot { packet: s.packet.clone(), starred: !s.starred })
                    .collect();
                slots.reverse();
                SeqTerm { coeff: t.coeff.conj(), slots }
            })
            .collect(),
    )
}

/// Applies the shell lift to a single-argument label; rejects double lifts.
/// (Re-exported here so the lift sits beside the other sequence operations.)
pub fn b_lift(packet: &GaussianPacket) -> Result<GaussianPacket, PacketError> {
    packet.lift()
}

/// Splits a single-argument element into (g, h) with f = g + h*, both g and
/// h in the positive-shell subalgebra.
///
/// The input may contain scalar and single-factor terms only, and every
/// factor must be lifted (unlifted labels carry both shell sheets and do not
/// split structurally). Scalar terms go to g. The split is exact: unstarred
/// terms form g, starred terms are un-starred into h.
pub fn b_decompose(
    f: &FunctionSequence,
) -> Result<(FunctionSequence, FunctionSequence), AlgebraError> {
    if f.terms().iter().any(|t| t.slots.len() > 1) {
        return Err(AlgebraError::NotSingleArgument);
    }
    if f.terms().iter().any(|t| t.slots.iter().any(|s| !s.packet.lifted)) {
        return Err(AlgebraError::NotShellResolved);
    }
    let mut g_terms = Vec::new();
    let mut h_star_terms = Vec::new();
    for t in f.terms() {
        if t.slots.first().map(|s| s.starred).unwrap_or(false) {
            h_star_terms.push(t.clone());
        } else {
            g_terms.push(t.clone());
        }
    }
    let g = FunctionSequence::from_terms(g_terms);
    let h = star(&FunctionSequence::from_terms(h_star_terms));
    Ok((g, h))
}

/// Time translation by t on the positive-shell subalgebra: each factor's
/// phase-time moves τ ↦ τ − t, realizing e^{−iω t} on every argument.
pub fn time_translate(t: f64, f: &FunctionSequence) -> Result<FunctionSequence, AlgebraError> {
    if !f.in_positive_subalgebra() {
        return Err(AlgebraError::NotInPositiveSubalgebra);
    }
    Ok(FunctionSequence::from_terms(
        f.terms()
            .iter()
            .map(|term| {
                let slots = term
                    .slots
                    .iter()
                    .map(|s| {
                        let mut p = s.packet.clone();
                        p.tau -= t;
                        Slot { packet: p, starred: s.starred }
                    })
                    .collect();
                SeqTerm { coeff: term.coeff, slots }
            })
            .collect(),
    ))
}

/// Applies the Poincaré transformation (a, Λ) to every factor, after
/// validating that Λ is proper orthochronous. The transformation is attached
/// lazily as a tag and composed with any existing tag; it commutes with the
/// involution and preserves the positive-shell subalgebra.
pub fn poincare_apply(
    a: &FourVector,
    lam: &Lorentz,
    f: &FunctionSequence,
) -> Result<FunctionSequence, AlgebraError> {
    lam.validate(LORENTZ_CHECK_TOL)?;
    let tag = PoincareTag { translation: *a, lorentz: lam.clone() };
    Ok(FunctionSequence::from_terms(
        f.terms()
            .iter()
            .map(|term| {
                let slots = term
                    .slots
                    .iter()
                    .map(|s| Slot {
                        packet: s.packet.transformed(&tag),
                        starred: s.starred,
                    })
                    .collect();
                SeqTerm { coeff: term.coeff, slots }
            })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(q: [f64; 3], l: f64, tau: f64) -> GaussianPacket {
        GaussianPacket::new(q, l, tau).unwrap()
    }

    fn lifted(q: [f64; 3], l: f64, tau: f64) -> GaussianPacket {
        packet(q, l, tau).lift().unwrap()
    }

    #[test]
    fn unit_is_neutral_for_the_product() {
        let f = FunctionSequence::from_packet(packet([0.1, 0.2, 0.3], 1.5, 0.4))
            .add(&FunctionSequence::scalar(Complex64::new(0.5, -2.0)));
        assert_eq!(seq_product(&FunctionSequence::unit(), &f), f, "1 × f = f");
        assert_eq!(seq_product(&f, &FunctionSequence::unit()), f, "f × 1 = f");
    }

    #[test]
    fn product_degrees_add() {
        let f = FunctionSequence::from_packet(packet([1.0, 0.0, 0.0], 1.0, 0.0));
        let g = seq_product(&f, &f);
        assert_eq!(g.max_degree(), 2, "degree-1 × degree-1 lands in degree 2");
        assert_eq!(g.component(2).len(), 1);
        assert!(g.component(1).is_empty());
    }

    #[test]
    fn star_is_an_involution_structurally() {
        let f = FunctionSequence::from_terms(vec![
            SeqTerm {
                coeff: Complex64::new(0.3, -0.8),
                slots: vec![
                    Slot::plain(packet([0.0, 1.0, 0.0], 2.0, 0.1)),
                    Slot { packet: lifted([0.5, 0.0, 0.0], 1.0, -0.2), starred: true },
                ],
            },
            SeqTerm { coeff: Complex64::new(-1.0, 0.25), slots: Vec::new() },
        ]);
        assert_eq!(star(&star(&f)), f, "f** must equal f exactly");
    }

    #[test]
    fn star_reverses_products() {
        let f = FunctionSequence::from_packet(packet([0.2, 0.0, 0.0], 1.0, 0.0))
            .scale(Complex64::new(0.0, 2.0));
        let g = FunctionSequence::from_packet(lifted([0.0, 0.7, 0.0], 1.3, 0.5));
        let lhs = star(&seq_product(&g, &f));
        let rhs = seq_product(&star(&f), &star(&g));
        assert_eq!(lhs, rhs, "(g × f)* must equal f* × g* exactly");
    }

    #[test]
    fn decompose_splits_shell_parts_exactly() {
        let g_packet = lifted([0.1, 0.0, 0.0], 1.0, 0.3);
        let h_packet = lifted([0.0, -0.4, 0.0], 2.0, -0.1);
        let g_part = FunctionSequence::from_packet(g_packet).scale(Complex64::new(2.0, 1.0));
        let h_part = FunctionSequence::from_packet(h_packet).scale(Complex64::new(0.0, -3.0));
        let f = g_part.add(&star(&h_part));
        let (g, h) = b_decompose(&f).expect("lifted single-argument input splits");
        assert_eq!(g, g_part, "positive part must be recovered exactly");
        assert_eq!(h, h_part, "negative part must be recovered exactly");
        assert!(g.in_positive_subalgebra() && h.in_positive_subalgebra());
        assert_eq!(g.add(&star(&h)), f, "f = g + h* must reassemble");
    }

    #[test]
    fn decompose_rejects_unresolved_or_multi_argument_input() {
        let unlifted = FunctionSequence::from_packet(packet([0.0; 3], 1.0, 0.0));
        assert_eq!(b_decompose(&unlifted), Err(AlgebraError::NotShellResolved));
        let two = seq_product(
            &FunctionSequence::from_packet(lifted([0.0; 3], 1.0, 0.0)),
            &FunctionSequence::from_packet(lifted([1.0, 0.0, 0.0], 1.0, 0.0)),
        );
        assert_eq!(b_decompose(&two), Err(AlgebraError::NotSingleArgument));
    }

    #[test]
    fn time_translation_requires_the_positive_subalgebra_and_shifts_tau() {
        let f = FunctionSequence::from_packet(lifted([0.3, 0.0, 0.0], 1.2, 0.7));
        let shifted = time_translate(2.5, &f).expect("element is in the subalgebra");
        assert_eq!(shifted.terms()[0].slots[0].packet.tau, 0.7 - 2.5);
        let starred = star(&f);
        assert_eq!(
            time_translate(1.0, &starred),
            Err(AlgebraError::NotInPositiveSubalgebra),
            "starred factors leave the subalgebra"
        );
    }

    #[test]
    fn time_translation_composes_additively() {
        let f = FunctionSequence::from_packet(lifted([0.0, 0.2, -0.1], 0.9, 0.0));
        let a = time_translate(1.5, &time_translate(0.5, &f).unwrap()).unwrap();
        let b = time_translate(2.0, &f).unwrap();
        assert_eq!(a, b, "translations by s then t must equal translation by s + t");
    }

    #[test]
    fn poincare_apply_validates_the_matrix() {
        let f = FunctionSequence::from_packet(lifted([0.0; 3], 1.0, 0.0));
        let mut bad = [[0.0; 4]; 4];
        for i in 0..4 {
            bad[i][i] = 2.0;
        }
        let res = poincare_apply(&FourVector::zero(), &Lorentz::from_matrix(bad), &f);
        assert!(matches!(res, Err(AlgebraError::Lorentz(_))), "non-isometries are rejected");
    }

    #[test]
    fn poincare_apply_composes_as_the_group() {
        let f = FunctionSequence::from_packet(lifted([0.4, 0.0, 0.0], 1.0, 0.2));
        let b = Lorentz::boost([0.0, 1.0, 0.0], 0.3, 10.0).unwrap();
        let r = Lorentz::rotation([1.0, 0.0, 0.0], 0.8).unwrap();
        let a1 = FourVector::new(0.5, [0.1, 0.0, -0.3]);
        let a2 = FourVector::new(-0.2, [0.0, 0.7, 0.0]);
        let two_step =
            poincare_apply(&a2, &r, &poincare_apply(&a1, &b, &f).unwrap()).unwrap();
        let g2 = PoincareTag { translation: a2, lorentz: r.clone() };
        let g1 = PoincareTag { translation: a1, lorentz: b.clone() };
        let combined = g2.compose(&g1);
        let one_step =
            poincare_apply(&combined.translation, &combined.lorentz, &f).unwrap();
        // The per-packet tags are built by the same composition, so this is
        // exact equality of floating-point data.
        assert_eq!(two_step, one_step, "lazy tags must compose as the group");
    }

    #[test]
    fn like_terms_merge_and_zeros_vanish() {
        let p = packet([0.1, 0.1, 0.1], 1.0, 0.0);
        let t = |c: Complex64| SeqTerm { coeff: c, slots: vec![Slot::plain(p.clone())] };
        let f = FunctionSequence::from_terms(vec![
            t(Complex64::new(1.0, 0.0)),
            t(Complex64::new(-1.0, 0.0)),
        ]);
        assert_eq!(f, FunctionSequence::zero(), "exact cancellation must yield zero");
    }
}
