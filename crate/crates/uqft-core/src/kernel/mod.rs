//! Symbolic expansion of the n-point kernels.
//!
//! A kernel term is an exact-rational multiple of a product of disjoint
//! factors covering the argument indices {1..n}: two-point factors Δ
//! (carrying δ⁻ on one slot and δ⁺ on the other) and at most one conjoined
//! factor (the connected interacting block, scaled at evaluation time by the
//! moment coefficients c_η). Terms carry a sign assignment: none (raw V
//! lists), a symbolic energy-ordering weight Θ_{k,n} in canonical-channel
//! form, or a fixed sign pattern (positive-subalgebra reductions).
//!
//! The n-point kernel is assembled as Σ_k n!/(k! (n−k)!) Ŝ[Θ_{k,n} V_{k,n−k}]
//! with Ŝ the normalized symmetrizer. Rather than loop over all n!
//! permutations, [`assemble_W`] enumerates the surviving structures at the
//! canonical channel {1..k} directly with closed-form rational coefficients;
//! the permutation definition is kept as an independent test oracle.
//! Structures whose δ-roles contradict the ordering weight (a δ⁻ slot forced
//! positive, or vice versa) vanish identically as generalized functions and
//! are never emitted.

pub mod render;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_rational::Ratio;

use crate::combinatorics::{
    enumerate_partitions, next_permutation, partition_subsets, Caps, EnumError, SignPattern,
};

/// Exact rational coefficient type used throughout the expansion.
pub type Coeff = Ratio<i64>;

/// One multiplicative factor of a kernel term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Factor {
    /// Connected interacting block on the given argument indices
    /// (ascending, at least 4 of them); evaluates through the conjoined
    /// integral representation scaled by c_η.
    Conjoined(Vec<usize>),
    /// Two-point factor Δ with δ⁻ on slot `neg` and δ⁺ on slot `pos`.
    TwoPoint {
        /// Slot carrying the negative-shell delta.
        neg: usize,
        /// Slot carrying the positive-shell delta.
        pos: usize,
    },
}

impl Factor {
    /// All argument indices the factor touches.
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Factor::Conjoined(ix) => ix.clone(),
            Factor::TwoPoint { neg, pos } => vec![*neg, *pos],
        }
    }
}

// Canonical factor order: conjoined blocks before pairs, larger blocks
// before smaller, then by index tuple. This fixes the rendered order of
// every expansion (full block leads, mixed terms follow, pairings last).
impl Ord for Factor {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Factor::Conjoined(a), Factor::Conjoined(b)) => {
                b.len().cmp(&a.len()).then_with(|| a.cmp(b))
            }
            (Factor::Conjoined(_), Factor::TwoPoint { .. }) => Ordering::Less,
            (Factor::TwoPoint { .. }, Factor::Conjoined(_)) => Ordering::Greater,
            (Factor::TwoPoint { neg: a, pos: b }, Factor::TwoPoint { neg: c, pos: d }) => {
                (a, b).cmp(&(c, d))
            }
        }
    }
}

impl PartialOrd for Factor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The sign handling attached to a kernel term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SignAssignment {
    /// No sign constraint (raw V expansion).
    None,
    /// Symbolic ordering weight Θ_{k,n} in canonical-channel form: the term
    /// is stored for the channel {1..k} and expands over all k-subsets.
    ThetaChannel {
        /// Number of negative-energy slots in the canonical channel.
        k: usize,
    },
    /// A fixed pattern of energy signs, one per slot.
    Fixed(SignPattern),
}

/// One term of a kernel expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelTerm {
    /// Exact rational coefficient.
    pub coeff: Coeff,
    /// Disjoint factors covering {1..n}, canonically ordered.
    pub factors: Vec<Factor>,
    /// Sign assignment.
    pub sign: SignAssignment,
}

/// A finished expansion: terms over a fixed argument count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermList {
    /// Number of arguments n.
    pub n: usize,
    /// Terms in canonical order (by sign assignment, then factors).
    pub terms: Vec<KernelTerm>,
}

/// Error raised by kernel-expansion operations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KernelError {
    /// An enumeration cap was exceeded or an argument was out of domain.
    Enum(EnumError),
    /// A term violated a structural invariant.
    Structure(&'static str),
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::Enum(e) => write!(f, "{e}"),
            KernelError::Structure(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<EnumError> for KernelError {
    fn from(e: EnumError) -> Self {
        KernelError::Enum(e)
    }
}

impl KernelTerm {
    /// Checks the structural invariants: factor index sets partition {1..n},
    /// conjoined blocks are ascending with at least 4 indices, and at most
    /// one conjoined factor appears.
    pub fn validate(&self, n: usize) -> Result<(), KernelError> {
        let mut seen = vec![false; n + 1];
        let mut conjoined = 0usize;
        for factor in &self.factors {
            match factor {
                Factor::Conjoined(ix) => {
                    conjoined += 1;
                    if ix.len() < 4 {
                        return Err(KernelError::Structure("conjoined block smaller than 4"));
                    }
                    if !ix.windows(2).all(|w| w[0] < w[1]) {
                        return Err(KernelError::Structure("conjoined block not ascending"));
                    }
                }
                Factor::TwoPoint { neg, pos } => {
                    if neg == pos {
                        return Err(KernelError::Structure("degenerate two-point factor"));
                    }
                }
            }
            for i in factor.indices() {
                if i == 0 || i > n {
                    return Err(KernelError::Structure("factor index out of range"));
                }
                if seen[i] {
                    return Err(KernelError::Structure("factor index sets overlap"));
                }
                seen[i] = true;
            }
        }
        if conjoined > 1 {
            return Err(KernelError::Structure("more than one conjoined factor"));
        }
        if seen[1..=n].iter().any(|&s| !s) {
            return Err(KernelError::Structure("factors do not cover {1..n}"));
        }
        Ok(())
    }
}

impl TermList {
    /// Builds a list in canonical order with like terms merged and zero
    /// coefficients dropped.
    pub fn from_terms(n: usize, terms: Vec<KernelTerm>) -> Self {
        let mut map: BTreeMap<(SignAssignment, Vec<Factor>), Coeff> = BTreeMap::new();
        for mut term in terms {
            term.factors.sort();
            let key = (term.sign, term.factors);
            *map.entry(key).or_insert_with(|| Ratio::new(0, 1)) += term.coeff;
        }
        let terms = map
            .into_iter()
            .filter(|(_, c)| *c != Ratio::new(0, 1))
            .map(|((sign, factors), coeff)| KernelTerm { coeff, factors, sign })
            .collect();
        TermList { n, terms }
    }

    /// Validates every term's structural invariants.
    pub fn validate(&self) -> Result<(), KernelError> {
        for term in &self.terms {
            term.validate(self.n)?;
        }
        Ok(())
    }
}

/// Whether the index set I can host a conjoined factor in V_{k,n−k}: at
/// least four indices, a genuine two-sided split (k ∉ {0, 1, n−1, n}), and
/// the four boundary-straddling indices {k−1, k, k+1, k+2} all inside I.
pub fn conjoined_valid(k: usize, indices: &[usize], n: usize) -> bool {
    if indices.len() < 4 {
        return false;
    }
    if k <= 1 || k + 1 >= n {
        return false;
    }
    (k - 1..=k + 2).all(|j| indices.contains(&j))
}

/// Expands V_{k,m} (n = k + m arguments): the sum over set partitions of
/// {1..n} whose blocks are either two-point pairs (δ⁻ on the smaller index)
/// or a single valid conjoined block. Terms carry coefficient 1 and no sign
/// assignment.
pub fn expand_v(k: usize, m: usize, caps: &Caps) -> Result<TermList, KernelError> {
    let n = k + m;
    if n == 0 {
        // Empty product: V_{0,0} = 1.
        return Ok(TermList::from_terms(
            0,
            vec![KernelTerm {
                coeff: Ratio::new(1, 1),
                factors: Vec::new(),
                sign: SignAssignment::None,
            }],
        ));
    }
    let partitions = enumerate_partitions(n, caps)?;
    let mut terms = Vec::new();
    'partition: for partition in &partitions {
        let mut factors = Vec::with_capacity(partition.block_count());
        for block in partition.blocks() {
            if block.len() == 2 {
                factors.push(Factor::TwoPoint { neg: block[0], pos: block[1] });
            } else if conjoined_valid(k, block, n) {
                factors.push(Factor::Conjoined(block.clone()));
            } else {
                continue 'partition;
            }
        }
        terms.push(KernelTerm {
            coeff: Ratio::new(1, 1),
            factors,
            sign: SignAssignment::None,
        });
    }
    let list = TermList::from_terms(n, terms);
    list.validate()?;
    Ok(list)
}

/// Assembles the n-point kernel Σ_k n!/(k!(n−k)!) Ŝ[Θ_{k,n} V_{k,n−k}] in
/// canonical-channel form: for each k the surviving structures at the
/// channel {1..k} with their exact rational coefficients. Identically
/// vanishing structures (δ-roles contradicting the channel) are never
/// emitted.
///
/// The closed-form coefficients, verified against the permutation
/// definition by the expansion oracle tests: a structure with conjoined
/// block B (b₁ = |B ∩ {1..k}| ≥ 2, b₂ = |B| − b₁ ≥ 2) and a perfect
/// crossing matching of the leftovers carries
/// b₁(b₁−1)/(k(k−1)) · b₂(b₂−1)/(m(m−1)); a pure crossing pairing (k = m)
/// carries 1.
pub fn assemble_w(n: usize, caps: &Caps) -> Result<TermList, KernelError> {
    if n > caps.symmetrize_max {
        return Err(EnumError::CapExceeded { n, cap: caps.symmetrize_max }.into());
    }
    if n == 0 {
        return Ok(TermList::from_terms(
            0,
            vec![KernelTerm {
                coeff: Ratio::new(1, 1),
                factors: Vec::new(),
                sign: SignAssignment::ThetaChannel { k: 0 },
            }],
        ));
    }
    let mut terms = Vec::new();
    for k in 0..=n {
        let m = n - k;
        // Pure crossing pairings: every left slot pairs with a right slot,
        // so k = m; the coefficient is exactly 1.
        if k == m && k > 0 {
            for matching in matchings(k, k) {
                let factors = (1..=k)
                    .zip(matching.iter())
                    .map(|(a, &b)| Factor::TwoPoint { neg: a, pos: k + b })
                    .collect();
                terms.push(KernelTerm {
                    coeff: Ratio::new(1, 1),
                    factors,
                    sign: SignAssignment::ThetaChannel { k },
                });
            }
        }
        // Structures with a conjoined block straddling the channel.
        if k < 2 || m < 2 {
            continue;
        }
        for b1 in 2..=k {
            for b2 in 2..=m {
                if k - b1 != m - b2 {
                    // Leftovers must match up in crossing pairs.
                    continue;
                }
                let coeff = Ratio::new((b1 * (b1 - 1)) as i64, (k * (k - 1)) as i64)
                    * Ratio::new((b2 * (b2 - 1)) as i64, (m * (m - 1)) as i64);
                for left_block in partition_subsets(k, b1) {
                    for right_block in partition_subsets(m, b2) {
                        let mut block: Vec<usize> = left_block.clone();
                        block.extend(right_block.iter().map(|&j| k + j));
                        let left_rest: Vec<usize> =
                            (1..=k).filter(|i| !left_block.contains(i)).collect();
                        let right_rest: Vec<usize> = (1..=m)
                            .filter(|j| !right_block.contains(j))
                            .map(|j| k + j)
                            .collect();
                        for matching in matchings(left_rest.len(), right_rest.len()) {
                            let mut factors = vec![Factor::Conjoined(block.clone())];
                            factors.extend(left_rest.iter().zip(matching.iter()).map(
                                |(&a, &b)| Factor::TwoPoint { neg: a, pos: right_rest[b - 1] },
                            ));
                            terms.push(KernelTerm {
                                coeff,
                                factors,
                                sign: SignAssignment::ThetaChannel { k },
                            });
                        }
                    }
                }
            }
        }
    }
    let list = TermList::from_terms(n, terms);
    list.validate()?;
    Ok(list)
}

/// All bijections of {1..a} onto {1..b} as images of 1..=a (empty unless
/// a = b; the empty matching for a = b = 0).
fn matchings(a: usize, b: usize) -> Vec<Vec<usize>> {
    if a != b {
        return Vec::new();
    }
    let mut perm: Vec<usize> = (1..=a).collect();
    let mut out = Vec::new();
    loop {
        out.push(perm.clone());
        if !next_permutation(&mut perm) {
            break;
        }
    }
    out
}

/// The connected part of the n-point kernel: the full-block structures with
/// their ordering weights, one term per channel size k ∈ {2, …, n−2}, each
/// with coefficient 1. Empty for n < 4.
pub fn connected_w(n: usize) -> TermList {
    if n < 4 {
        return TermList { n, terms: Vec::new() };
    }
    let terms = (2..=n - 2)
        .map(|k| KernelTerm {
            coeff: Ratio::new(1, 1),
            factors: vec![Factor::Conjoined((1..=n).collect())],
            sign: SignAssignment::ThetaChannel { k },
        })
        .collect();
    TermList { n, terms }
}

/// The kernel reduced for evaluation on positive-subalgebra inputs with k
/// starred slots and m unstarred: the V_{k,m} term list verbatim under the
/// fixed sign pattern (−)^k (+)^m. Pair terms whose δ-roles contradict the
/// pattern evaluate to exact zero downstream, so the list may be used as-is;
/// on such inputs its evaluation agrees with the full assembled kernel.
pub fn reduce_for_b(k: usize, m: usize, caps: &Caps) -> Result<TermList, KernelError> {
    let v = expand_v(k, m, caps)?;
    let mut signs = vec![-1i8; k];
    signs.extend(core::iter::repeat(1i8).take(m));
    let pattern = SignPattern::new(signs).expect("±1 entries only");
    let terms = v
        .terms
        .into_iter()
        .map(|t| KernelTerm { sign: SignAssignment::Fixed(pattern.clone()), ..t })
        .collect();
    Ok(TermList::from_terms(k + m, terms))
}

/// A term of a channel-expanded list: the set of negative-energy slots is
/// explicit (`negatives`; `None` when the source term had no sign
/// constraint).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelTerm {
    /// Exact rational coefficient.
    pub coeff: Coeff,
    /// Ascending negative-energy slots, or `None` for unconstrained terms.
    pub negatives: Option<Vec<usize>>,
    /// Factors in canonical order.
    pub factors: Vec<Factor>,
}

/// Relabels every factor index i ↦ map[i − 1], preserving δ-roles, and
/// restores canonical factor order.
pub fn relabel_factors(factors: &[Factor], map: &[usize]) -> Vec<Factor> {
    let mut out: Vec<Factor> = factors
        .iter()
        .map(|f| match f {
            Factor::Conjoined(ix) => {
                let mut ix: Vec<usize> = ix.iter().map(|&i| map[i - 1]).collect();
                ix.sort_unstable();
                Factor::Conjoined(ix)
            }
            Factor::TwoPoint { neg, pos } => {
                Factor::TwoPoint { neg: map[neg - 1], pos: map[pos - 1] }
            }
        })
        .collect();
    out.sort();
    out
}

/// Expands symbolic Θ terms over all channels: a `ThetaChannel { k }` term
/// yields one image per k-subset I of {1..n} under the order-preserving
/// relabeling {1..k} → I, {k+1..n} → complement; fixed-sign and
/// unconstrained terms pass through with explicit negatives.
pub fn expand_channels(list: &TermList) -> Vec<ChannelTerm> {
    let n = list.n;
    let mut out = Vec::new();
    for term in &list.terms {
        match &term.sign {
            SignAssignment::None => out.push(ChannelTerm {
                coeff: term.coeff,
                negatives: None,
                factors: term.factors.clone(),
            }),
            SignAssignment::Fixed(pattern) => {
                let negatives = pattern
                    .signs()
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s == -1)
                    .map(|(i, _)| i + 1)
                    .collect();
                out.push(ChannelTerm {
                    coeff: term.coeff,
                    negatives: Some(negatives),
                    factors: term.factors.clone(),
                });
            }
            SignAssignment::ThetaChannel { k } => {
                for subset in partition_subsets(n, *k) {
                    let complement: Vec<usize> =
                        (1..=n).filter(|i| !subset.contains(i)).collect();
                    let mut map = vec![0usize; n];
                    for (slot, &target) in subset.iter().chain(complement.iter()).enumerate() {
                        map[slot] = target;
                    }
                    out.push(ChannelTerm {
                        coeff: term.coeff,
                        negatives: Some(subset),
                        factors: relabel_factors(&term.factors, &map),
                    });
                }
            }
        }
    }
    out
}

/// A nonnegative atomic measure with finite moments; its n-th moment
/// c_n = Σ weight · λⁿ scales the conjoined factor on n legs.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMeasure {
    atoms: Vec<(f64, f64)>,
}

/// Error raised by measure construction.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureError {
    /// A weight was negative or non-finite, or an atom position non-finite.
    InvalidAtom {
        /// Offending (λ, weight) pair.
        atom: (f64, f64),
    },
    /// All weights vanished although atoms were supplied (c₀ must be > 0).
    ZeroMass,
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::InvalidAtom { atom } => {
                write!(f, "invalid measure atom (λ = {}, weight = {})", atom.0, atom.1)
            }
            MeasureError::ZeroMass => write!(f, "nonempty measure must have positive mass"),
        }
    }
}

impl MomentMeasure {
    /// Builds a measure from (λ, weight) atoms; weights must be ≥ 0 and the
    /// total mass positive unless the atom list is empty.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        for &atom in &atoms {
            if !atom.0.is_finite() || !atom.1.is_finite() || atom.1 < 0.0 {
                return Err(MeasureError::InvalidAtom { atom });
            }
        }
        if !atoms.is_empty() && atoms.iter().map(|a| a.1).sum::<f64>() <= 0.0 {
            return Err(MeasureError::ZeroMass);
        }
        Ok(MomentMeasure { atoms })
    }

    /// The empty measure: every moment vanishes (free-field limit).
    pub fn empty() -> Self {
        MomentMeasure { atoms: Vec::new() }
    }

    /// The atoms (λ, weight).
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// The n-th moment c_n = Σ weight · λⁿ.
    pub fn moment(&self, n: u32) -> f64 {
        self.atoms.iter().map(|&(l, w)| w * libm::pow(l, f64::from(n))).sum()
    }

    /// True when the measure has no atoms (all moments zero).
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}
