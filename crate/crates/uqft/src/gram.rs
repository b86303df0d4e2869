//! The sesquilinear pairing on positive-subalgebra state labels, Gram
//! matrices with a positivity verdict, the free-field matching-sum
//! cross-check, and cluster-decomposition scans.
//!
//! The pairing of two state labels `f`, `g` evaluates the functional on
//! `f* x g`: every pair of terms (degrees `k` and `m`) is fed to the
//! reduced kernel list for that degree split — symmetrized within each
//! side, because argument positions of a state label are not particle
//! labels — whose two-point factors become Gauss–Hermite pair overlaps
//! and whose conjoined factors become moment-scaled contraction
//! integrals. A [`PairingEngine`] shares one
//! grid plan and one set of caches across a whole family of evaluations,
//! so every Gram entry is assembled from literally the same factor
//! values — the positive-semidefinite structure of the continuum pairing
//! then survives discretisation instead of being approximated entry by
//! entry.
//!
//! For cross-validation the engine can also evaluate the *full*
//! symmetrized kernel (every frequency channel, not just the reduced
//! list); on positive-subalgebra labels the extra channels vanish
//! structurally, and the agreement of the two routes is a regression
//! invariant.

use crate::eigen::hermitian_eigenvalues;
use crate::quad::{
    contraction_integral, pair_overlap, pooled_contractions, slot_fingerprint, Estimate, GridPlan,
    QuadConfig, QuadError,
};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use uqft_core::algebra::{FourVector, FunctionSequence, Kinematics, PoincareTag, Slot};
use uqft_core::combinatorics::{factorial, next_permutation, Caps};
use uqft_core::kernel::{
    assemble_w, expand_channels, reduce_for_b, relabel_factors, ChannelTerm, Coeff, Factor,
    KernelError, MomentMeasure,
};

/// Largest particle number accepted on either side of a pairing; together
/// with [`MAX_BASIS`] this keeps the largest kernel degree at six, the
/// contraction engine's leg limit.
pub const MAX_SIDE_DEGREE: usize = 3;

/// Largest basis accepted by [`gram_matrix`].
pub const MAX_BASIS: usize = 16;

/// Relative eigenvalue floor: a Gram matrix passes the positivity check
/// when `min_eig ≥ −PSD_REL_FLOOR · max(max_eig, 0)`. The floor is
/// relative because every entry carries independent quadrature noise.
pub const PSD_REL_FLOOR: f64 = 1e-8;

/// Error raised by pairing and Gram-matrix evaluation.
#[derive(Debug, thiserror::Error)]
pub enum GramError {
    /// A quadrature routine failed (configuration, coverage, convergence).
    #[error("quadrature failed: {0}")]
    Quad(#[from] QuadError),
    /// A kernel expansion failed (cap exceeded or structural violation).
    #[error("kernel expansion failed: {0}")]
    Kernel(KernelError),
    /// A state label was not in the positive subalgebra (all slots must be
    /// lifted and unstarred).
    #[error("state labels must lie in the positive subalgebra (lifted, unstarred slots)")]
    NotInPositiveSubalgebra,
    /// A term exceeded the per-side particle cap.
    #[error("a term has {degree} particles on one side; the pairing supports at most {max}")]
    DegreeTooHigh {
        /// Offending particle number.
        degree: usize,
        /// Supported maximum.
        max: usize,
    },
    /// The Gram basis exceeded its size cap.
    #[error("basis has {size} vectors; at most {max} are supported")]
    BasisTooLarge {
        /// Offending basis size.
        size: usize,
        /// Supported maximum.
        max: usize,
    },
    /// A cluster scan was asked for the zero direction.
    #[error("cluster scans need a nonzero spatial direction")]
    InvalidDirection,
}

impl From<KernelError> for GramError {
    fn from(e: KernelError) -> Self {
        GramError::Kernel(e)
    }
}

/// A Gram matrix together with its spectrum and positivity verdict.
#[derive(Clone, Debug)]
pub struct GramReport {
    /// Hermitian pairing matrix (upper triangle computed, mirror conjugated).
    pub matrix: Vec<Vec<Complex64>>,
    /// Per-entry absolute error estimates (symmetric).
    pub entry_errors: Vec<Vec<f64>>,
    /// Real eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Smallest eigenvalue (0 for an empty basis).
    pub min_eig: f64,
    /// Largest eigenvalue (0 for an empty basis).
    pub max_eig: f64,
    /// Whether `min_eig ≥ −PSD_REL_FLOOR · max(max_eig, 0)`.
    pub psd: bool,
}

/// One sample of a cluster-decomposition scan.
#[derive(Clone, Debug)]
pub struct ClusterSample {
    /// Effective translation distance (the requested distance snapped to
    /// the position grid so the shift is exact).
    pub rho: f64,
    /// The pairing of `f` with the translated `g`.
    pub pairing: Estimate,
    /// `|pairing − conj(f₀)·g₀|`, the distance from the factorized limit.
    pub deviation: f64,
}

/// Interval-style product of two estimates.
fn product(a: Estimate, b: Estimate) -> Estimate {
    Estimate {
        value: a.value * b.value,
        error: a.value.norm() * b.error + b.value.norm() * a.error + a.error * b.error,
    }
}

/// Exact rational kernel coefficient as a float (one rounding).
fn coeff_f64(c: &Coeff) -> f64 {
    *c.numer() as f64 / *c.denom() as f64
}

/// The combined slot list for a pairing term: the left factors enter
/// starred in reversed order (the star anti-homomorphism), the right
/// factors as they are.
fn combined_slots(fslots: &[Slot], gslots: &[Slot]) -> Vec<Slot> {
    let mut out = Vec::with_capacity(fslots.len() + gslots.len());
    for s in fslots.iter().rev() {
        out.push(Slot { packet: s.packet.clone(), starred: true });
    }
    out.extend(gslots.iter().cloned());
    out
}

/// Conjoined-block legs in canonical order (sorted by fingerprint), so
/// that one multiset of legs maps to one cache key and one set of bits.
fn block_legs(ix: &[usize], negatives: &[usize], combined: &[Slot]) -> Vec<(Slot, i8)> {
    let mut legs: Vec<(Slot, i8)> = ix
        .iter()
        .map(|&i| {
            let sheet: i8 = if negatives.contains(&i) { -1 } else { 1 };
            (combined[i - 1].clone(), sheet)
        })
        .collect();
    legs.sort_by_key(|(slot, sheet)| (slot_fingerprint(slot), *sheet));
    legs
}

/// Cache key of a canonically-ordered leg list.
fn block_key(legs: &[(Slot, i8)]) -> Vec<(u64, i8)> {
    legs.iter().map(|(slot, sheet)| (slot_fingerprint(slot), *sheet)).collect()
}

/// The scalar (degree-zero) component of a sequence.
fn scalar_component(f: &FunctionSequence) -> Complex64 {
    f.terms()
        .iter()
        .filter(|t| t.slots.is_empty())
        .map(|t| t.coeff)
        .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
}

/// Work queued during a collection pass: distinct factor evaluations not
/// yet in the caches, flushed in one batch before assembly.
#[derive(Default)]
struct Pending {
    pair_keys: Vec<(u64, u64)>,
    pair_slots: Vec<(Slot, Slot)>,
    seen_pairs: BTreeSet<(u64, u64)>,
    block_keys: Vec<Vec<(u64, i8)>>,
    block_legs: Vec<Vec<(Slot, i8)>>,
    seen_blocks: BTreeSet<Vec<(u64, i8)>>,
}

/// Shared evaluation state for a family of pairings: one grid plan, one
/// pair-overlap cache, one contraction cache, and the expanded kernel
/// lists. All entries of a Gram matrix evaluated through one engine are
/// sums over identical factor values.
pub struct PairingEngine {
    kin: Kinematics,
    cfg: QuadConfig,
    measure: MomentMeasure,
    caps: Caps,
    plan: Option<GridPlan>,
    pair_cache: BTreeMap<(u64, u64), Estimate>,
    block_cache: BTreeMap<Vec<(u64, i8)>, Estimate>,
    reduced_lists: BTreeMap<(usize, usize), Vec<ChannelTerm>>,
    full_lists: BTreeMap<usize, Vec<ChannelTerm>>,
}

impl PairingEngine {
    /// Builds an engine whose grid plan covers every slot of `vectors`.
    /// Each vector must lie in the positive subalgebra with at most
    /// [`MAX_SIDE_DEGREE`] particles per term.
    pub fn new(
        vectors: &[&FunctionSequence],
        measure: &MomentMeasure,
        kin: &Kinematics,
        cfg: &QuadConfig,
    ) -> Result<Self, GramError> {
        cfg.validate().map_err(GramError::Quad)?;
        let mut slots: Vec<&Slot> = Vec::new();
        for v in vectors {
            validate_label(v)?;
            for term in v.terms() {
                slots.extend(term.slots.iter());
            }
        }
        let plan = if slots.is_empty() {
            None
        } else {
            Some(GridPlan::for_slots(&slots, kin, cfg)?)
        };
        Ok(PairingEngine {
            kin: *kin,
            cfg: cfg.clone(),
            measure: measure.clone(),
            caps: Caps::default(),
            plan,
            pair_cache: BTreeMap::new(),
            block_cache: BTreeMap::new(),
            reduced_lists: BTreeMap::new(),
            full_lists: BTreeMap::new(),
        })
    }

    /// The engine's position-grid step, if a grid plan exists.
    pub fn position_step(&self) -> Option<f64> {
        self.plan.as_ref().map(|p| p.du)
    }

    /// The pairing of two state labels through the reduced kernel lists.
    pub fn pairing(
        &mut self,
        f: &FunctionSequence,
        g: &FunctionSequence,
    ) -> Result<Estimate, GramError> {
        validate_label(f)?;
        validate_label(g)?;
        let mut pending = Pending::default();
        self.collect_pairing(f, g, &mut pending)?;
        self.flush(pending)?;
        self.assemble_pairing(f, g)
    }

    /// The same pairing through the full symmetrized kernel: every
    /// frequency channel of the degree-`k+m` expansion is evaluated, and
    /// the channels other than the reduced one vanish structurally on
    /// positive-subalgebra labels. Shares the factor caches with
    /// [`PairingEngine::pairing`], so the comparison of the two routes
    /// isolates the combinatorial reduction.
    pub fn pairing_via_full_kernel(
        &mut self,
        f: &FunctionSequence,
        g: &FunctionSequence,
    ) -> Result<Estimate, GramError> {
        validate_label(f)?;
        validate_label(g)?;
        let mut pending = Pending::default();
        for tf in f.terms() {
            for tg in g.terms() {
                let combined = combined_slots(&tf.slots, &tg.slots);
                let list = self.full_list(combined.len())?;
                self.collect_terms(&list, &combined, &mut pending);
            }
        }
        self.flush(pending)?;
        let mut total = Estimate::exact(Complex64::new(0.0, 0.0));
        for tf in f.terms() {
            for tg in g.terms() {
                let combined = combined_slots(&tf.slots, &tg.slots);
                let list = self.full_list(combined.len())?;
                let mut sum = Estimate::exact(Complex64::new(0.0, 0.0));
                for term in &list {
                    let part = self.term_value(term, &combined)?;
                    sum.value += part.value;
                    sum.error += part.error;
                }
                let c = tf.coeff.conj() * tg.coeff;
                total.value += sum.value * c;
                total.error += sum.error * c.norm();
            }
        }
        Ok(total)
    }

    /// Queues every yet-uncached factor of the (f, g) pairing.
    fn collect_pairing(
        &mut self,
        f: &FunctionSequence,
        g: &FunctionSequence,
        pending: &mut Pending,
    ) -> Result<(), GramError> {
        for tf in f.terms() {
            for tg in g.terms() {
                let (k, m) = (tf.slots.len(), tg.slots.len());
                if k == 0 || m == 0 {
                    continue;
                }
                let combined = combined_slots(&tf.slots, &tg.slots);
                let list = self.reduced_list(k, m)?;
                self.collect_terms(&list, &combined, pending);
            }
        }
        Ok(())
    }

    /// Queues the factors of a channel-term list on the given slots.
    fn collect_terms(&self, list: &[ChannelTerm], combined: &[Slot], pending: &mut Pending) {
        for term in list {
            let negatives: &[usize] = term.negatives.as_deref().unwrap_or(&[]);
            for factor in &term.factors {
                match factor {
                    Factor::TwoPoint { neg, pos } => {
                        let a = &combined[neg - 1];
                        let b = &combined[pos - 1];
                        let key = (slot_fingerprint(a), slot_fingerprint(b));
                        if !self.pair_cache.contains_key(&key) && pending.seen_pairs.insert(key) {
                            pending.pair_keys.push(key);
                            pending.pair_slots.push((a.clone(), b.clone()));
                        }
                    }
                    Factor::Conjoined(ix) => {
                        if self.measure.moment(ix.len() as u32) == 0.0 {
                            continue;
                        }
                        let legs = block_legs(ix, negatives, combined);
                        let key = block_key(&legs);
                        if !self.block_cache.contains_key(&key)
                            && pending.seen_blocks.insert(key.clone())
                        {
                            pending.block_keys.push(key);
                            pending.block_legs.push(legs);
                        }
                    }
                }
            }
        }
    }

    /// Evaluates all queued factors: pair overlaps in parallel, conjoined
    /// blocks through one pooled contraction pass.
    fn flush(&mut self, pending: Pending) -> Result<(), GramError> {
        if !pending.pair_keys.is_empty() {
            let kin = self.kin;
            let cfg = self.cfg.clone();
            let results: Vec<Result<Estimate, QuadError>> = pending
                .pair_slots
                .par_iter()
                .map(|(a, b)| pair_overlap(a, b, &kin, &cfg))
                .collect();
            for (key, res) in pending.pair_keys.into_iter().zip(results) {
                self.pair_cache.insert(key, res?);
            }
        }
        if !pending.block_keys.is_empty() {
            let plan = self
                .plan
                .as_ref()
                .ok_or(GramError::Quad(QuadError::Config("conjoined block without a grid plan")))?;
            let values = pooled_contractions(&pending.block_legs, plan, &self.kin)?;
            for (key, value) in pending.block_keys.into_iter().zip(values) {
                self.block_cache.insert(key, value);
            }
        }
        Ok(())
    }

    /// Assembles the pairing from cached factors (computing any stragglers
    /// on demand).
    fn assemble_pairing(
        &mut self,
        f: &FunctionSequence,
        g: &FunctionSequence,
    ) -> Result<Estimate, GramError> {
        let mut total = Estimate::exact(Complex64::new(0.0, 0.0));
        for tf in f.terms() {
            for tg in g.terms() {
                let (k, m) = (tf.slots.len(), tg.slots.len());
                let c = tf.coeff.conj() * tg.coeff;
                if k == 0 && m == 0 {
                    // Scalar against scalar: the degree-zero kernel is the
                    // bare unit.
                    total.value += c;
                    continue;
                }
                if k == 0 || m == 0 {
                    // Scalar against particles: every contribution carries
                    // on-shell energies of one sign only, so energy
                    // conservation has no support — an exact zero.
                    continue;
                }
                let combined = combined_slots(&tf.slots, &tg.slots);
                let list = self.reduced_list(k, m)?;
                let mut sum = Estimate::exact(Complex64::new(0.0, 0.0));
                for term in &list {
                    let part = self.term_value(term, &combined)?;
                    sum.value += part.value;
                    sum.error += part.error;
                }
                total.value += sum.value * c;
                total.error += sum.error * c.norm();
            }
        }
        Ok(total)
    }

    /// One channel term on the combined slots: the rational coefficient
    /// times two-point and moment-scaled conjoined factors. Any exactly
    /// vanishing factor short-circuits the whole term.
    fn term_value(
        &mut self,
        term: &ChannelTerm,
        combined: &[Slot],
    ) -> Result<Estimate, GramError> {
        let negatives: &[usize] = term.negatives.as_deref().unwrap_or(&[]);
        let mut acc = Estimate::exact(Complex64::new(coeff_f64(&term.coeff), 0.0));
        for factor in &term.factors {
            let part = match factor {
                Factor::TwoPoint { neg, pos } => {
                    self.pair(&combined[neg - 1], &combined[pos - 1])?
                }
                Factor::Conjoined(ix) => {
                    let c_eta = self.measure.moment(ix.len() as u32);
                    if c_eta == 0.0 {
                        return Ok(Estimate::zero());
                    }
                    let j = self.block(ix, negatives, combined)?;
                    Estimate { value: j.value * c_eta, error: j.error * c_eta.abs() }
                }
            };
            if part.value.norm() == 0.0 && part.error == 0.0 {
                return Ok(Estimate::zero());
            }
            acc = product(acc, part);
        }
        Ok(acc)
    }

    /// Cached two-point factor.
    fn pair(&mut self, a: &Slot, b: &Slot) -> Result<Estimate, GramError> {
        let key = (slot_fingerprint(a), slot_fingerprint(b));
        if let Some(e) = self.pair_cache.get(&key) {
            return Ok(*e);
        }
        let e = pair_overlap(a, b, &self.kin, &self.cfg)?;
        self.pair_cache.insert(key, e);
        Ok(e)
    }

    /// Cached contraction integral of one conjoined block (unscaled by the
    /// measure moment).
    fn block(
        &mut self,
        ix: &[usize],
        negatives: &[usize],
        combined: &[Slot],
    ) -> Result<Estimate, GramError> {
        let legs = block_legs(ix, negatives, combined);
        let key = block_key(&legs);
        if let Some(e) = self.block_cache.get(&key) {
            return Ok(*e);
        }
        let plan = self
            .plan
            .as_ref()
            .ok_or(GramError::Quad(QuadError::Config("conjoined block without a grid plan")))?;
        let e = contraction_integral(&legs, plan, &self.kin)?;
        self.block_cache.insert(key, e);
        Ok(e)
    }

    /// The reduced channel list for a (k, m) degree split, symmetrized
    /// within each side and cached.
    fn reduced_list(&mut self, k: usize, m: usize) -> Result<Vec<ChannelTerm>, GramError> {
        if !self.reduced_lists.contains_key(&(k, m)) {
            let list = reduce_for_b(k, m, &self.caps)?;
            let channels = symmetrize_within_sides(&expand_channels(&list), k, m);
            self.reduced_lists.insert((k, m), channels);
        }
        Ok(self.reduced_lists[&(k, m)].clone())
    }

    /// The fully expanded channel list of the degree-n kernel, cached.
    fn full_list(&mut self, n: usize) -> Result<Vec<ChannelTerm>, GramError> {
        if !self.full_lists.contains_key(&n) {
            let list = assemble_w(n, &self.caps)?;
            self.full_lists.insert(n, expand_channels(&list));
        }
        Ok(self.full_lists[&n].clone())
    }
}

/// Averages a reduced channel list over relabelings within each side of the
/// degree split: slots 1..=k over themselves and slots k+1..=k+m over
/// themselves, each image weighted by 1/(k!·m!), with like images merged
/// exactly.
///
/// The pairing acts on symmetrized state labels — the argument positions of
/// a label are not particle labels — so the reduced kernel must see the
/// orbit average of its inputs. Relabeling the kernel instead of the slots
/// is equivalent and keeps the factor caches effective. Structures that are
/// already symmetric (the full conjoined block, the complete set of
/// crossing matchings) are unchanged; an anchored block-plus-pair structure
/// spreads into its orbit with fractional weights, reproducing exactly the
/// surviving channels of the full symmetrized kernel.
fn symmetrize_within_sides(channels: &[ChannelTerm], k: usize, m: usize) -> Vec<ChannelTerm> {
    let order = factorial(k) * factorial(m);
    if order <= 1 {
        return channels.to_vec();
    }
    let weight = Coeff::new(1, order);
    let mut merged: BTreeMap<(Option<Vec<usize>>, Vec<Factor>), Coeff> = BTreeMap::new();
    let mut left: Vec<usize> = (1..=k).collect();
    loop {
        let mut right: Vec<usize> = (1..=m).collect();
        loop {
            let map: Vec<usize> =
                left.iter().copied().chain(right.iter().map(|&j| k + j)).collect();
            for term in channels {
                // Within-side maps fix the negative set {1..k} as a set.
                let key = (term.negatives.clone(), relabel_factors(&term.factors, &map));
                *merged.entry(key).or_insert_with(|| Coeff::new(0, 1)) += term.coeff * weight;
            }
            if !next_permutation(&mut right) {
                break;
            }
        }
        if !next_permutation(&mut left) {
            break;
        }
    }
    merged
        .into_iter()
        .filter(|(_, coeff)| *coeff != Coeff::new(0, 1))
        .map(|((negatives, factors), coeff)| ChannelTerm { coeff, negatives, factors })
        .collect()
}

/// Checks that a sequence is a valid state label: in the positive
/// subalgebra and within the per-side particle cap.
fn validate_label(f: &FunctionSequence) -> Result<(), GramError> {
    if !f.in_positive_subalgebra() {
        return Err(GramError::NotInPositiveSubalgebra);
    }
    let degree = f.max_degree();
    if degree > MAX_SIDE_DEGREE {
        return Err(GramError::DegreeTooHigh { degree, max: MAX_SIDE_DEGREE });
    }
    Ok(())
}

/// The pairing of two positive-subalgebra state labels, with propagated
/// quadrature error. Conjugate-symmetric: swapping the arguments
/// conjugates the value (the factor integrals conjugate pointwise).
pub fn eval_pairing(
    f: &FunctionSequence,
    g: &FunctionSequence,
    measure: &MomentMeasure,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<Estimate, GramError> {
    let mut engine = PairingEngine::new(&[f, g], measure, kin, cfg)?;
    engine.pairing(f, g)
}

/// [`eval_pairing`] through the full symmetrized kernel (all frequency
/// channels); agreement with the reduced route is a regression invariant.
pub fn eval_pairing_via_w(
    f: &FunctionSequence,
    g: &FunctionSequence,
    measure: &MomentMeasure,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<Estimate, GramError> {
    let mut engine = PairingEngine::new(&[f, g], measure, kin, cfg)?;
    engine.pairing_via_full_kernel(f, g)
}

/// The Gram matrix of a basis of state labels, its spectrum, and the
/// positivity verdict. The upper triangle is evaluated and mirrored, so
/// the report matrix is Hermitian by construction; independent evaluation
/// of both triangles agrees to pointwise-conjugation accuracy and is
/// exercised by the regression tests.
pub fn gram_matrix(
    basis: &[FunctionSequence],
    measure: &MomentMeasure,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<GramReport, GramError> {
    if basis.len() > MAX_BASIS {
        return Err(GramError::BasisTooLarge { size: basis.len(), max: MAX_BASIS });
    }
    let n = basis.len();
    if n == 0 {
        return Ok(GramReport {
            matrix: Vec::new(),
            entry_errors: Vec::new(),
            eigenvalues: Vec::new(),
            min_eig: 0.0,
            max_eig: 0.0,
            psd: true,
        });
    }
    let refs: Vec<&FunctionSequence> = basis.iter().collect();
    let mut engine = PairingEngine::new(&refs, measure, kin, cfg)?;
    let mut pending = Pending::default();
    for i in 0..n {
        for j in i..n {
            engine.collect_pairing(&basis[i], &basis[j], &mut pending)?;
        }
    }
    engine.flush(pending)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut matrix = vec![vec![zero; n]; n];
    let mut entry_errors = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i..n {
            let e = engine.assemble_pairing(&basis[i], &basis[j])?;
            if i == j {
                matrix[i][i] = Complex64::new(e.value.re, 0.0);
                entry_errors[i][i] = e.error;
            } else {
                matrix[i][j] = e.value;
                matrix[j][i] = e.value.conj();
                entry_errors[i][j] = e.error;
                entry_errors[j][i] = e.error;
            }
        }
    }
    let eigenvalues = hermitian_eigenvalues(&matrix);
    let min_eig = eigenvalues.first().copied().unwrap_or(0.0);
    let max_eig = eigenvalues.last().copied().unwrap_or(0.0);
    let psd = min_eig >= -PSD_REL_FLOOR * max_eig.max(0.0);
    Ok(GramReport { matrix, entry_errors, eigenvalues, min_eig, max_eig, psd })
}

/// The free-field pairing: particle numbers are orthogonal, and equal
/// numbers pair through the matching sum — the permanent of the
/// single-particle overlap matrix. Independent of the kernel pipeline;
/// used to cross-check the full evaluation at vanishing interaction.
pub fn free_field_oracle(
    f: &FunctionSequence,
    g: &FunctionSequence,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<Estimate, GramError> {
    validate_label(f)?;
    validate_label(g)?;
    let mut total = Estimate::exact(Complex64::new(0.0, 0.0));
    for tf in f.terms() {
        for tg in g.terms() {
            let (k, m) = (tf.slots.len(), tg.slots.len());
            if k != m {
                continue;
            }
            let c = tf.coeff.conj() * tg.coeff;
            if k == 0 {
                total.value += c;
                continue;
            }
            let mut overlaps = vec![vec![Estimate::zero(); m]; k];
            for (i, fs) in tf.slots.iter().enumerate() {
                for (j, gs) in tg.slots.iter().enumerate() {
                    let a = Slot { packet: fs.packet.clone(), starred: true };
                    overlaps[i][j] = pair_overlap(&a, gs, kin, cfg)?;
                }
            }
            let perm = permanent(&overlaps);
            total.value += perm.value * c;
            total.error += perm.error * c.norm();
        }
    }
    Ok(total)
}

/// Permanent of a square estimate matrix by recursive column selection
/// (the matching sum over all bijections).
fn permanent(mat: &[Vec<Estimate>]) -> Estimate {
    fn go(mat: &[Vec<Estimate>], row: usize, used: &mut [bool]) -> Estimate {
        if row == mat.len() {
            return Estimate::exact(Complex64::new(1.0, 0.0));
        }
        let mut sum = Estimate::exact(Complex64::new(0.0, 0.0));
        for col in 0..mat.len() {
            if used[col] {
                continue;
            }
            used[col] = true;
            let rest = go(mat, row + 1, used);
            used[col] = false;
            let part = product(mat[row][col], rest);
            sum.value += part.value;
            sum.error += part.error;
        }
        sum
    }
    let mut used = vec![false; mat.len()];
    go(mat, 0, &mut used)
}

/// Pairs `f` against spatial translates of `g` along `direction` and
/// reports the distance from the factorized limit `conj(f₀)·g₀` at each
/// separation. Distances are snapped to the position grid so translations
/// reduce to exact index shifts; all separations share one pooled
/// contraction pass.
pub fn cluster_scan(
    f: &FunctionSequence,
    g: &FunctionSequence,
    direction: [f64; 3],
    rhos: &[f64],
    measure: &MomentMeasure,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<Vec<ClusterSample>, GramError> {
    let norm = (direction[0] * direction[0]
        + direction[1] * direction[1]
        + direction[2] * direction[2])
        .sqrt();
    if !(norm > 0.0) {
        return Err(GramError::InvalidDirection);
    }
    let unit = [direction[0] / norm, direction[1] / norm, direction[2] / norm];
    let mut engine = PairingEngine::new(&[f, g], measure, kin, cfg)?;
    let du = engine.position_step();
    let factorized = scalar_component(f).conj() * scalar_component(g);
    let mut translates: Vec<(f64, FunctionSequence)> = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let mut shift = [rho * unit[0], rho * unit[1], rho * unit[2]];
        if let Some(du) = du {
            for c in &mut shift {
                *c = (*c / du).round() * du;
            }
        }
        let effective =
            (shift[0] * shift[0] + shift[1] * shift[1] + shift[2] * shift[2]).sqrt();
        translates.push((effective, translated_sequence(g, shift)));
    }
    let mut pending = Pending::default();
    for (_, gt) in &translates {
        engine.collect_pairing(f, gt, &mut pending)?;
    }
    engine.flush(pending)?;
    let mut out = Vec::with_capacity(translates.len());
    for (rho, gt) in &translates {
        let pairing = engine.assemble_pairing(f, gt)?;
        let deviation = (pairing.value - factorized).norm();
        out.push(ClusterSample { rho: *rho, pairing, deviation });
    }
    Ok(out)
}

/// `g` with every slot translated by the purely spatial `shift`.
fn translated_sequence(g: &FunctionSequence, shift: [f64; 3]) -> FunctionSequence {
    if shift == [0.0; 3] {
        return g.clone();
    }
    let tag = PoincareTag::translation_only(FourVector::new(0.0, shift));
    let terms = g
        .terms()
        .iter()
        .map(|t| uqft_core::algebra::SeqTerm {
            coeff: t.coeff,
            slots: t
                .slots
                .iter()
                .map(|s| Slot { packet: s.packet.transformed(&tag), starred: s.starred })
                .collect(),
        })
        .collect();
    FunctionSequence::from_terms(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::two_point_overlap;
    use uqft_core::algebra::{seq_product, GaussianPacket};

    fn kin() -> Kinematics {
        Kinematics::new(1.0).expect("unit mass")
    }

    fn lifted(center: [f64; 3], width: f64) -> GaussianPacket {
        GaussianPacket::new(center, width, 0.0)
            .and_then(|p| p.lift())
            .expect("valid lifted packet")
    }

    fn one_particle(center: [f64; 3]) -> FunctionSequence {
        FunctionSequence::from_packet(lifted(center, 5.0))
    }

    fn two_particle(c1: [f64; 3], c2: [f64; 3]) -> FunctionSequence {
        seq_product(&one_particle(c1), &one_particle(c2))
    }

    fn measure() -> MomentMeasure {
        MomentMeasure::new(vec![(0.5, 0.3)]).expect("valid measure")
    }

    fn cfg() -> QuadConfig {
        QuadConfig::coarse()
    }

    #[test]
    fn unit_sequences_pair_to_exactly_one() {
        let unit = FunctionSequence::unit();
        let e = eval_pairing(&unit, &unit, &measure(), &kin(), &cfg()).expect("pairing");
        assert_eq!(e.value, Complex64::new(1.0, 0.0), "⟨1,1⟩ must be the exact unit");
        assert_eq!(e.error, 0.0, "the scalar pairing carries no quadrature error");
    }

    #[test]
    fn scalar_against_particle_sequences_vanishes_exactly() {
        let unit = FunctionSequence::unit();
        let g = one_particle([0.2, 0.0, 0.0]);
        let a = eval_pairing(&unit, &g, &measure(), &kin(), &cfg()).expect("pairing");
        let b = eval_pairing(&g, &unit, &measure(), &kin(), &cfg()).expect("pairing");
        assert_eq!(a.value.norm(), 0.0, "one-sided energies cannot conserve: ⟨1,g⟩ = 0");
        assert_eq!(b.value.norm(), 0.0, "one-sided energies cannot conserve: ⟨g,1⟩ = 0");
        // The full kernel reaches the same zeros structurally, channel by
        // channel, rather than by the degree shortcut.
        let w = eval_pairing_via_w(&unit, &g, &measure(), &kin(), &cfg()).expect("pairing");
        assert_eq!(w.value.norm(), 0.0, "all channels of the one-sided pairing vanish");
        assert_eq!(w.error, 0.0, "structural zeros carry no error bar");
    }

    #[test]
    fn single_packets_pair_through_the_two_point_overlap() {
        let fp = lifted([0.1, -0.2, 0.0], 5.0);
        let gp = lifted([0.0, 0.15, 0.1], 5.0);
        let f = FunctionSequence::from_packet(fp.clone());
        let g = FunctionSequence::from_packet(gp.clone());
        let via_pairing = eval_pairing(&f, &g, &measure(), &kin(), &cfg()).expect("pairing");
        let direct = two_point_overlap(&fp, &gp, &kin(), &cfg()).expect("overlap");
        assert_eq!(
            via_pairing.value, direct.value,
            "degree (1,1) reduces to the bare two-point factor, bit for bit"
        );
    }

    #[test]
    fn pairing_is_conjugate_symmetric_across_independent_engines() {
        let f = two_particle([0.3, 0.0, 0.0], [-0.3, 0.1, 0.0]);
        let g = two_particle([0.0, 0.25, 0.0], [0.1, -0.2, 0.0]);
        let ab = eval_pairing(&f, &g, &measure(), &kin(), &cfg()).expect("pairing");
        let ba = eval_pairing(&g, &f, &measure(), &kin(), &cfg()).expect("pairing");
        let scale = ab.value.norm().max(1e-30);
        assert!(
            (ab.value - ba.value.conj()).norm() <= 1e-12 * scale,
            "swapping the arguments must conjugate the pairing: {} vs conj {}",
            ab.value,
            ba.value.conj()
        );
    }

    #[test]
    fn reduced_and_full_kernel_evaluations_agree_on_state_labels() {
        let f1 = one_particle([0.2, 0.0, 0.0]);
        let g1 = one_particle([-0.1, 0.1, 0.0]);
        let f2 = two_particle([0.3, 0.0, 0.0], [-0.3, 0.0, 0.0]);
        let g2 = two_particle([0.0, 0.3, 0.0], [0.0, -0.3, 0.0]);
        // Three distinct packets per side: the first split whose anchored
        // block-plus-pair structure is not already symmetric, so the
        // comparison exercises the within-side orbit average.
        let f3 = seq_product(&two_particle([0.3, 0.0, 0.0], [-0.2, 0.2, 0.0]), &g1);
        let g3 = seq_product(&two_particle([0.0, 0.25, 0.1], [0.1, -0.3, 0.0]), &f1);
        let m = measure();
        let (kin, cfg) = (kin(), cfg());
        for (f, g) in [(&f1, &g1), (&f2, &g2), (&f3, &g3)] {
            let mut engine = PairingEngine::new(&[f, g], &m, &kin, &cfg).expect("engine");
            let reduced = engine.pairing(f, g).expect("reduced route");
            let full = engine.pairing_via_full_kernel(f, g).expect("full route");
            let scale = reduced.value.norm().max(1e-30);
            let slack = 1e-9 * scale + reduced.error + full.error;
            assert!(
                (reduced.value - full.value).norm() <= slack,
                "full kernel must reproduce the reduced evaluation: {} vs {}",
                full.value,
                reduced.value
            );
        }
    }

    #[test]
    fn within_side_symmetrization_spreads_anchored_structures_over_their_orbit() {
        let channels = expand_channels(&reduce_for_b(3, 3, &Caps::default()).expect("reduced"));
        let symmetrized = symmetrize_within_sides(&channels, 3, 3);
        let coeff_of = |factors: &[Factor]| -> Option<Coeff> {
            symmetrized.iter().find(|t| t.factors == factors).map(|t| t.coeff)
        };
        // The full block is orbit-invariant and keeps its unit weight.
        let full_block = vec![Factor::Conjoined(vec![1, 2, 3, 4, 5, 6])];
        assert_eq!(coeff_of(&full_block), Some(Coeff::new(1, 1)));
        // The anchored block-plus-pair structure spreads over the nine
        // images with weight 4/36 each.
        for (pair_neg, pair_pos) in [(1, 6), (2, 5), (3, 4)] {
            let block: Vec<usize> =
                (1..=6).filter(|i| *i != pair_neg && *i != pair_pos).collect();
            let factors = {
                let mut fs =
                    vec![Factor::Conjoined(block), Factor::TwoPoint { neg: pair_neg, pos: pair_pos }];
                fs.sort();
                fs
            };
            assert_eq!(
                coeff_of(&factors),
                Some(Coeff::new(1, 9)),
                "each block-plus-pair image must carry weight 1/9"
            );
        }
        // Every crossing matching keeps unit weight.
        let matching = vec![
            Factor::TwoPoint { neg: 1, pos: 4 },
            Factor::TwoPoint { neg: 2, pos: 5 },
            Factor::TwoPoint { neg: 3, pos: 6 },
        ];
        assert_eq!(coeff_of(&matching), Some(Coeff::new(1, 1)));
        // Total weight is conserved by the averaging.
        let total_before: Coeff =
            channels.iter().map(|t| t.coeff).fold(Coeff::new(0, 1), |a, b| a + b);
        let total_after: Coeff =
            symmetrized.iter().map(|t| t.coeff).fold(Coeff::new(0, 1), |a, b| a + b);
        assert_eq!(total_before, total_after, "orbit averaging must conserve total weight");
    }

    #[test]
    fn empty_measure_pairing_matches_the_free_field_matching_sum() {
        let free = MomentMeasure::empty();
        let (kin, cfg) = (kin(), cfg());
        let f = two_particle([0.2, 0.0, 0.0], [-0.1, 0.15, 0.0]);
        let g = two_particle([0.0, 0.1, 0.1], [0.1, 0.0, -0.1]);
        let via_pairing = eval_pairing(&f, &g, &free, &kin, &cfg).expect("pairing");
        let via_oracle = free_field_oracle(&f, &g, &kin, &cfg).expect("oracle");
        let scale = via_oracle.value.norm().max(1e-30);
        assert!(
            (via_pairing.value - via_oracle.value).norm() <= 1e-8 * scale,
            "free pairing must equal the matching sum: {} vs {}",
            via_pairing.value,
            via_oracle.value
        );
        // Mismatched particle numbers are orthogonal for the free kernel.
        let h = one_particle([0.0, 0.0, 0.2]);
        let cross = eval_pairing(&f, &h, &free, &kin, &cfg).expect("pairing");
        assert_eq!(cross.value.norm(), 0.0, "1↔2 particle overlap vanishes at zero interaction");
        assert_eq!(
            free_field_oracle(&f, &h, &kin, &cfg).expect("oracle").value.norm(),
            0.0,
            "the matching sum is empty across particle numbers"
        );
    }

    #[test]
    fn identical_packet_pairs_double_the_squared_overlap() {
        let free = MomentMeasure::empty();
        let (kin, cfg) = (kin(), cfg());
        let p = lifted([0.1, 0.1, 0.0], 5.0);
        let f = seq_product(
            &FunctionSequence::from_packet(p.clone()),
            &FunctionSequence::from_packet(p.clone()),
        );
        let pairing = eval_pairing(&f, &f, &free, &kin, &cfg).expect("pairing");
        let single = two_point_overlap(&p, &p, &kin, &cfg).expect("overlap");
        let expected = 2.0 * single.value * single.value;
        let scale = expected.norm();
        assert!(
            (pairing.value - expected).norm() <= 1e-10 * scale,
            "both matchings of two identical packets contribute (overlap)²: {} vs {}",
            pairing.value,
            expected
        );
    }

    #[test]
    fn gram_of_a_single_vector_is_its_positive_norm() {
        let f = one_particle([0.1, 0.0, 0.0]);
        let report =
            gram_matrix(std::slice::from_ref(&f), &measure(), &kin(), &cfg()).expect("gram");
        assert_eq!(report.matrix.len(), 1);
        assert_eq!(report.eigenvalues.len(), 1);
        assert!(report.matrix[0][0].re > 0.0, "a packet's squared norm is positive");
        assert_eq!(report.matrix[0][0].im, 0.0, "the mirrored diagonal is exactly real");
        assert!(report.psd, "a 1×1 positive matrix passes the spectrum check");
        assert!(
            (report.eigenvalues[0] - report.matrix[0][0].re).abs()
                <= 1e-12 * report.matrix[0][0].re,
            "the single eigenvalue is the diagonal entry"
        );
    }

    #[test]
    fn gram_matrix_is_hermitian_and_psd_on_a_mixed_basis() {
        let scalar_plus = FunctionSequence::unit().add(&one_particle([0.2, 0.0, 0.0]));
        let basis = vec![
            scalar_plus,
            one_particle([-0.1, 0.2, 0.0]),
            two_particle([0.3, 0.0, 0.0], [-0.3, 0.0, 0.0]),
        ];
        let report = gram_matrix(&basis, &measure(), &kin(), &cfg()).expect("gram");
        assert_eq!(report.matrix.len(), 3);
        for i in 0..3 {
            assert!(
                report.matrix[i][i].re >= -report.entry_errors[i][i],
                "diagonal entries are squared semi-norms"
            );
            for j in 0..3 {
                assert_eq!(
                    report.matrix[i][j],
                    report.matrix[j][i].conj(),
                    "the report matrix is Hermitian by construction"
                );
            }
        }
        assert!(
            report.min_eig >= -PSD_REL_FLOOR * report.max_eig.max(0.0),
            "positivity: min eigenvalue {} vs max {}",
            report.min_eig,
            report.max_eig
        );
        assert!(report.psd, "the verdict field mirrors the eigenvalue check");
    }

    #[test]
    fn pairing_scales_quartically_under_amplitude_doubling() {
        let f = two_particle([0.2, 0.0, 0.0], [-0.2, 0.0, 0.0]);
        let doubled = f.scale(Complex64::new(2.0, 0.0));
        let base = eval_pairing(&f, &f, &measure(), &kin(), &cfg()).expect("pairing");
        let big = eval_pairing(&doubled, &doubled, &measure(), &kin(), &cfg()).expect("pairing");
        assert!(
            (big.value - 4.0 * base.value).norm() <= 1e-14 * base.value.norm(),
            "⟨2f,2f⟩ = 4⟨f,f⟩ exactly through the coefficient algebra"
        );
    }

    #[test]
    fn cauchy_schwarz_holds_on_a_regression_pair() {
        let f = two_particle([0.25, 0.0, 0.0], [-0.25, 0.0, 0.0]);
        let g = two_particle([0.0, 0.2, 0.0], [0.0, -0.2, 0.0]);
        let m = measure();
        let (kin, cfg) = (kin(), cfg());
        let refs: Vec<&FunctionSequence> = vec![&f, &g];
        let mut engine = PairingEngine::new(&refs, &m, &kin, &cfg).expect("engine");
        let fg = engine.pairing(&f, &g).expect("⟨f,g⟩");
        let ff = engine.pairing(&f, &f).expect("⟨f,f⟩");
        let gg = engine.pairing(&g, &g).expect("⟨g,g⟩");
        let lhs = fg.value.norm_sqr();
        let rhs = ff.value.re * gg.value.re;
        let slack = 2.0 * fg.value.norm() * fg.error
            + ff.error * gg.value.re.abs()
            + gg.error * ff.value.re.abs();
        assert!(
            lhs <= rhs + slack + 1e-14 * rhs.abs(),
            "Cauchy–Schwarz: |⟨f,g⟩|² = {lhs} must not exceed ‖f‖²‖g‖² = {rhs}"
        );
    }

    #[test]
    fn cluster_scan_of_scalar_sequences_is_flat_zero() {
        let unit = FunctionSequence::unit();
        let samples = cluster_scan(
            &unit,
            &unit,
            [1.0, 0.0, 0.0],
            &[0.0, 5.0, 50.0],
            &measure(),
            &kin(),
            &cfg(),
        )
        .expect("scan");
        assert_eq!(samples.len(), 3);
        for s in &samples {
            assert_eq!(s.deviation, 0.0, "scalar sequences are translation-invariant");
        }
    }

    #[test]
    fn cluster_scan_deviation_decays_with_separation() {
        let f = one_particle([0.0, 0.0, 0.0]);
        let g = one_particle([0.05, 0.0, 0.0]);
        let rhos = [0.0, 10.0, 25.0];
        let samples =
            cluster_scan(&f, &g, [0.0, 0.0, 1.0], &rhos, &measure(), &kin(), &cfg())
                .expect("scan");
        assert!(samples[0].deviation > 0.0, "coincident packets overlap");
        assert!(
            samples[1].deviation < samples[0].deviation,
            "deviation at ρ≈10 ({}) must fall below ρ=0 ({})",
            samples[1].deviation,
            samples[0].deviation
        );
        assert!(
            samples[2].deviation < samples[1].deviation,
            "deviation keeps falling with separation: {} vs {}",
            samples[2].deviation,
            samples[1].deviation
        );
    }

    #[test]
    fn invalid_labels_and_inputs_are_rejected() {
        let bare = GaussianPacket::new([0.0; 3], 5.0, 0.0).expect("packet");
        let unlifted = FunctionSequence::from_packet(bare);
        let m = measure();
        let (kin, cfg) = (kin(), cfg());
        assert!(
            matches!(
                eval_pairing(&unlifted, &unlifted, &m, &kin, &cfg),
                Err(GramError::NotInPositiveSubalgebra)
            ),
            "unlifted slots are outside the positive subalgebra"
        );
        let two = two_particle([0.1, 0.0, 0.0], [-0.1, 0.0, 0.0]);
        let four = seq_product(&two, &two);
        assert!(
            matches!(
                eval_pairing(&four, &four, &m, &kin, &cfg),
                Err(GramError::DegreeTooHigh { degree: 4, max: MAX_SIDE_DEGREE })
            ),
            "four particles on one side exceed the cap"
        );
        let f = one_particle([0.0; 3]);
        assert!(
            matches!(
                cluster_scan(&f, &f, [0.0; 3], &[1.0], &m, &kin, &cfg),
                Err(GramError::InvalidDirection)
            ),
            "the zero direction has no scan axis"
        );
        let big = vec![FunctionSequence::unit(); MAX_BASIS + 1];
        assert!(
            matches!(
                gram_matrix(&big, &m, &kin, &cfg),
                Err(GramError::BasisTooLarge { size: 17, max: MAX_BASIS })
            ),
            "the basis cap is enforced"
        );
    }
}
