//! Enumeration and ordering combinatorics for the kernel expansion.
//!
//! Everything here is exact: perfect pairings, set partitions, k-subsets,
//! sign patterns, the energy-ordering indicator Θ, and a generic normalized
//! symmetrizer over permutations with rational weights. Enumeration orders are
//! deterministic and documented so rendered expansions are reproducible
//! token for token.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;

/// Enumeration limits for the potentially explosive operations.
///
/// The limits are configuration, not hard-wired constants: callers that know
/// their budget may raise them. Defaults match the sizes the construction is
/// exercised at (partitions of up to 10 points, symmetrization over up to 8
/// arguments).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Largest n accepted by [`enumerate_partitions`].
    pub partition_max: usize,
    /// Largest n accepted by [`symmetrize`].
    pub symmetrize_max: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { partition_max: 10, symmetrize_max: 8 }
    }
}

/// Error raised when an enumeration would exceed its configured cap or its
/// arguments are out of range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnumError {
    /// `n` exceeded the configured cap for the requested enumeration.
    CapExceeded {
        /// Requested size.
        n: usize,
        /// Configured limit.
        cap: usize,
    },
    /// The argument was outside the operation's domain (e.g. odd pairing size).
    Domain(&'static str),
}

impl fmt::Display for EnumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnumError::CapExceeded { n, cap } => {
                write!(f, "size {n} exceeds configured cap {cap}")
            }
            EnumError::Domain(msg) => write!(f, "{msg}"),
        }
    }
}

/// A perfect pairing of {1, …, n} (n even): disjoint pairs (i, j) with i < j
/// covering every index.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pairing {
    pairs: Vec<(usize, usize)>,
}

impl Pairing {
    /// The pairs, each ascending, ordered by first element.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Number of points covered (2 × number of pairs).
    pub fn size(&self) -> usize {
        self.pairs.len() * 2
    }
}

/// A partition of {1, …, n} into non-empty blocks. Blocks are ascending
/// internally and ordered by their least element, so the representation is
/// canonical.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SetPartition {
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// The blocks, each ascending, ordered by least element.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Number of blocks ℓ.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }
}

/// A pattern of nonzero energy signs, one per argument slot.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SignPattern {
    signs: Vec<i8>,
}

impl SignPattern {
    /// Builds a pattern from ±1 entries. Zero (or any other value) is
    /// rejected: the ordering indicator is undefined at vanishing energy.
    pub fn new(signs: Vec<i8>) -> Result<Self, EnumError> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(EnumError::Domain("sign pattern entries must be +1 or -1"));
        }
        Ok(SignPattern { signs })
    }

    /// The sign entries.
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Number of slots.
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    /// Whether the pattern has no slots.
    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// Enumerates all perfect pairings of {1, …, n}.
///
/// `n` must be even (n = 0 yields the single empty pairing). The order is
/// deterministic: at each step the least unpaired index is matched with each
/// larger unpaired index in ascending order.
pub fn enumerate_pairings(n: usize) -> Result<Vec<Pairing>, EnumError> {
    if n % 2 != 0 {
        return Err(EnumError::Domain("perfect pairings require an even point count"));
    }
    let mut out = Vec::new();
    let mut used = vec![false; n + 1];
    let mut acc = Vec::with_capacity(n / 2);
    pairings_rec(n, &mut used, &mut acc, &mut out);
    Ok(out)
}

fn pairings_rec(
    n: usize,
    used: &mut [bool],
    acc: &mut Vec<(usize, usize)>,
    out: &mut Vec<Pairing>,
) {
    let Some(first) = (1..=n).find(|&i| !used[i]) else {
        out.push(Pairing { pairs: acc.clone() });
        return;
    };
    used[first] = true;
    for j in first + 1..=n {
        if used[j] {
            continue;
        }
        used[j] = true;
        acc.push((first, j));
        pairings_rec(n, used, acc, out);
        acc.pop();
        used[j] = false;
    }
    used[first] = false;
}

/// Enumerates all set partitions of {1, …, n}, grouped by block count:
/// partitions with fewer blocks come first, and within a block count the
/// order is lexicographic in the canonical block representation.
///
/// Requires 1 ≤ n ≤ `caps.partition_max`.
pub fn enumerate_partitions(n: usize, caps: &Caps) -> Result<Vec<SetPartition>, EnumError> {
    if n == 0 {
        return Err(EnumError::Domain("set partitions require at least one point"));
    }
    if n > caps.partition_max {
        return Err(EnumError::CapExceeded { n, cap: caps.partition_max });
    }
    // Restricted growth strings: assignment[i] is the block of point i+1, with
    // assignment[0] = 0 and each next label at most one past the current max.
    let mut out = Vec::new();
    let mut assignment = vec![0usize; n];
    rgs_rec(1, 0, &mut assignment, &mut out);
    out.sort_by(|a, b| (a.block_count(), &a.blocks).cmp(&(b.block_count(), &b.blocks)));
    Ok(out)
}

fn rgs_rec(pos: usize, max_label: usize, assignment: &mut Vec<usize>, out: &mut Vec<SetPartition>) {
    let n = assignment.len();
    if pos == n {
        let block_count = max_label + 1;
        let mut blocks = vec![Vec::new(); block_count];
        for (i, &label) in assignment.iter().enumerate() {
            blocks[label].push(i + 1);
        }
        out.push(SetPartition { blocks });
        return;
    }
    for label in 0..=max_label + 1 {
        assignment[pos] = label;
        rgs_rec(pos + 1, max_label.max(label), assignment, out);
    }
}

/// Enumerates the k-element subsets of {1, …, n} in lexicographic order,
/// each ascending.
pub fn partition_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut acc = Vec::with_capacity(k);
    subsets_rec(1, n, k, &mut acc, &mut out);
    out
}

fn subsets_rec(start: usize, n: usize, k: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if acc.len() == k {
        out.push(acc.clone());
        return;
    }
    let remaining = k - acc.len();
    for i in start..=n.saturating_sub(remaining - 1) {
        acc.push(i);
        subsets_rec(i + 1, n, k, acc, out);
        acc.pop();
    }
}

/// Evaluates the energy-ordering indicator Θ_{k,n} on a sign pattern: 1 when
/// the first k signs are negative and the remaining n−k are positive, else 0.
///
/// Requires k ≤ pattern length. Patterns with zero entries cannot be built,
/// so the undefined boundary case never reaches this function.
pub fn theta_eval(k: usize, pattern: &SignPattern) -> Result<u8, EnumError> {
    let n = pattern.len();
    if k > n {
        return Err(EnumError::Domain("ordering index k exceeds pattern length"));
    }
    let ok = pattern.signs[..k].iter().all(|&s| s == -1)
        && pattern.signs[k..].iter().all(|&s| s == 1);
    Ok(ok as u8)
}

/// Applies the normalized symmetrizer Ŝ to a weighted term map.
///
/// The input is a list of (key, weight) terms together with a relabeling
/// action: `relabel(key, perm)` must return the key with every argument index
/// j replaced by `perm[j-1]`. The result accumulates, for every permutation π
/// of {1, …, n}, the relabeled terms with weight scaled by 1/n!, merging equal
/// keys and dropping exact zeros. Requires n ≤ `caps.symmetrize_max`.
pub fn symmetrize<K, F>(
    terms: &[(K, Ratio<i64>)],
    n: usize,
    caps: &Caps,
    relabel: F,
) -> Result<Vec<(K, Ratio<i64>)>, EnumError>
where
    K: Ord + Clone,
    F: Fn(&K, &[usize]) -> K,
{
    if n > caps.symmetrize_max {
        return Err(EnumError::CapExceeded { n, cap: caps.symmetrize_max });
    }
    let norm = Ratio::new(1, factorial(n));
    let mut acc: BTreeMap<K, Ratio<i64>> = BTreeMap::new();
    let mut perm: Vec<usize> = (1..=n).collect();
    loop {
        for (key, weight) in terms {
            let image = relabel(key, &perm);
            let entry = acc.entry(image).or_insert_with(|| Ratio::new(0, 1));
            *entry += weight * norm;
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(acc.into_iter().filter(|(_, w)| *w != Ratio::new(0, 1)).collect())
}

/// Advances `perm` to the next permutation in lexicographic order, returning
/// false (and leaving the slice sorted ascending) after the last one.
pub fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| perm[i] < perm[i + 1]) else {
        perm.reverse();
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).expect("successor exists");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

/// n! as i64. Callers stay far below overflow (20!).
pub fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// Binomial coefficient C(n, k) as i64 via the multiplicative formula.
pub fn binomial(n: usize, k: usize) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn pairings_of_four_points_are_the_three_classics() {
        let got = enumerate_pairings(4).expect("even size");
        let rendered: Vec<Vec<(usize, usize)>> =
            got.iter().map(|p| p.pairs().to_vec()).collect();
        assert_eq!(
            rendered,
            vec![
                vec![(1, 2), (3, 4)],
                vec![(1, 3), (2, 4)],
                vec![(1, 4), (2, 3)],
            ],
            "pairings of 4 points must enumerate in canonical order"
        );
    }

    #[test]
    fn odd_pairing_size_is_rejected() {
        assert!(enumerate_pairings(3).is_err(), "odd point counts have no perfect pairing");
    }

    #[test]
    fn empty_pairing_exists_and_is_unique() {
        let got = enumerate_pairings(0).expect("n = 0 is even");
        assert_eq!(got.len(), 1, "the empty product has exactly one (empty) pairing");
        assert!(got[0].pairs().is_empty());
    }

    #[test]
    fn partitions_are_grouped_by_block_count() {
        let caps = Caps::default();
        let parts = enumerate_partitions(4, &caps).expect("within cap");
        let counts: Vec<usize> = parts.iter().map(|p| p.block_count()).collect();
        let mut sorted = counts.clone();
        sorted.sort_unstable();
        assert_eq!(counts, sorted, "partitions must be grouped by ascending block count");
    }

    #[test]
    fn partition_cap_is_enforced() {
        let caps = Caps { partition_max: 5, symmetrize_max: 8 };
        assert!(matches!(
            enumerate_partitions(6, &caps),
            Err(EnumError::CapExceeded { n: 6, cap: 5 })
        ));
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(
            partition_subsets(4, 2),
            vec![
                vec![1, 2],
                vec![1, 3],
                vec![1, 4],
                vec![2, 3],
                vec![2, 4],
                vec![3, 4]
            ]
        );
        assert_eq!(partition_subsets(3, 0), vec![Vec::<usize>::new()]);
        assert!(partition_subsets(2, 3).is_empty());
    }

    #[test]
    fn theta_matches_its_defining_predicate() {
        let pat = SignPattern::new(vec![-1, -1, 1, 1]).unwrap();
        assert_eq!(theta_eval(2, &pat).unwrap(), 1, "(-,-,+,+) lies in the k=2 sector");
        assert_eq!(theta_eval(1, &pat).unwrap(), 0);
        assert_eq!(theta_eval(3, &pat).unwrap(), 0);
        let all_plus = SignPattern::new(vec![1, 1, 1]).unwrap();
        assert_eq!(theta_eval(0, &all_plus).unwrap(), 1, "k=0 sector is all-positive");
        assert!(theta_eval(4, &all_plus).is_err(), "k beyond the slot count is out of domain");
    }

    #[test]
    fn zero_signs_are_rejected_at_construction() {
        assert!(SignPattern::new(vec![1, 0, -1]).is_err(), "zero energy sign is undefined");
    }

    #[test]
    fn theta_sectors_partition_the_ordered_patterns() {
        // Among all sign patterns, exactly those of the form (-)^k (+)^(n-k)
        // hit one sector; every pattern hits at most one.
        let n = 5;
        for bits in 0..(1u32 << n) {
            let signs: Vec<i8> =
                (0..n).map(|i| if bits & (1 << i) != 0 { 1 } else { -1 }).collect();
            let pat = SignPattern::new(signs).unwrap();
            let hits: usize =
                (0..=n).map(|k| theta_eval(k, &pat).unwrap() as usize).sum();
            assert!(hits <= 1, "a pattern can lie in at most one ordering sector");
        }
    }

    #[test]
    fn symmetrizer_averages_an_asymmetric_two_slot_term() {
        // Input T(1,2) with weight 1 symmetrizes to (T(1,2) + T(2,1)) / 2.
        let caps = Caps::default();
        let terms = vec![((1usize, 2usize), Ratio::new(1, 1))];
        let got = symmetrize(&terms, 2, &caps, |&(a, b), perm| (perm[a - 1], perm[b - 1]))
            .expect("within cap");
        assert_eq!(
            got,
            vec![((1, 2), Ratio::new(1, 2)), ((2, 1), Ratio::new(1, 2))],
            "asymmetric input must split evenly over both orderings"
        );
    }

    #[test]
    fn symmetrizer_fixes_symmetric_input_and_is_idempotent() {
        let caps = Caps::default();
        let sym = vec![
            ((1usize, 2usize), Ratio::new(1, 3)),
            ((2usize, 1usize), Ratio::new(1, 3)),
        ];
        let relabel = |&(a, b): &(usize, usize), perm: &[usize]| (perm[a - 1], perm[b - 1]);
        let once = symmetrize(&sym, 2, &caps, relabel).unwrap();
        assert_eq!(once, sym, "a symmetric list is a fixed point of the symmetrizer");
        let asym = vec![((1usize, 2usize), Ratio::new(5, 7))];
        let one = symmetrize(&asym, 2, &caps, relabel).unwrap();
        let two = symmetrize(&one, 2, &caps, relabel).unwrap();
        assert_eq!(one, two, "the symmetrizer is idempotent");
    }

    #[test]
    fn symmetrizer_cap_is_enforced() {
        let caps = Caps { partition_max: 10, symmetrize_max: 3 };
        let terms = vec![((1usize,), Ratio::new(1, 1))];
        assert!(symmetrize(&terms, 4, &caps, |k, _| *k).is_err());
    }

    #[test]
    fn partitions_have_canonical_block_form_and_no_duplicates() {
        let caps = Caps::default();
        for n in 1..=6 {
            let parts = enumerate_partitions(n, &caps).unwrap();
            let mut seen = BTreeSet::new();
            for p in &parts {
                // Blocks cover 1..=n disjointly, ascending, ordered by minimum.
                let mut all: Vec<usize> = p.blocks().iter().flatten().copied().collect();
                all.sort_unstable();
                assert_eq!(all, (1..=n).collect::<Vec<_>>(), "blocks must cover 1..={n}");
                for b in p.blocks() {
                    assert!(b.windows(2).all(|w| w[0] < w[1]), "blocks must be ascending");
                }
                let mins: Vec<usize> = p.blocks().iter().map(|b| b[0]).collect();
                assert!(mins.windows(2).all(|w| w[0] < w[1]), "blocks ordered by least element");
                assert!(seen.insert(p.blocks().to_vec()), "no duplicate partitions");
            }
        }
    }
}
