//! Brute-force oracle for the assembled kernels.
//!
//! The canonical assembly uses closed-form rational coefficients per
//! channel structure. This oracle instead executes the defining sum
//! Σ_k n!/(k!(n−k)!) Ŝ[Θ_{k,n} V_{k,n−k}] literally: every permutation of
//! every V term, bucketed by the channel it lands in, with weight
//! 1/(k!(n−k)!). Terms whose δ-roles contradict their channel (a δ⁻ slot
//! outside the negative set, or a δ⁺ slot inside it) are identically zero
//! as generalized functions and are dropped by both sides. The resulting
//! channel maps must agree exactly as rational numbers.

use std::collections::BTreeMap;

use num_rational::Ratio;
use uqft_core::combinatorics::{factorial, next_permutation, Caps};
use uqft_core::kernel::{
    assemble_w, expand_channels, expand_v, reduce_for_b, relabel_factors, Factor, SignAssignment,
};

type ChannelMap = BTreeMap<(Vec<usize>, Vec<Factor>), Ratio<i64>>;

/// True when every two-point factor's δ⁻ slot lies in the negative set and
/// its δ⁺ slot outside it.
fn roles_consistent(factors: &[Factor], negatives: &[usize]) -> bool {
    factors.iter().all(|f| match f {
        Factor::TwoPoint { neg, pos } => negatives.contains(neg) && !negatives.contains(pos),
        Factor::Conjoined(_) => true,
    })
}

/// The defining permutation sum, evaluated literally.
fn oracle_channel_map(n: usize) -> ChannelMap {
    let caps = Caps::default();
    let mut acc: ChannelMap = BTreeMap::new();
    for k in 0..=n {
        let v = expand_v(k, n - k, &caps).expect("within caps");
        // n!/(k!(n−k)!) from the definition times 1/n! from the symmetrizer.
        let weight = Ratio::new(1, factorial(k) * factorial(n - k));
        let mut perm: Vec<usize> = (1..=n).collect();
        loop {
            let mut channel: Vec<usize> = perm[..k].to_vec();
            channel.sort_unstable();
            for term in &v.terms {
                let factors = relabel_factors(&term.factors, &perm);
                if !roles_consistent(&factors, &channel) {
                    continue;
                }
                *acc.entry((channel.clone(), factors))
                    .or_insert_with(|| Ratio::new(0, 1)) += weight * term.coeff;
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
    }
    acc.retain(|_, c| *c != Ratio::new(0, 1));
    acc
}

/// The canonical assembly, flattened to the same channel-map form.
fn canonical_channel_map(n: usize) -> ChannelMap {
    let caps = Caps::default();
    let w = assemble_w(n, &caps).expect("within caps");
    let mut acc: ChannelMap = BTreeMap::new();
    for term in expand_channels(&w) {
        let negatives = term.negatives.expect("assembled terms are Θ-weighted");
        *acc.entry((negatives, term.factors)).or_insert_with(|| Ratio::new(0, 1)) += term.coeff;
    }
    acc.retain(|_, c| *c != Ratio::new(0, 1));
    acc
}

#[test]
fn assembly_matches_the_permutation_definition_up_to_six_points() {
    for n in 0..=6usize {
        let oracle = oracle_channel_map(n);
        let canonical = canonical_channel_map(n);
        assert_eq!(
            canonical, oracle,
            "canonical assembly must reproduce the defining sum at n = {n}"
        );
    }
}

#[test]
fn oracle_reproduces_the_one_ninth_coefficient() {
    let oracle = oracle_channel_map(6);
    let key = (
        vec![1usize, 2, 3],
        vec![
            Factor::Conjoined(vec![2, 3, 4, 5]),
            Factor::TwoPoint { neg: 1, pos: 6 },
        ],
    );
    assert_eq!(
        oracle.get(&key).copied(),
        Some(Ratio::new(1, 9)),
        "the defining sum itself must yield 1/9 on the mixed six-point structure"
    );
}

/// Stabilizer symmetrization: averages a factor-structure map over
/// S_k × S_m acting on slots {1..k} and {k+1..n}.
fn stabilizer_symmetrize(
    terms: &[(Vec<Factor>, Ratio<i64>)],
    k: usize,
    m: usize,
) -> BTreeMap<Vec<Factor>, Ratio<i64>> {
    let n = k + m;
    let norm = Ratio::new(1, factorial(k) * factorial(m));
    let mut acc: BTreeMap<Vec<Factor>, Ratio<i64>> = BTreeMap::new();
    let mut left: Vec<usize> = (1..=k).collect();
    loop {
        let mut right: Vec<usize> = (k + 1..=n).collect();
        loop {
            let mut map = vec![0usize; n];
            map[..k].copy_from_slice(&left);
            map[k..].copy_from_slice(&right);
            for (factors, coeff) in terms {
                let imaged = relabel_factors(factors, &map);
                *acc.entry(imaged).or_insert_with(|| Ratio::new(0, 1)) += coeff * norm;
            }
            if !next_permutation(&mut right) {
                break;
            }
        }
        if !next_permutation(&mut left) {
            break;
        }
    }
    acc.retain(|_, c| *c != Ratio::new(0, 1));
    acc
}

#[test]
fn reduced_lists_symmetrize_onto_the_assembled_channel_content() {
    // On symmetrized arguments the reduced V list and the assembled kernel's
    // canonical-channel content are the same object: averaging the
    // role-consistent reduced terms over S_k × S_m must reproduce the
    // canonical channel-{1..k} terms with their closed-form coefficients
    // (1/9 and all).
    let caps = Caps::default();
    for (k, m) in [(1usize, 1usize), (2, 2), (2, 3), (3, 2), (3, 3), (2, 4), (4, 2)] {
        let n = k + m;
        let negatives: Vec<usize> = (1..=k).collect();
        let reduced = reduce_for_b(k, m, &caps).unwrap();
        let surviving: Vec<(Vec<Factor>, Ratio<i64>)> = reduced
            .terms
            .iter()
            .filter(|t| roles_consistent(&t.factors, &negatives))
            .map(|t| (t.factors.clone(), t.coeff))
            .collect();
        let symmetrized = stabilizer_symmetrize(&surviving, k, m);

        let w = assemble_w(n, &caps).unwrap();
        let mut channel_content: BTreeMap<Vec<Factor>, Ratio<i64>> = BTreeMap::new();
        for t in &w.terms {
            if t.sign == (SignAssignment::ThetaChannel { k }) {
                *channel_content
                    .entry(t.factors.clone())
                    .or_insert_with(|| Ratio::new(0, 1)) += t.coeff;
            }
        }
        channel_content.retain(|_, c| *c != Ratio::new(0, 1));
        assert_eq!(
            symmetrized, channel_content,
            "stabilizer-averaged reduced list must equal the channel content at (k, m) = ({k}, {m})"
        );
    }
}
