//! Counting oracles for the enumeration layer.
//!
//! Every count is checked against an independent recurrence rather than
//! against the enumerator itself: pairing counts against the double
//! factorial, partition counts against the Bell recursion, and per-block
//! counts against the Stirling second-kind recurrence. The recurrences are
//! the frozen reference; the enumerators must reproduce them.

use uqft_core::combinatorics::{
    binomial, enumerate_pairings, enumerate_partitions, partition_subsets, Caps,
};

/// (2ℓ)! / (2^ℓ ℓ!) via the recurrence a(ℓ) = (2ℓ − 1) · a(ℓ − 1).
fn double_factorial_pairing_count(l: usize) -> u64 {
    let mut acc: u64 = 1;
    for i in 1..=l {
        acc *= (2 * i - 1) as u64;
    }
    acc
}

/// Bell numbers via B(n+1) = Σ_k C(n, k) B(k), seeded with B(0) = 1.
fn bell_numbers(up_to: usize) -> Vec<u64> {
    let mut bell = vec![1u64];
    for n in 0..up_to {
        let next: u64 = (0..=n)
            .map(|k| binomial(n, k) as u64 * bell[k])
            .sum();
        bell.push(next);
    }
    bell
}

/// Stirling numbers of the second kind via
/// S(n, ℓ) = ℓ · S(n−1, ℓ) + S(n−1, ℓ−1).
fn stirling2(n: usize, l: usize) -> u64 {
    if n == 0 && l == 0 {
        return 1;
    }
    if n == 0 || l == 0 || l > n {
        return 0;
    }
    l as u64 * stirling2(n - 1, l) + stirling2(n - 1, l - 1)
}

#[test]
fn pairing_counts_match_the_double_factorial() {
    assert_eq!(enumerate_pairings(4).unwrap().len(), 3, "4 points give 3 pairings");
    assert_eq!(enumerate_pairings(6).unwrap().len(), 15, "6 points give 15 pairings");
    for l in 0..=6 {
        let got = enumerate_pairings(2 * l).unwrap().len() as u64;
        assert_eq!(
            got,
            double_factorial_pairing_count(l),
            "pairing count of 2ℓ = {} points must equal (2ℓ)!/(2^ℓ ℓ!)",
            2 * l
        );
    }
}

#[test]
fn pairings_are_distinct_and_well_formed() {
    for l in 1..=5 {
        let n = 2 * l;
        let all = enumerate_pairings(n).unwrap();
        for p in &all {
            let mut covered: Vec<usize> = p.pairs().iter().flat_map(|&(a, b)| [a, b]).collect();
            covered.sort_unstable();
            assert_eq!(covered, (1..=n).collect::<Vec<_>>(), "pairs must cover 1..={n}");
            assert!(p.pairs().iter().all(|&(a, b)| a < b), "pairs must be ascending");
        }
        let mut keys: Vec<_> = all.iter().map(|p| p.pairs().to_vec()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), all.len(), "no pairing may repeat");
    }
}

#[test]
fn partition_totals_match_the_bell_recursion() {
    let caps = Caps::default();
    let bell = bell_numbers(10);
    for n in 1..=10 {
        let got = enumerate_partitions(n, &caps).unwrap().len() as u64;
        assert_eq!(got, bell[n], "partition count of {n} points must equal the Bell number");
    }
}

#[test]
fn per_block_counts_match_the_stirling_recurrence() {
    let caps = Caps::default();
    for n in 1..=10 {
        let parts = enumerate_partitions(n, &caps).unwrap();
        for l in 1..=n {
            let got = parts.iter().filter(|p| p.block_count() == l).count() as u64;
            assert_eq!(
                got,
                stirling2(n, l),
                "partitions of {n} points into {l} blocks must match Stirling-2"
            );
        }
    }
}

#[test]
fn subset_counts_match_binomials() {
    for n in 0..=8 {
        for k in 0..=n {
            assert_eq!(
                partition_subsets(n, k).len() as i64,
                binomial(n, k),
                "k-subset count must equal C({n}, {k})"
            );
        }
    }
}
