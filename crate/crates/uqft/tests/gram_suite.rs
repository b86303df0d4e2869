//! Gram-matrix regression suite: a heavier mixed basis than the module
//! tests carry, spectral consistency checks, the tie between the empty
//! measure and the matching-sum route, and floor behaviour on a
//! deliberately degenerate basis.

use num_complex::Complex64;
use uqft::gram::{free_field_oracle, gram_matrix, PSD_REL_FLOOR};
use uqft::quad::QuadConfig;
use uqft_core::algebra::{seq_product, FunctionSequence, GaussianPacket, Kinematics};
use uqft_core::kernel::MomentMeasure;

fn kin() -> Kinematics {
    Kinematics::new(1.0).expect("unit mass")
}

fn lifted(center: [f64; 3], width: f64, tau: f64) -> GaussianPacket {
    GaussianPacket::new(center, width, tau)
        .and_then(|p| p.lift())
        .expect("valid lifted packet")
}

fn one(center: [f64; 3], width: f64, tau: f64) -> FunctionSequence {
    FunctionSequence::from_packet(lifted(center, width, tau))
}

#[test]
fn a_mixed_superposition_basis_stays_positive_and_spectrally_consistent() {
    let a = one([0.3, 0.0, 0.0], 5.0, 0.0);
    let b = one([0.0, 0.35, 0.0], 4.5, 0.1);
    let c = one([-0.2, 0.1, 0.2], 5.5, -0.2);
    let basis = vec![
        FunctionSequence::unit(),
        a.clone(),
        b.clone(),
        seq_product(&a, &b),
        seq_product(&a, &c).add(&seq_product(&b, &b).scale(Complex64::new(0.5, -0.5))),
        seq_product(&a, &seq_product(&b, &c)),
    ];
    let measure = MomentMeasure::new(vec![(0.5, 0.3), (0.9, 0.08)]).expect("measure");
    let report =
        gram_matrix(&basis, &measure, &kin(), &QuadConfig::coarse()).expect("Gram matrix");
    assert!(report.psd, "the mixed basis must produce a positive-semidefinite Gram matrix");
    assert!(
        report.min_eig >= -PSD_REL_FLOOR * report.max_eig.max(0.0),
        "min eigenvalue {:.3e} under the relative floor (max {:.3e})",
        report.min_eig,
        report.max_eig
    );
    // Hermiticity: diagonal entries are real norms.
    for (i, row) in report.matrix.iter().enumerate() {
        assert!(
            row[i].im.abs() <= 1e-12 * row[i].re.abs().max(1e-30),
            "diagonal entry {i} must be real, got {}",
            row[i]
        );
        assert!(row[i].re >= 0.0, "diagonal entry {i} must be a nonnegative norm");
        for (j, entry) in row.iter().enumerate() {
            let mirrored = report.matrix[j][i].conj();
            assert_eq!(*entry, mirrored, "entry ({i},{j}) must mirror its conjugate");
        }
    }
    // Independent spectral check: the eigenvalue sum equals the trace.
    let trace: f64 = (0..basis.len()).map(|i| report.matrix[i][i].re).sum();
    let eig_sum: f64 = report.eigenvalues.iter().sum();
    assert!(
        (trace - eig_sum).abs() <= 1e-10 * trace.abs().max(1e-30),
        "eigenvalue sum {eig_sum} must equal the trace {trace}"
    );
    let mut sorted = report.eigenvalues.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    assert_eq!(sorted, report.eigenvalues, "eigenvalues must be reported in ascending order");
}

#[test]
fn the_empty_measure_gram_matches_the_matching_sum_entrywise() {
    let a = one([0.25, 0.0, 0.0], 5.0, 0.0);
    let b = one([0.0, -0.3, 0.1], 4.5, 0.15);
    let basis =
        vec![a.clone(), b.clone(), seq_product(&a, &b), seq_product(&a, &a)];
    let empty = MomentMeasure::empty();
    let (k, cfg) = (kin(), QuadConfig::coarse());
    let report = gram_matrix(&basis, &empty, &k, &cfg).expect("Gram matrix");
    assert!(report.psd, "the free pairing restricted to a basis is positive");
    for (i, f) in basis.iter().enumerate() {
        for (j, g) in basis.iter().enumerate() {
            let oracle = free_field_oracle(f, g, &k, &cfg).expect("matching sum");
            let scale = oracle.value.norm().max(report.matrix[i][j].norm()).max(1e-30);
            assert!(
                (report.matrix[i][j] - oracle.value).norm() <= 1e-8 * scale,
                "entry ({i},{j}) {} must match the matching sum {}",
                report.matrix[i][j],
                oracle.value
            );
        }
    }
}

#[test]
fn a_degenerate_basis_is_reported_positive_with_a_near_zero_eigenvalue() {
    let a = one([0.3, 0.0, 0.0], 5.0, 0.0);
    let b = one([0.0, 0.3, 0.0], 5.0, 0.0);
    // The third vector is a linear combination of the first two, so one
    // eigenvalue is exactly zero in the continuum; quadrature noise may
    // push it either way, and the relative floor must absorb that.
    let basis = vec![
        a.clone(),
        b.clone(),
        a.scale(Complex64::new(2.0, 0.0)).add(&b.scale(Complex64::new(0.0, -1.0))),
    ];
    let measure = MomentMeasure::new(vec![(0.6, 0.2)]).expect("measure");
    let report =
        gram_matrix(&basis, &measure, &kin(), &QuadConfig::coarse()).expect("Gram matrix");
    assert!(report.psd, "a rank-deficient Gram matrix is still positive semidefinite");
    let near_zero = report.eigenvalues[0].abs();
    assert!(
        near_zero <= 1e-6 * report.max_eig,
        "the dependent direction must produce a near-zero eigenvalue, got {near_zero:.3e} \
         against max {:.3e}",
        report.max_eig
    );
}
