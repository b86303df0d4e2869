//! Eigenvalues of small complex Hermitian matrices.
//!
//! Gram matrices in this crate are tiny (at most ~16×16), so a classical
//! cyclic Jacobi iteration is both simple and accurate: each sweep applies
//! complex Givens rotations that annihilate off-diagonal entries, and the
//! process converges quadratically once the matrix is nearly diagonal.
//! Only eigenvalues are needed, so rotations are applied two-sided without
//! accumulating vectors.

use num_complex::Complex64;

/// Eigenvalues of a complex Hermitian matrix, in ascending order.
///
/// `matrix` is square, row-major. The Hermiticity defect is symmetrized
/// away first (`(A + A*)/2`), so tiny numerical asymmetry from upstream
/// quadrature is tolerated; callers that care should check Hermiticity
/// themselves beforehand.
///
/// # Panics
///
/// Panics if `matrix` is not square or is empty.
pub fn hermitian_eigenvalues(matrix: &[Vec<Complex64>]) -> Vec<f64> {
    let n = matrix.len();
    assert!(n > 0, "eigenvalue solver needs a nonempty matrix");
    assert!(
        matrix.iter().all(|row| row.len() == n),
        "eigenvalue solver needs a square matrix"
    );
    // Hermitian symmetrization. The diagonal keeps only its real part.
    let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = 0.5 * (matrix[i][j] + matrix[j][i].conj());
        }
        a[i][i] = Complex64::new(a[i][i].re, 0.0);
    }
    if n == 1 {
        return vec![a[0][0].re];
    }

    let off = |a: &Vec<Vec<Complex64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };
    let scale: f64 = (0..n).map(|i| a[i][i].re.abs()).fold(off(&a), f64::max).max(1.0);

    for _sweep in 0..64 {
        if off(&a) <= 1e-15 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                // Unitary 2×2 diagonalization of [[app, apq], [apq*, aqq]]:
                // first strip the phase of apq, then a real Jacobi rotation.
                let app = a[p][p].re;
                let aqq = a[q][q].re;
                let phase = apq / apq.norm();
                let b = apq.norm();
                let theta = 0.5 * (2.0 * b).atan2(app - aqq);
                let (s, c) = theta.sin_cos();
                // Columns mix via u = [[c, -s·e^{iφ}], [s·e^{-iφ}, c]],
                // then rows via u*; u absorbs the phase so the remaining
                // 2×2 problem is the real rotation by θ.
                let cp: Vec<Complex64> = (0..n).map(|i| a[i][p]).collect();
                let cq: Vec<Complex64> = (0..n).map(|i| a[i][q]).collect();
                for i in 0..n {
                    a[i][p] = c * cp[i] + s * phase.conj() * cq[i];
                    a[i][q] = -s * phase * cp[i] + c * cq[i];
                }
                let rp: Vec<Complex64> = a[p].clone();
                let rq: Vec<Complex64> = a[q].clone();
                for j in 0..n {
                    a[p][j] = c * rp[j] + s * phase * rq[j];
                    a[q][j] = -s * phase.conj() * rp[j] + c * rq[j];
                }
                a[p][q] = Complex64::new(0.0, 0.0);
                a[q][p] = Complex64::new(0.0, 0.0);
                a[p][p] = Complex64::new(a[p][p].re, 0.0);
                a[q][q] = Complex64::new(a[q][q].re, 0.0);
            }
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| a[i][i].re).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Deterministic pseudo-random complex value stream for test matrices.
    fn lcg_stream(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    #[test]
    fn diagonal_matrix_returns_its_diagonal_sorted() {
        let m = vec![
            vec![c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)],
        ];
        assert_eq!(hermitian_eigenvalues(&m), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_with_complex_coupling_matches_closed_form() {
        // [[a, z], [z*, d]] has eigenvalues (a+d)/2 ± √((a−d)²/4 + |z|²).
        let (a, d) = (1.0, -2.0);
        let z = c(0.3, -0.7);
        let m = vec![vec![c(a, 0.0), z], vec![z.conj(), c(d, 0.0)]];
        let got = hermitian_eigenvalues(&m);
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + z.norm_sqr()).sqrt();
        assert!((got[0] - (mid - rad)).abs() < 1e-14, "low eigenvalue: {}", got[0]);
        assert!((got[1] - (mid + rad)).abs() < 1e-14, "high eigenvalue: {}", got[1]);
    }

    #[test]
    fn gram_style_product_matrices_are_positive_semidefinite() {
        // B*B is PSD for any B; with more rows than columns in B the
        // product is singular, so the smallest eigenvalue is exactly zero.
        let mut next = lcg_stream(7);
        let rows = 3;
        let cols = 6;
        let b: Vec<Vec<Complex64>> = (0..rows)
            .map(|_| (0..cols).map(|_| c(next(), next())).collect())
            .collect();
        let mut m = vec![vec![c(0.0, 0.0); cols]; cols];
        for i in 0..cols {
            for j in 0..cols {
                m[i][j] = (0..rows).map(|r| b[r][i].conj() * b[r][j]).sum();
            }
        }
        let eigs = hermitian_eigenvalues(&m);
        let max = eigs.last().copied().expect("nonempty spectrum");
        assert!(max > 0.0, "a nonzero product matrix has positive spectrum");
        for e in &eigs {
            assert!(
                *e >= -1e-13 * max,
                "product matrix must be positive semidefinite, found {e}"
            );
        }
        // Rank can be at most `rows`, so `cols − rows` eigenvalues vanish.
        for e in eigs.iter().take(cols - rows) {
            assert!(e.abs() < 1e-13 * max, "rank-deficient directions must vanish, found {e}");
        }
    }

    #[test]
    fn trace_and_square_sum_are_preserved() {
        // Σλ = tr A and Σλ² = tr A² = ‖A‖²_F are basis-independent, so they
        // pin the spectrum of a random Hermitian matrix without an
        // external solver.
        let mut next = lcg_stream(42);
        let n = 8;
        let mut m = vec![vec![c(0.0, 0.0); n]; n];
        for i in 0..n {
            m[i][i] = c(next(), 0.0);
            for j in i + 1..n {
                let z = c(next(), next());
                m[i][j] = z;
                m[j][i] = z.conj();
            }
        }
        let eigs = hermitian_eigenvalues(&m);
        let trace: f64 = (0..n).map(|i| m[i][i].re).sum();
        let frob2: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j].norm_sqr())
            .sum();
        let sum: f64 = eigs.iter().sum();
        let sum2: f64 = eigs.iter().map(|e| e * e).sum();
        assert!((sum - trace).abs() < 1e-12, "eigenvalue sum {sum} must match trace {trace}");
        assert!(
            (sum2 - frob2).abs() < 1e-11 * frob2.max(1.0),
            "eigenvalue square sum {sum2} must match squared Frobenius norm {frob2}"
        );
    }

    #[test]
    fn complex_hermitian_agrees_with_real_symmetric_embedding() {
        // A = X + iY (X symmetric, Y antisymmetric) embeds as the real
        // symmetric [[X, -Y], [Y, X]] whose spectrum is that of A doubled.
        let mut next = lcg_stream(99);
        let n = 5;
        let mut m = vec![vec![c(0.0, 0.0); n]; n];
        for i in 0..n {
            m[i][i] = c(next(), 0.0);
            for j in i + 1..n {
                let z = c(next(), next());
                m[i][j] = z;
                m[j][i] = z.conj();
            }
        }
        let mut big = vec![vec![c(0.0, 0.0); 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                let x = c(m[i][j].re, 0.0);
                let y = c(m[i][j].im, 0.0);
                big[i][j] = x;
                big[n + i][n + j] = x;
                big[i][n + j] = -y;
                big[n + i][j] = y;
            }
        }
        let small = hermitian_eigenvalues(&m);
        let doubled = hermitian_eigenvalues(&big);
        for (k, e) in small.iter().enumerate() {
            let lo = doubled[2 * k];
            let hi = doubled[2 * k + 1];
            assert!(
                (lo - e).abs() < 1e-12 && (hi - e).abs() < 1e-12,
                "embedding must double eigenvalue {e}, got pair ({lo}, {hi})"
            );
        }
    }
}
