//! Minkowski four-vectors and restricted Lorentz / Poincaré transformations.
//!
//! Metric signature (+, −, −, −); a four-vector is (E, p⃗) and the invariant
//! product is p·q = E_p E_q − p⃗·q⃗. Only the proper orthochronous component is
//! admitted: it preserves the mass shell sector by sector, which the on-shell
//! state labels rely on.

use core::fmt;

use libm::{cos, cosh, fabs, sin, sinh, sqrt};

/// Spatial three-vector.
pub type Vec3 = [f64; 3];

/// Euclidean dot product of three-vectors.
pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Euclidean norm of a three-vector.
pub fn norm3(a: &Vec3) -> f64 {
    sqrt(dot3(a, a))
}

/// A four-vector (t, x⃗) in signature (+, −, −, −).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourVector {
    /// Time (or energy) component.
    pub t: f64,
    /// Spatial components.
    pub x: Vec3,
}

impl FourVector {
    /// Builds (t, x⃗).
    pub fn new(t: f64, x: Vec3) -> Self {
        FourVector { t, x }
    }

    /// The zero vector.
    pub fn zero() -> Self {
        FourVector { t: 0.0, x: [0.0; 3] }
    }

    /// Minkowski product p·q = t_p t_q − x⃗_p·x⃗_q.
    pub fn dot(&self, other: &FourVector) -> f64 {
        self.t * other.t - dot3(&self.x, &other.x)
    }

    /// Component-wise sum.
    pub fn add(&self, other: &FourVector) -> Self {
        FourVector {
            t: self.t + other.t,
            x: [
                self.x[0] + other.x[0],
                self.x[1] + other.x[1],
                self.x[2] + other.x[2],
            ],
        }
    }
}

/// Error raised when a matrix fails the restricted-Lorentz checks.
#[derive(Clone, Debug, PartialEq)]
pub enum LorentzError {
    /// ΛᵀηΛ deviates from η beyond tolerance.
    NotOrthogonal {
        /// Largest absolute deviation found.
        deviation: f64,
    },
    /// det Λ is not +1 within tolerance.
    NotProper {
        /// Computed determinant.
        det: f64,
    },
    /// Λ⁰₀ < 1: the transformation reverses or degenerates time orientation.
    NotOrthochronous {
        /// Computed Λ⁰₀ entry.
        entry: f64,
    },
    /// A boost was requested beyond the configured rapidity limit.
    RapidityLimit {
        /// Requested rapidity magnitude.
        requested: f64,
        /// Configured limit.
        limit: f64,
    },
    /// A direction or axis vector had (near-)zero length.
    ZeroAxis,
}

impl fmt::Display for LorentzError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LorentzError::NotOrthogonal { deviation } => {
                write!(f, "matrix does not preserve the metric (deviation {deviation:e})")
            }
            LorentzError::NotProper { det } => write!(f, "determinant {det} is not +1"),
            LorentzError::NotOrthochronous { entry } => {
                write!(f, "time-time entry {entry} is below 1")
            }
            LorentzError::RapidityLimit { requested, limit } => {
                write!(f, "rapidity {requested} exceeds configured limit {limit}")
            }
            LorentzError::ZeroAxis => write!(f, "axis or direction vector has zero length"),
        }
    }
}

/// A 4×4 matrix acting on four-vectors, intended to lie in the proper
/// orthochronous Lorentz group. Row-major, indices (row, column) with index 0
/// the time component.
#[derive(Clone, Debug, PartialEq)]
pub struct Lorentz {
    m: [[f64; 4]; 4],
}

/// Tolerance for the metric-preservation and determinant checks.
pub const LORENTZ_CHECK_TOL: f64 = 1e-9;

impl Lorentz {
    /// Identity transformation.
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Lorentz { m }
    }

    /// Builds the transformation from an explicit row-major matrix without
    /// validation; pair with [`Lorentz::validate`] for untrusted input.
    pub fn from_matrix(m: [[f64; 4]; 4]) -> Self {
        Lorentz { m }
    }

    /// The underlying row-major matrix.
    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    /// Spatial rotation by `angle` (radians) about `axis` (need not be
    /// normalized). Fails on a zero axis.
    pub fn rotation(axis: Vec3, angle: f64) -> Result<Self, LorentzError> {
        let len = norm3(&axis);
        if len < 1e-300 {
            return Err(LorentzError::ZeroAxis);
        }
        let u = [axis[0] / len, axis[1] / len, axis[2] / len];
        let (c, s) = (cos(angle), sin(angle));
        let mut m = [[0.0; 4]; 4];
        m[0][0] = 1.0;
        // Rodrigues formula: R = c·I + s·[u]_× + (1−c)·uuᵀ.
        for i in 0..3 {
            for j in 0..3 {
                let eye = if i == j { 1.0 } else { 0.0 };
                m[i + 1][j + 1] = c * eye + (1.0 - c) * u[i] * u[j] + s * cross_entry(&u, i, j);
            }
        }
        Ok(Lorentz { m })
    }

    /// Boost with the given rapidity along `dir` (need not be normalized),
    /// subject to the configured rapidity limit. Fails on a zero direction
    /// or an out-of-range rapidity.
    pub fn boost(dir: Vec3, rapidity: f64, max_rapidity: f64) -> Result<Self, LorentzError> {
        if fabs(rapidity) > max_rapidity {
            return Err(LorentzError::RapidityLimit {
                requested: fabs(rapidity),
                limit: max_rapidity,
            });
        }
        let len = norm3(&dir);
        if len < 1e-300 {
            return Err(LorentzError::ZeroAxis);
        }
        let u = [dir[0] / len, dir[1] / len, dir[2] / len];
        let (ch, sh) = (cosh(rapidity), sinh(rapidity));
        let mut m = [[0.0; 4]; 4];
        m[0][0] = ch;
        for i in 0..3 {
            m[0][i + 1] = sh * u[i];
            m[i + 1][0] = sh * u[i];
            for j in 0..3 {
                let eye = if i == j { 1.0 } else { 0.0 };
                m[i + 1][j + 1] = eye + (ch - 1.0) * u[i] * u[j];
            }
        }
        Ok(Lorentz { m })
    }

    /// Matrix product self ∘ other (apply `other` first).
    pub fn compose(&self, other: &Lorentz) -> Self {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = (0..4).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Lorentz { m }
    }

    /// Exact group inverse for metric-preserving matrices: Λ⁻¹ = ηΛᵀη.
    pub fn inverse(&self) -> Self {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let sign = if (i == 0) == (j == 0) { 1.0 } else { -1.0 };
                m[i][j] = sign * self.m[j][i];
            }
        }
        Lorentz { m }
    }

    /// Applies the transformation to a four-vector.
    pub fn apply(&self, p: &FourVector) -> FourVector {
        let v = [p.t, p.x[0], p.x[1], p.x[2]];
        let mut out = [0.0; 4];
        for (i, row) in self.m.iter().enumerate() {
            out[i] = (0..4).map(|k| row[k] * v[k]).sum();
        }
        FourVector { t: out[0], x: [out[1], out[2], out[3]] }
    }

    /// Checks membership in the proper orthochronous group: ΛᵀηΛ = η within
    /// `tol`, det Λ = +1 within `tol`, and Λ⁰₀ ≥ 1 (up to `tol`).
    pub fn validate(&self, tol: f64) -> Result<(), LorentzError> {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let eta = |k: usize| if k == 0 { 1.0 } else { -1.0 };
                let entry: f64 = (0..4).map(|k| self.m[k][i] * eta(k) * self.m[k][j]).sum();
                let expect = if i == j { eta(i) } else { 0.0 };
                worst = worst.max(fabs(entry - expect));
            }
        }
        if worst > tol {
            return Err(LorentzError::NotOrthogonal { deviation: worst });
        }
        let det = det4(&self.m);
        if fabs(det - 1.0) > tol {
            return Err(LorentzError::NotProper { det });
        }
        if self.m[0][0] < 1.0 - tol {
            return Err(LorentzError::NotOrthochronous { entry: self.m[0][0] });
        }
        Ok(())
    }

    /// True when every entry matches the identity within `tol`.
    pub fn is_identity(&self, tol: f64) -> bool {
        self.m.iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(j, &v)| fabs(v - if i == j { 1.0 } else { 0.0 }) <= tol)
        })
    }
}

/// Entry (i, j) of the cross-product matrix [u]_× (so [u]_× v = u × v).
fn cross_entry(u: &Vec3, i: usize, j: usize) -> f64 {
    match (i, j) {
        (0, 1) => -u[2],
        (0, 2) => u[1],
        (1, 0) => u[2],
        (1, 2) => -u[0],
        (2, 0) => -u[1],
        (2, 1) => u[0],
        _ => 0.0,
    }
}

/// Determinant of a 4×4 matrix by Gaussian elimination with partial pivoting.
fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut a = *m;
    let mut det = 1.0;
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| fabs(a[i][col]).partial_cmp(&fabs(a[j][col])).unwrap())
            .unwrap();
        if fabs(a[pivot][col]) == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    det
}

/// A Poincaré transformation (a, Λ): x ↦ Λx + a, acting on momentum-space
/// labels as described on [`PoincareTag::compose`].
#[derive(Clone, Debug, PartialEq)]
pub struct PoincareTag {
    /// Translation four-vector a.
    pub translation: FourVector,
    /// Homogeneous part Λ.
    pub lorentz: Lorentz,
}

impl PoincareTag {
    /// The identity transformation.
    pub fn identity() -> Self {
        PoincareTag { translation: FourVector::zero(), lorentz: Lorentz::identity() }
    }

    /// A pure translation (a, 1).
    pub fn translation_only(a: FourVector) -> Self {
        PoincareTag { translation: a, lorentz: Lorentz::identity() }
    }

    /// Group composition (a₂, Λ₂)(a₁, Λ₁) = (a₂ + Λ₂a₁, Λ₂Λ₁): `self` is
    /// applied after `first`.
    pub fn compose(&self, first: &PoincareTag) -> Self {
        PoincareTag {
            translation: self.translation.add(&self.lorentz.apply(&first.translation)),
            lorentz: self.lorentz.compose(&first.lorentz),
        }
    }

    /// True when both parts match the identity within `tol`.
    pub fn is_identity(&self, tol: f64) -> bool {
        fabs(self.translation.t) <= tol
            && self.translation.x.iter().all(|&v| fabs(v) <= tol)
            && self.lorentz.is_identity(tol)
    }
}
