//! Dense complex linear algebra shared by the optimization modules.
//!
//! Eigenvalue problems are solved with cyclic Jacobi rotations on the real
//! symmetric embedding
//!
//! ```text
//!     A = B + iC   ->   [ B  -C ]
//!                       [ C   B ]
//! ```
//!
//! which carries every eigenvalue of `A` twice. Eigenvectors `[x; y]` of the
//! embedding map back to `x + iy`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Absolute symmetry tolerance used when validating raw matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Minimum eigenvalue accepted as PSD, relative to `max(1, ‖A‖)`.
pub const PSD_TOL: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 100;

/// A square complex matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates `raw` and stores its exact Hermitian part.
    pub fn new(raw: CMatrix) -> Result<Self> {
        if raw.nrows() != raw.ncols() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, expected square",
                raw.nrows(),
                raw.ncols()
            )));
        }
        if raw.nrows() == 0 {
            return Err(Error::InvalidInput("matrix has dimension 0".into()));
        }
        let scale = raw.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
        let tol = HERMITIAN_TOL * scale;
        let d = raw.nrows();
        for i in 0..d {
            for j in i..d {
                let a = raw[(i, j)];
                let b = raw[(j, i)].conj();
                if (a - b).norm() > tol || !a.re.is_finite() || !a.im.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not Hermitian at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self::hermitian_part(&raw))
    }

    /// `(M + M^H) / 2`, which is exactly Hermitian in floating point.
    pub fn hermitian_part(m: &CMatrix) -> Self {
        let d = m.nrows();
        let mut out = CMatrix::zeros(d, d);
        for i in 0..d {
            out[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
            for j in (i + 1)..d {
                let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
        HermitianMatrix(out)
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix(CMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        HermitianMatrix(m)
    }

    /// `u u^H`.
    pub fn outer(u: &CVector) -> Self {
        Self::hermitian_part(&(u * u.adjoint()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Real inner product `Re tr(A B)`; exact `tr(A B)` for Hermitian pairs.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        frobenius_inner(&self.0, &other.0)
    }

    /// `u^H A u`.
    pub fn quad_form(&self, u: &CVector) -> f64 {
        u.dotc(&(&self.0 * u)).re
    }

    pub fn scale(&self, c: f64) -> Self {
        HermitianMatrix(self.0.map(|z| z * c))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 - &other.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real symmetric `2d x 2d` embedding, row-major.
    fn real_embedding(&self) -> Vec<f64> {
        let d = self.dim();
        let n = 2 * d;
        let mut r = vec![0.0; n * n];
        for i in 0..d {
            for j in 0..d {
                let z = self.0[(i, j)];
                r[i * n + j] = z.re;
                r[(i + d) * n + (j + d)] = z.re;
                r[i * n + (j + d)] = -z.im;
                r[(i + d) * n + j] = z.im;
            }
        }
        r
    }
}

/// `Re Σ a_jk conj(b_jk)`, i.e. `Re tr(A B)` when `B` is Hermitian.
pub fn frobenius_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: CVector,
}

/// Largest eigenvalue and its unit eigenvector. The vector is rotated so its
/// largest-magnitude entry is real and nonnegative.
pub fn max_eigenpair(a: &HermitianMatrix) -> EigenPair {
    let d = a.dim();
    let (values, vectors) = jacobi_eigen(a.real_embedding(), 2 * d);
    let n = 2 * d;
    let top = (0..n)
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("nonempty spectrum");
    let mut u = CVector::from_fn(d, |i, _| Complex64::new(vectors[i * n + top], vectors[(i + d) * n + top]));
    let norm = u.norm();
    u /= Complex64::new(norm, 0.0);
    apply_phase_convention(&mut u);
    EigenPair { value: values[top], vector: u }
}

/// All eigenvalues in descending order.
pub fn eigenvalues(a: &HermitianMatrix) -> Vec<f64> {
    let d = a.dim();
    let (mut values, _) = jacobi_eigen(a.real_embedding(), 2 * d);
    values.sort_by(|x, y| y.total_cmp(x));
    values.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect()
}

pub fn min_eigenvalue(a: &HermitianMatrix) -> f64 {
    *eigenvalues(a).last().expect("nonempty spectrum")
}

/// `tr(A) - λ_max(A)`; zero exactly for PSD matrices of rank at most one.
pub fn rank_one_gap(a: &HermitianMatrix) -> Result<f64> {
    let values = eigenvalues(a);
    let lmax = values[0];
    let lmin = *values.last().unwrap();
    if lmin < -PSD_TOL * lmax.abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "matrix is indefinite (minimum eigenvalue {lmin:.3e})"
        )));
    }
    Ok(a.trace() - lmax)
}

pub fn is_psd(a: &HermitianMatrix) -> bool {
    let values = eigenvalues(a);
    values[values.len() - 1] >= -PSD_TOL * values[0].abs().max(1.0)
}

/// Rotates `u` so that its largest-magnitude entry (lowest index among
/// near-ties) is real and nonnegative.
pub fn apply_phase_convention(u: &mut CVector) {
    let max = u.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = u
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .expect("max entry exists");
    let phase = u[pivot].conj() / u[pivot].norm();
    for z in u.iter_mut() {
        *z *= phase;
    }
    u[pivot] = Complex64::new(u[pivot].norm(), 0.0);
}

/// Cyclic Jacobi for a real symmetric row-major matrix. Returns the
/// eigenvalues (unsorted) and the eigenvectors as columns of a row-major
/// matrix.
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    let floor = (f64::EPSILON * f64::EPSILON) * total.max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= floor {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let g = a[r * n + p];
                    let h = a[r * n + q];
                    let gp = g - s * (h + g * tau);
                    let hq = h + s * (g - h * tau);
                    a[r * n + p] = gp;
                    a[p * n + r] = gp;
                    a[r * n + q] = hq;
                    a[q * n + r] = hq;
                }
                for r in 0..n {
                    let g = v[r * n + p];
                    let h = v[r * n + q];
                    v[r * n + p] = g - s * (h + g * tau);
                    v[r * n + q] = h + s * (g - h * tau);
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    (values, v)
}
