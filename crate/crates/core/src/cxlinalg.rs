//! Small dense complex linear algebra.
//!
//! Everything here works on matrices with a handful of rows (the antenna
//! count), so the routines favour accuracy and simplicity over blocking or
//! vectorisation. The Hermitian eigensolver is a cyclic complex Jacobi
//! method, which is unconditionally stable and converges quadratically once
//! the off-diagonal mass is small.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Tolerance for the Hermitian symmetry check on construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// An eigenvalue counts as positive iff `λ > RANK_TOL * max(λ_max, 1)`.
pub const RANK_TOL: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: |a[{row}][{col}] - conj(a[{col}][{row}])| = {deviation:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },
    #[error("matrix is rank deficient: numerical rank {rank} < dimension {dim}")]
    RankDeficient { rank: usize, dim: usize },
    #[error("non-finite entry in matrix")]
    NonFinite,
    #[error("Jacobi iteration did not converge in {0} sweeps")]
    NoConvergence(usize),
}

/// Dense complex column vector.
#[derive(Clone, PartialEq, Default)]
pub struct CVector(pub Vec<Complex64>);

impl CVector {
    pub fn zeros(len: usize) -> Self {
        CVector(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn from_real(values: &[f64]) -> Self {
        CVector(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// Inner product `selfᴴ other`.
    pub fn dot(&self, other: &CVector) -> Complex64 {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, factor: f64) -> CVector {
        CVector(self.0.iter().map(|z| z * factor).collect())
    }

    pub fn scale_complex(&self, factor: Complex64) -> CVector {
        CVector(self.0.iter().map(|z| z * factor).collect())
    }

    /// `self + factor * other`, in place.
    pub fn axpy(&mut self, factor: Complex64, other: &CVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    /// Unit vector in the same direction, or `None` for a (numerically) zero vector.
    pub fn normalized(&self) -> Option<CVector> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale(1.0 / n))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl fmt::Debug for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for CVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl Add for &CVector {
    type Output = CVector;
    fn add(self, rhs: &CVector) -> CVector {
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &CVector {
    type Output = CVector;
    fn sub(self, rhs: &CVector) -> CVector {
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// Square complex matrix, row-major. Hermitian symmetry is checked by
/// [`HermitianMatrix::validate`] and by the routines that rely on it.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries, validating Hermitian symmetry.
    pub fn from_rows(dim: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        assert_eq!(data.len(), dim * dim, "expected {dim}x{dim} entries");
        let m = HermitianMatrix { dim, data };
        m.validate()?;
        Ok(m)
    }

    /// `weight · v vᴴ`
    pub fn outer(v: &CVector, weight: f64) -> Self {
        let mut m = Self::zeros(v.len());
        m.add_outer(v, weight);
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `weight · v vᴴ` in place.
    pub fn add_outer(&mut self, v: &CVector, weight: f64) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i * self.dim + j] += v[i] * v[j].conj() * weight;
            }
        }
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        debug_assert_eq!(v.len(), self.dim);
        CVector(
            (0..self.dim)
                .map(|i| {
                    self.data[i * self.dim..(i + 1) * self.dim]
                        .iter()
                        .zip(&v.0)
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect(),
        )
    }

    /// Quadratic form `vᴴ A v`; real for Hermitian `A`.
    pub fn quad_form(&self, v: &CVector) -> f64 {
        v.dot(&self.mul_vec(v)).re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), LinalgError> {
        if self.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for i in 0..self.dim {
            for j in i..self.dim {
                let deviation = (self[(i, j)] - self[(j, i)].conj()).norm();
                if deviation > HERMITIAN_TOL * scale {
                    return Err(LinalgError::NotHermitian {
                        row: i,
                        col: j,
                        deviation,
                    });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<_> = self.data.chunks(self.dim.max(1)).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl Index<(usize, usize)> for HermitianMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for HermitianMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul<&HermitianMatrix> for &HermitianMatrix {
    type Output = HermitianMatrix;
    /// Plain matrix product. The result is only Hermitian when the factors
    /// commute, which is all the callers here need (`R A R` checks).
    fn mul(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        let n = self.dim;
        let mut out = HermitianMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out.data[i * n + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` belongs to `eigenvalues[i]`.
    pub eigenvectors: Vec<CVector>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of eigenvalues above the relative rank threshold.
    pub fn numerical_rank(&self) -> usize {
        let lambda_max = self.eigenvalues.first().copied().unwrap_or(0.0);
        let cutoff = RANK_TOL * lambda_max.max(1.0);
        self.eigenvalues.iter().filter(|&&l| l > cutoff).count()
    }

    /// `U diag(f(λ)) Uᴴ`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim();
        let mut out = HermitianMatrix::zeros(n);
        for (lambda, u) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            out.add_outer(u, f(*lambda));
        }
        out
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.reconstruct_with(|l| l)
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
pub fn eig_hermitian(a: &HermitianMatrix) -> Result<EigenDecomposition, LinalgError> {
    a.validate()?;
    let n = a.dim();
    let mut m = a.clone();
    // Symmetrise so that rounding in the input cannot bias the iteration.
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = HermitianMatrix::identity(n);
    let scale = m.frobenius_norm();

    let mut converged = n <= 1 || scale == 0.0;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence(MAX_JACOBI_SWEEPS));
    }

    let mut pairs: Vec<(f64, CVector)> = (0..n)
        .map(|i| (m[(i, i)].re, CVector((0..n).map(|r| v[(r, i)]).collect())))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Zeroes `m[p][q]` with the unitary `V = D R`, where `D` removes the phase
/// of the pivot and `R` is the real Jacobi rotation of the resulting 2x2 block.
fn jacobi_rotate(m: &mut HermitianMatrix, v: &mut HermitianMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    if r <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        m[(p, q)] = Complex64::new(0.0, 0.0);
        m[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    let phase = apq / r; // e^{iφ}
    let zeta = (aqq - app) / (2.0 * r);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let e_conj = phase.conj();
    let n = m.dim();

    // m <- m V (columns p, q)
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * c - akq * e_conj * s;
        m[(k, q)] = akp * s + akq * e_conj * c;
    }
    // m <- Vᴴ m (rows p, q)
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = apk * c - aqk * phase * s;
        m[(q, k)] = apk * s + aqk * phase * c;
    }
    m[(p, q)] = Complex64::new(0.0, 0.0);
    m[(q, p)] = Complex64::new(0.0, 0.0);
    m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * e_conj * s;
        v[(k, q)] = vkp * s + vkq * e_conj * c;
    }
}

/// `A^{-1/2}` for a positive definite `A`.
pub fn inv_sqrt(a: &HermitianMatrix) -> Result<HermitianMatrix, LinalgError> {
    let decomp = eig_hermitian(a)?;
    inv_sqrt_from(&decomp)
}

/// `A^{-1/2}` from an existing decomposition; fails unless every eigenvalue
/// clears the rank threshold.
pub fn inv_sqrt_from(decomp: &EigenDecomposition) -> Result<HermitianMatrix, LinalgError> {
    let rank = decomp.numerical_rank();
    if rank < decomp.dim() {
        return Err(LinalgError::RankDeficient {
            rank,
            dim: decomp.dim(),
        });
    }
    Ok(decomp.reconstruct_with(|l| 1.0 / l.sqrt()))
}

/// Orthogonal projection onto the span of the leading `rank` eigenvectors.
pub fn project_onto_range(decomp: &EigenDecomposition, rank: usize, v: &CVector) -> CVector {
    assert!(rank <= decomp.dim(), "rank {rank} exceeds dimension {}", decomp.dim());
    let mut out = CVector::zeros(v.len());
    for u in &decomp.eigenvectors[..rank] {
        out.axpy(u.dot(v), u);
    }
    out
}

/// Orthogonal projection onto the complement of the leading `rank` eigenvectors.
pub fn project_onto_null(decomp: &EigenDecomposition, rank: usize, v: &CVector) -> CVector {
    assert!(rank <= decomp.dim(), "rank {rank} exceeds dimension {}", decomp.dim());
    let mut out = CVector::zeros(v.len());
    for u in &decomp.eigenvectors[rank..] {
        out.axpy(u.dot(v), u);
    }
    out
}
