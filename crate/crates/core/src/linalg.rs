//! Dense complex linear algebra: Hermitian operators, projectors, and the
//! spectral machinery behind time evolution.
//!
//! Everything is stored densely. The Hilbert spaces handled here are the
//! product of a small system and a modest environment, so `O(d^3)`
//! factorizations are cheap.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexVector = DVector<C64>;
pub type ComplexMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Numerical tolerances shared across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `| |v| - 1 |` allowed for a unit vector.
    pub unit_norm: f64,
    /// Frobenius tolerance for `P^2 = P`, `P = P^dagger` and the trace check.
    pub projector: f64,
    /// Relative reconstruction error allowed for a spectral decomposition.
    pub spectral: f64,
    /// Hermiticity corrections larger than this are logged.
    pub hermitian_warn: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unit_norm: 1e-12,
            projector: 1e-10,
            spectral: 1e-10,
            hermitian_warn: 1e-12,
        }
    }
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_unit(v: &ComplexVector, tol: f64) -> bool {
    (v.norm() - 1.0).abs() < tol
}

/// `<a|b>` with the conjugate on the left argument.
pub fn inner(a: &ComplexVector, b: &ComplexVector) -> C64 {
    a.dotc(b)
}

/// Identity matrix of dimension `d`.
pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

/// `A (x) I_d2` as a dense matrix, with product index `i * d2 + j`.
pub fn kron_identity(a: &ComplexMatrix, d2: usize) -> ComplexMatrix {
    let d1 = a.nrows();
    let mut out = ComplexMatrix::zeros(d1 * d2, d1 * d2);
    for r in 0..d1 {
        for c in 0..d1 {
            let z = a[(r, c)];
            if z == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d2 {
                out[(r * d2 + j, c * d2 + j)] = z;
            }
        }
    }
    out
}

/// Reshape a product-space vector into its `d1 x d2` coefficient matrix.
pub fn to_coefficients(v: &ComplexVector, d1: usize, d2: usize) -> ComplexMatrix {
    debug_assert_eq!(v.len(), d1 * d2);
    ComplexMatrix::from_row_slice(d1, d2, v.as_slice())
}

/// Inverse of [`to_coefficients`].
pub fn from_coefficients(m: &ComplexMatrix) -> ComplexVector {
    let (d1, d2) = m.shape();
    ComplexVector::from_iterator(d1 * d2, (0..d1).flat_map(|i| (0..d2).map(move |j| m[(i, j)])))
}

/// A Hermitian matrix. Construction symmetrizes the input.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Builds `(M + M^dagger) / 2`, warning when the correction exceeds the
    /// default tolerance.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerances::default().hermitian_warn)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, warn_above: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let sym = (&matrix + matrix.adjoint()).scale(0.5);
        let correction = frobenius(&(&sym - &matrix));
        if correction > warn_above {
            log::warn!("symmetrized non-Hermitian input (correction {correction:.3e})");
        }
        Ok(Self { matrix: sym })
    }

    /// Wraps a matrix whose entries were written Hermitian by construction.
    pub(crate) fn from_hermitian_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        Self { matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }
}

/// An orthogonal projector together with its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: ComplexMatrix,
    rank: usize,
}

impl Projector {
    /// Validates idempotence, self-adjointness and an integral trace.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerances::default().projector)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotAProjector("matrix is not square".into()));
        }
        let herm = frobenius(&(&matrix - matrix.adjoint()));
        if herm > tol {
            return Err(Error::NotAProjector(format!("P - P^dagger = {herm:.3e}")));
        }
        let idem = frobenius(&(&matrix * &matrix - &matrix));
        if idem > tol {
            return Err(Error::NotAProjector(format!("P^2 - P = {idem:.3e}")));
        }
        let tr = matrix.trace();
        let rank = tr.re.round();
        if (tr.re - rank).abs() > tol || tr.im.abs() > tol || rank < 0.0 {
            return Err(Error::NotAProjector(format!("trace {tr} is not a rank")));
        }
        Ok(Self {
            matrix,
            rank: rank as usize,
        })
    }

    /// Projector onto the span of the given orthonormal columns.
    pub fn onto_columns(basis: &ComplexMatrix) -> Self {
        Self {
            matrix: basis * basis.adjoint(),
            rank: basis.ncols(),
        }
    }

    pub(crate) fn from_parts_unchecked(matrix: ComplexMatrix, rank: usize) -> Self {
        Self { matrix, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn complement(&self) -> Self {
        Self {
            matrix: identity(self.dim()) - &self.matrix,
            rank: self.dim() - self.rank,
        }
    }

    pub fn apply(&self, v: &ComplexVector) -> ComplexVector {
        &self.matrix * v
    }
}

/// `H = V diag(eigenvalues) V^dagger` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lambda);
        }
        scaled * v.adjoint()
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let phase = C64::from_polar(1.0, -lambda * t);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        scaled * v.adjoint()
    }
}

pub fn eigendecompose(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    eigendecompose_with(h, Tolerances::default().spectral)
}

pub fn eigendecompose_with(h: &HermitianOperator, tol: f64) -> Result<SpectralDecomposition> {
    let eig = SymmetricEigen::try_new(h.matrix().clone(), f64::EPSILON, 10_000)
        .ok_or(Error::EigenNonConvergence { residual: f64::NAN })?;

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(h.dim(), h.dim(), |r, c| eig.eigenvectors[(r, order[c])]);

    let decomp = SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    };
    let scale = frobenius(h.matrix()).max(1.0);
    let residual = frobenius(&(decomp.reconstruct() - h.matrix()));
    let ortho = frobenius(&(decomp.eigenvectors.adjoint() * &decomp.eigenvectors - identity(h.dim())));
    if residual > tol * scale || ortho > tol {
        return Err(Error::EigenNonConvergence {
            residual: residual.max(ortho),
        });
    }
    Ok(decomp)
}

/// `exp(-i H t)` computed through the spectral decomposition of `H`.
pub fn propagator(h: &HermitianOperator, t: f64) -> Result<ComplexMatrix> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} is not finite")));
    }
    Ok(eigendecompose(h)?.propagator(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn random_hermitian(d: usize, seed: u64) -> HermitianOperator {
        let mut rng = crate::rng::RandomStream::new(seed);
        crate::gue::sample_gue(&crate::gue::GueSpec::new(d), &mut rng)
    }

    /// `exp(-iHt)` by scaling and squaring a truncated Taylor series.
    fn taylor_propagator(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let d = h.nrows();
        let a = h.scale(1.0).map(|z| z * C64::new(0.0, -t));
        let norm = frobenius(&a);
        let squarings = (norm.log2().ceil().max(0.0) as u32) + 4;
        let scaled = a.map(|z| z / 2f64.powi(squarings as i32));
        let mut term = identity(d);
        let mut sum = identity(d);
        for k in 1..30 {
            term = &term * &scaled / C64::new(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn identity_eigenvalues() {
        let h = HermitianOperator::new(identity(3)).unwrap();
        let s = eigendecompose(&h).unwrap();
        for &l in &s.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
        let g = s.eigenvectors.adjoint() * &s.eigenvectors;
        assert!(frobenius(&(g - identity(3))) < 1e-12);
    }

    #[test]
    fn diagonal_is_sorted_ascending() {
        let h = HermitianOperator::from_real_diagonal(&[2.0, -1.0]);
        let s = eigendecompose(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![-1.0, 2.0]);
        assert!((s.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((s.eigenvectors[(0, 1)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        let h = random_hermitian(6, 11);
        let s = eigendecompose(&h).unwrap();
        let err = frobenius(&(s.reconstruct() - h.matrix()));
        assert!(err < 1e-10 * frobenius(h.matrix()));
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let h = random_hermitian(5, 3);
        let u = propagator(&h, 0.0).unwrap();
        assert!(frobenius(&(u - identity(5))) < 1e-12);
    }

    #[test]
    fn propagator_phase_arithmetic() {
        let h = HermitianOperator::from_real_diagonal(&[PI, 0.0]);
        let u = propagator(&h, 1.0).unwrap();
        assert!((u[(0, 0)] - C64::new(-1.0, 0.0)).norm() < 1e-14);
        assert!((u[(1, 1)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(u[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn propagator_matches_taylor_series() {
        let h = random_hermitian(7, 5);
        let u = propagator(&h, 0.3).unwrap();
        let oracle = taylor_propagator(h.matrix(), 0.3);
        assert!(frobenius(&(u - oracle)) < 1e-9);
    }

    #[test]
    fn rejects_non_finite_time() {
        let h = random_hermitian(2, 1);
        assert!(propagator(&h, f64::NAN).is_err());
    }

    #[test]
    fn hermitian_constructor_symmetrizes() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 1.0);
        let h = HermitianOperator::new(m).unwrap();
        assert_eq!(h.matrix()[(0, 1)], C64::new(0.5, 0.5));
        assert_eq!(h.matrix()[(1, 0)], C64::new(0.5, -0.5));
    }

    #[test]
    fn projector_validation() {
        let mut m = ComplexMatrix::zeros(3, 3);
        m[(0, 0)] = C64::new(1.0, 0.0);
        let p = Projector::new(m.clone()).unwrap();
        assert_eq!(p.rank(), 1);
        assert_eq!(p.complement().rank(), 2);
        m[(1, 1)] = C64::new(0.5, 0.0);
        assert!(Projector::new(m).is_err());
    }

    #[test]
    fn coefficient_reshape_round_trip() {
        let v = ComplexVector::from_fn(6, |i, _| C64::new(i as f64, -(i as f64)));
        let m = to_coefficients(&v, 2, 3);
        assert_eq!(m[(1, 0)], v[3]);
        assert_eq!(from_coefficients(&m), v);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn unitarity_and_group_law(seed in 0u64..1000, t1 in -5.0f64..5.0, t2 in -5.0f64..5.0) {
                let h = random_hermitian(6, seed);
                let s = eigendecompose(&h).unwrap();
                let u1 = s.propagator(t1);
                let u2 = s.propagator(t2);
                let u12 = s.propagator(t1 + t2);
                prop_assert!(frobenius(&(u1.adjoint() * &u1 - identity(6))) < 1e-9);
                prop_assert!(frobenius(&(u12 - &u1 * &u2)) < 1e-9);
            }

            #[test]
            fn norm_preservation(seed in 0u64..1000, t in -10.0f64..10.0) {
                let h = random_hermitian(5, seed);
                let u = propagator(&h, t).unwrap();
                let psi = ComplexVector::from_fn(5, |i, _| C64::new(1.0 + i as f64, 0.5));
                prop_assert!(((&u * &psi).norm() - psi.norm()).abs() < 1e-10 * psi.norm());
            }
        }
    }
}
