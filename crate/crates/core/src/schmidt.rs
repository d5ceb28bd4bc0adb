//! Bipartite pure states, their Schmidt decompositions and the projections
//! built from the system-side Schmidt basis.
//!
//! A state on `H1 (x) H2` is stored as a flat vector with component `(i, j)`
//! at index `i * d2 + j`. Its `d1 x d2` coefficient matrix `M` has the
//! singular value decomposition `M = U S V^dagger`, so the Schmidt weights
//! are the squared singular values, the system-side Schmidt vectors are the
//! columns of `U`, and the environment-side vectors are the rows of
//! `V^dagger`.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::linalg::{
    frobenius, identity, kron_identity, to_coefficients, ComplexMatrix, ComplexVector, HermitianOperator, Projector,
    C64, I,
};
use crate::rng::RandomStream;

/// Weights closer than this are treated as one degenerate eigenspace.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    vector: ComplexVector,
    d1: usize,
    d2: usize,
}

impl BipartiteState {
    pub fn new(vector: ComplexVector, d1: usize, d2: usize) -> Result<Self> {
        check_dims(d1, d2)?;
        if vector.len() != d1 * d2 {
            return Err(Error::DimensionMismatch {
                expected: d1 * d2,
                got: vector.len(),
            });
        }
        let norm = vector.norm();
        if (norm - 1.0).abs() >= 1e-12 {
            return Err(Error::InvalidArgument(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { vector, d1, d2 })
    }

    /// Normalizes `vector` before wrapping it.
    pub fn normalized(vector: ComplexVector, d1: usize, d2: usize) -> Result<Self> {
        let norm = vector.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Self::new(vector / C64::new(norm, 0.0), d1, d2)
    }

    /// `|u> (x) |v>` for unit `u`, `v`.
    pub fn product(u: &ComplexVector, v: &ComplexVector) -> Result<Self> {
        let d1 = u.len();
        let d2 = v.len();
        let vector = ComplexVector::from_fn(d1 * d2, |k, _| u[k / d2] * v[k % d2]);
        Self::normalized(vector, d1, d2)
    }

    pub fn vector(&self) -> &ComplexVector {
        &self.vector
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    pub fn coefficients(&self) -> ComplexMatrix {
        to_coefficients(&self.vector, self.d1, self.d2)
    }

    pub fn evolved(&self, propagator: &ComplexMatrix) -> Self {
        Self {
            vector: propagator * &self.vector,
            d1: self.d1,
            d2: self.d2,
        }
    }
}

fn check_dims(d1: usize, d2: usize) -> Result<()> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::InvalidArgument("factor dimensions must be positive".into()));
    }
    if d1 > d2 {
        return Err(Error::InvalidArgument(format!("require d1 <= d2, got d1 = {d1}, d2 = {d2}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposition {
    /// Non-increasing after [`schmidt_decompose`]; [`continuity_align`] may
    /// reorder them to follow the vectors in time.
    pub weights: Vec<f64>,
    /// System-side Schmidt vectors as columns (`d1 x d1`).
    pub left: ComplexMatrix,
    /// Environment-side Schmidt vectors as columns (`d2 x d1`).
    pub right: ComplexMatrix,
    pub time: f64,
}

impl SchmidtDecomposition {
    pub fn d1(&self) -> usize {
        self.left.nrows()
    }

    pub fn d2(&self) -> usize {
        self.right.nrows()
    }

    pub fn reconstruct(&self) -> ComplexVector {
        let (d1, d2) = (self.d1(), self.d2());
        let mut v = ComplexVector::zeros(d1 * d2);
        for (i, &p) in self.weights.iter().enumerate() {
            let s = p.max(0.0).sqrt();
            for a in 0..d1 {
                let la = self.left[(a, i)] * s;
                for b in 0..d2 {
                    v[a * d2 + b] += la * self.right[(b, i)];
                }
            }
        }
        v
    }

    /// Groups of labels whose weights lie within `tol` of each other
    /// (transitively). Singletons are omitted.
    pub fn degenerate_clusters(&self, tol: f64) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.weights.len()).collect();
        order.sort_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]));
        let mut clusters = Vec::new();
        let mut current = vec![order[0]];
        for w in order.windows(2) {
            if (self.weights[w[1]] - self.weights[w[0]]).abs() < tol {
                current.push(w[1]);
            } else {
                if current.len() > 1 {
                    clusters.push(std::mem::take(&mut current));
                }
                current = vec![w[1]];
            }
        }
        if current.len() > 1 {
            clusters.push(current);
        }
        for c in clusters.iter_mut() {
            c.sort_unstable();
        }
        clusters
    }

    pub fn is_degenerate(&self, tol: f64) -> bool {
        !self.degenerate_clusters(tol).is_empty()
    }

    /// True when `partition` separates two labels of one degenerate
    /// eigenspace, which makes the corresponding projection ill-defined.
    pub fn splits_degenerate_space(&self, partition: &SchmidtPartition, tol: f64) -> bool {
        self.degenerate_clusters(tol).iter().any(|c| {
            let inside = c.iter().filter(|&&i| partition.contains(i)).count();
            inside != 0 && inside != c.len()
        })
    }

    /// `|w_i><w_i|` on the system factor.
    pub fn system_projector(&self, indices: &[usize]) -> ComplexMatrix {
        let cols: Vec<_> = indices.iter().map(|&i| self.left.column(i).into_owned()).collect();
        if cols.is_empty() {
            return ComplexMatrix::zeros(self.d1(), self.d1());
        }
        let w = ComplexMatrix::from_columns(&cols);
        &w * w.adjoint()
    }
}

/// A proper, non-empty subset `S` of the Schmidt labels `{0, .., d1 - 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchmidtPartition {
    indices: Vec<usize>,
    d1: usize,
}

impl SchmidtPartition {
    pub fn new(mut indices: Vec<usize>, d1: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() || indices.len() >= d1 {
            return Err(Error::InvalidArgument(format!(
                "partition must be a non-empty proper subset of {d1} labels, got {indices:?}"
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= d1) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for d1 = {d1}")));
        }
        Ok(Self { indices, d1 })
    }

    /// The `2^(d1 - 1) - 1` unordered binary partitions. Each is represented
    /// by the side containing label 0; position in the list is the partition
    /// index used for tie-breaking and output.
    pub fn all_binary(d1: usize) -> Vec<SchmidtPartition> {
        if d1 < 2 {
            return Vec::new();
        }
        let rest = d1 - 1;
        let full = (1usize << rest) - 1;
        (0..full)
            .map(|mask| {
                let mut idx = vec![0];
                idx.extend((0..rest).filter(|b| mask & (1 << b) != 0).map(|b| b + 1));
                SchmidtPartition { indices: idx, d1 }
            })
            .collect()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.d1).filter(|&i| !self.contains(i)).collect()
    }
}

/// Weights are squared coordinates of a uniform unit vector in `R^rank`,
/// padded with zeros; both Schmidt bases are Haar distributed.
pub fn random_initial_state(d1: usize, d2: usize, rank: usize, stream: &mut RandomStream) -> Result<BipartiteState> {
    check_dims(d1, d2)?;
    if rank == 0 || rank > d1 {
        return Err(Error::InvalidArgument(format!("rank must lie in 1..={d1}, got {rank}")));
    }
    let amplitudes: Vec<f64> = loop {
        let x: Vec<f64> = (0..rank).map(|_| stream.standard_normal()).collect();
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-300 {
            break x.iter().map(|v| (v / n).abs()).collect();
        }
    };
    let left = stream.haar_unitary(d1);
    let right = stream.orthonormal_columns(d2, d1);
    let mut v = ComplexVector::zeros(d1 * d2);
    for (i, &amp) in amplitudes.iter().enumerate() {
        for a in 0..d1 {
            let la = left[(a, i)] * amp;
            for b in 0..d2 {
                v[a * d2 + b] += la * right[(b, i)];
            }
        }
    }
    BipartiteState::normalized(v, d1, d2)
}

/// `Tr_2 |psi><psi|`.
pub fn reduced_density_matrix(state: &BipartiteState) -> HermitianOperator {
    let m = state.coefficients();
    let rho = &m * m.adjoint();
    let rho = (&rho + rho.adjoint()).scale(0.5);
    HermitianOperator::from_hermitian_unchecked(rho)
}

pub fn schmidt_decompose(state: &BipartiteState) -> SchmidtDecomposition {
    schmidt_decompose_at(state, 0.0)
}

/// Decomposition tagged with the time the state refers to.
pub fn schmidt_decompose_at(state: &BipartiteState, time: f64) -> SchmidtDecomposition {
    decompose_coefficients(&state.coefficients(), time)
}

pub(crate) fn decompose_coefficients(m: &ComplexMatrix, time: f64) -> SchmidtDecomposition {
    let (d1, d2) = m.shape();
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..d1).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut weights = Vec::with_capacity(d1);
    let mut left = ComplexMatrix::zeros(d1, d1);
    let mut right = ComplexMatrix::zeros(d2, d1);
    for (slot, &i) in order.iter().enumerate() {
        let s = svd.singular_values[i];
        weights.push(s * s);
        // Largest-magnitude component of the system vector made real positive.
        let mut pivot = 0;
        for a in 1..d1 {
            if u[(a, i)].norm() > u[(pivot, i)].norm() {
                pivot = a;
            }
        }
        let z = u[(pivot, i)];
        let phase = if z.norm() > 0.0 { z.conj() / z.norm() } else { C64::new(1.0, 0.0) };
        for a in 0..d1 {
            left[(a, slot)] = u[(a, i)] * phase;
        }
        for b in 0..d2 {
            right[(b, slot)] = v_t[(i, b)] / phase;
        }
    }
    SchmidtDecomposition {
        weights,
        left,
        right,
        time,
    }
}

/// Relabels and rephases `current` so each Schmidt pair continues the pair
/// of `previous` it overlaps most (greedy on `|<w_i(t)|w_j(t - dt)>|`).
pub fn continuity_align(current: &SchmidtDecomposition, previous: &SchmidtDecomposition) -> SchmidtDecomposition {
    let d1 = current.d1();
    assert_eq!(d1, previous.d1(), "decompositions of different dimensions");
    let overlap = previous.left.adjoint() * &current.left; // (prev j, cur i)

    let mut assigned_prev = vec![false; d1];
    let mut assigned_cur = vec![false; d1];
    let mut target = vec![usize::MAX; d1]; // cur i -> slot j
    for _ in 0..d1 {
        let mut best = (usize::MAX, usize::MAX, -1.0);
        for j in (0..d1).filter(|&j| !assigned_prev[j]) {
            for i in (0..d1).filter(|&i| !assigned_cur[i]) {
                let o = overlap[(j, i)].norm();
                if o > best.2 {
                    best = (j, i, o);
                }
            }
        }
        let (j, i, _) = best;
        assigned_prev[j] = true;
        assigned_cur[i] = true;
        target[i] = j;
    }

    let mut out = current.clone();
    for i in 0..d1 {
        let j = target[i];
        let c = overlap[(j, i)];
        let phase = if c.norm() > 0.0 { c.conj() / c.norm() } else { C64::new(1.0, 0.0) };
        out.weights[j] = current.weights[i];
        for a in 0..d1 {
            out.left[(a, j)] = current.left[(a, i)] * phase;
        }
        for b in 0..current.d2() {
            out.right[(b, j)] = current.right[(b, i)] / phase;
        }
    }
    out
}

/// `P_S = sum_{i in S} |w_i><w_i| (x) I_2` on the full space.
pub fn schmidt_projector(decomp: &SchmidtDecomposition, partition: &SchmidtPartition) -> Projector {
    let q = decomp.system_projector(partition.indices());
    Projector::from_parts_unchecked(kron_identity(&q, decomp.d2()), partition.indices().len() * decomp.d2())
}

/// `d rho_r / dt` under `H` for the pure state `psi`.
pub fn reduced_density_derivative(h: &HermitianOperator, state: &BipartiteState) -> ComplexMatrix {
    let (d1, d2) = (state.d1(), state.d2());
    let phi = to_coefficients(&(h.matrix() * state.vector()), d1, d2);
    let psi = state.coefficients();
    let commutator = &phi * psi.adjoint() - &psi * phi.adjoint();
    commutator * (-I)
}

/// The Hermitian operator `B` on `H1` for which the Heisenberg-picture
/// Schmidt projector obeys `dP/dt = i [H - B (x) I, P]`:
/// `B = i sum_{k != m} Q_k rho_r' Q_m / (p_m - p_k)`.
///
/// Pairs of labels on the same side of `partition` drop out of the
/// commutator with `P`, so only pairs straddling the partition must be
/// non-degenerate.
pub fn schmidt_generator(
    h: &HermitianOperator,
    state: &BipartiteState,
    partition: &SchmidtPartition,
    tol: f64,
) -> Result<ComplexMatrix> {
    let decomp = schmidt_decompose(state);
    let rho_dot = reduced_density_derivative(h, state);
    let d1 = state.d1();
    let mut b = ComplexMatrix::zeros(d1, d1);
    for k in 0..d1 {
        for m in 0..d1 {
            if k == m {
                continue;
            }
            let gap = decomp.weights[m] - decomp.weights[k];
            if gap.abs() < tol {
                if partition.contains(k) != partition.contains(m) {
                    return Err(Error::Degenerate {
                        first: decomp.weights[k],
                        second: decomp.weights[m],
                        tolerance: tol,
                    });
                }
                continue;
            }
            let wk = decomp.left.column(k);
            let wm = decomp.left.column(m);
            let element = wk.dotc(&(&rho_dot * wm));
            b += (&wk * wm.adjoint()) * (element / gap);
        }
    }
    Ok(b * I)
}

/// Heisenberg-picture time derivative of the Schmidt projector `P_S`.
pub fn projector_derivative(
    h: &HermitianOperator,
    state: &BipartiteState,
    partition: &SchmidtPartition,
) -> Result<ComplexMatrix> {
    if h.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: h.dim(),
        });
    }
    let b = schmidt_generator(h, state, partition, DEGENERACY_TOLERANCE)?;
    let decomp = schmidt_decompose(state);
    let p = schmidt_projector(&decomp, partition);
    let g = h.matrix() - kron_identity(&b, state.d2());
    let pm = p.matrix();
    Ok((&g * pm - pm * &g) * I)
}

/// `sum_i P_i - I` in Frobenius norm; zero when the system basis is complete.
pub fn completeness_defect(decomp: &SchmidtDecomposition) -> f64 {
    let all: Vec<usize> = (0..decomp.d1()).collect();
    frobenius(&(decomp.system_projector(&all) - identity(decomp.d1())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gue::{sample_gue, GueSpec};
    use crate::linalg::eigendecompose;
    use crate::stats::empirical::ks_one_sample;

    fn bell() -> BipartiteState {
        let mut v = ComplexVector::zeros(4);
        v[0] = C64::new(1.0, 0.0);
        v[3] = C64::new(1.0, 0.0);
        BipartiteState::normalized(v, 2, 2).unwrap()
    }

    fn assert_valid(d: &SchmidtDecomposition, psi: &ComplexVector) {
        assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let gl = d.left.adjoint() * &d.left;
        let gr = d.right.adjoint() * &d.right;
        assert!(frobenius(&(gl - identity(d.d1()))) < 1e-10);
        assert!(frobenius(&(gr - identity(d.d1()))) < 1e-10);
        assert!((d.reconstruct() - psi).norm() < 1e-9);
    }

    #[test]
    fn bell_state_weights() {
        let s = bell();
        let d = schmidt_decompose(&s);
        assert!((d.weights[0] - 0.5).abs() < 1e-14);
        assert!((d.weights[1] - 0.5).abs() < 1e-14);
        let rho = reduced_density_matrix(&s);
        assert!(frobenius(&(rho.matrix() - identity(2).scale(0.5))) < 1e-14);
    }

    #[test]
    fn product_state_weights() {
        let mut r = RandomStream::new(1);
        let u = r.unit_vector(3);
        let v = r.unit_vector(5);
        let s = BipartiteState::product(&u, &v).unwrap();
        let d = schmidt_decompose(&s);
        assert!((d.weights[0] - 1.0).abs() < 1e-12);
        assert!(d.weights[1] < 1e-24 && d.weights[2] < 1e-24);
        assert_valid(&d, s.vector());
        let rho = reduced_density_matrix(&s);
        assert!(frobenius(&(rho.matrix() - &u * u.adjoint())) < 1e-12);
    }

    #[test]
    fn rank_one_initial_state_is_product() {
        let mut r = RandomStream::new(2);
        let s = random_initial_state(3, 15, 1, &mut r).unwrap();
        let d = schmidt_decompose(&s);
        assert!((d.weights[0] - 1.0).abs() < 1e-12);
        let e = eigendecompose(&reduced_density_matrix(&s)).unwrap();
        assert_eq!(e.eigenvalues.iter().filter(|&&l| l > 1e-12).count(), 1);
    }

    #[test]
    fn full_rank_initial_state_has_positive_weights() {
        let mut r = RandomStream::new(3);
        for _ in 0..20 {
            let s = random_initial_state(3, 15, 3, &mut r).unwrap();
            let d = schmidt_decompose(&s);
            assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.weights.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn rank_out_of_range() {
        let mut r = RandomStream::new(3);
        assert!(random_initial_state(3, 15, 0, &mut r).is_err());
        assert!(random_initial_state(3, 15, 4, &mut r).is_err());
        assert!(random_initial_state(4, 3, 1, &mut r).is_err());
    }

    #[test]
    fn rank_two_weights_follow_arcsine_law() {
        // Largest squared coordinate of a uniform point on the circle:
        // P(max <= x) = (4/pi) asin(sqrt(x)) - 1 for x in [1/2, 1].
        let mut r = RandomStream::new(4);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| schmidt_decompose(&random_initial_state(2, 3, 2, &mut r).unwrap()).weights[0])
            .collect();
        let cdf = |x: f64| {
            let x = x.clamp(0.5, 1.0);
            4.0 / std::f64::consts::PI * x.sqrt().asin() - 1.0
        };
        let ks = ks_one_sample(&samples, cdf);
        assert!(ks < 0.02, "KS {ks}");
    }

    #[test]
    fn weights_match_reduced_density_eigenvalues() {
        let mut r = RandomStream::new(5);
        for _ in 0..100 {
            let s = random_initial_state(3, 7, 3, &mut r).unwrap();
            let d = schmidt_decompose(&s);
            assert_valid(&d, s.vector());
            let e = eigendecompose(&reduced_density_matrix(&s)).unwrap();
            let mut ev = e.eigenvalues.clone();
            ev.reverse();
            for (a, b) in d.weights.iter().zip(&ev) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn phase_convention_is_applied() {
        let mut r = RandomStream::new(6);
        let s = random_initial_state(3, 4, 3, &mut r).unwrap();
        let d = schmidt_decompose(&s);
        for i in 0..3 {
            let col = d.left.column(i);
            let pivot = (0..3).max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm())).unwrap();
            assert!(col[pivot].im.abs() < 1e-14 && col[pivot].re > 0.0);
        }
    }

    #[test]
    fn completeness_and_singletons() {
        let mut r = RandomStream::new(7);
        let s = random_initial_state(3, 5, 3, &mut r).unwrap();
        let d = schmidt_decompose(&s);
        assert!(completeness_defect(&d) < 1e-10);
        let total: ComplexMatrix = (0..3).map(|i| kron_identity(&d.system_projector(&[i]), 5)).fold(
            ComplexMatrix::zeros(15, 15),
            |acc, m| acc + m,
        );
        assert!(frobenius(&(total - identity(15))) < 1e-10);
        for i in 0..2 {
            let p = schmidt_projector(&d, &SchmidtPartition::new(vec![i], 3).unwrap());
            assert!((p.apply(s.vector()).norm_squared() - d.weights[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn partitions_enumerate() {
        let p = SchmidtPartition::all_binary(3);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0].indices(), &[0]);
        assert_eq!(p[1].indices(), &[0, 1]);
        assert_eq!(p[2].indices(), &[0, 2]);
        assert_eq!(SchmidtPartition::all_binary(4).len(), 7);
        assert_eq!(SchmidtPartition::all_binary(2).len(), 1);
        assert!(SchmidtPartition::new(vec![0, 1, 2], 3).is_err());
        assert!(SchmidtPartition::new(vec![], 3).is_err());
        assert!(SchmidtPartition::new(vec![5], 3).is_err());
    }

    #[test]
    fn align_identity_and_swap() {
        let mut r = RandomStream::new(8);
        let s = random_initial_state(3, 5, 3, &mut r).unwrap();
        let d = schmidt_decompose(&s);
        let same = continuity_align(&d, &d);
        assert!(frobenius(&(&same.left - &d.left)) < 1e-14);
        assert_eq!(same.weights, d.weights);

        let mut swapped = d.clone();
        swapped.weights.swap(0, 2);
        swapped.left.swap_columns(0, 2);
        swapped.right.swap_columns(0, 2);
        let back = continuity_align(&swapped, &d);
        assert_eq!(back.weights, d.weights);
        assert!(frobenius(&(&back.left - &d.left)) < 1e-14);
        assert!((back.reconstruct() - s.vector()).norm() < 1e-9);
    }

    #[test]
    fn projector_derivative_vanishes_for_scalar_hamiltonian() {
        let mut r = RandomStream::new(9);
        let s = random_initial_state(2, 3, 2, &mut r).unwrap();
        let h = HermitianOperator::new(identity(6).scale(2.5)).unwrap();
        let part = SchmidtPartition::new(vec![0], 2).unwrap();
        let pd = projector_derivative(&h, &s, &part).unwrap();
        assert!(frobenius(&pd) < 1e-12);
    }

    #[test]
    fn projector_derivative_is_hermitian_traceless() {
        let mut r = RandomStream::new(10);
        let s = random_initial_state(3, 4, 3, &mut r).unwrap();
        let h = sample_gue(&GueSpec::new(12), &mut r);
        let part = SchmidtPartition::new(vec![0, 2], 3).unwrap();
        let pd = projector_derivative(&h, &s, &part).unwrap();
        assert!(frobenius(&(&pd - pd.adjoint())) < 1e-10);
        assert!(pd.trace().norm() < 1e-9);
    }

    #[test]
    fn projector_derivative_degeneracy_error() {
        let s = bell();
        let mut r = RandomStream::new(11);
        let h = sample_gue(&GueSpec::new(4), &mut r);
        let part = SchmidtPartition::new(vec![0], 2).unwrap();
        assert!(matches!(projector_derivative(&h, &s, &part), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn degenerate_clusters_detected() {
        let d = SchmidtDecomposition {
            weights: vec![1.0, 0.0, 0.0],
            left: identity(3),
            right: ComplexMatrix::identity(4, 3),
            time: 0.0,
        };
        assert_eq!(d.degenerate_clusters(1e-10), vec![vec![1, 2]]);
        let keep = SchmidtPartition::new(vec![0], 3).unwrap();
        let split = SchmidtPartition::new(vec![0, 1], 3).unwrap();
        assert!(!d.splits_degenerate_space(&keep, 1e-10));
        assert!(d.splits_degenerate_space(&split, 1e-10));
    }
}
