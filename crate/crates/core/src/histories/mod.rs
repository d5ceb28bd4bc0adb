//! Branch-dependent histories, the decoherence matrix and the consistency
//! and non-triviality criteria applied to it.
//!
//! Histories are carried as evolved branch vectors `C_alpha |psi>` rather
//! than operator chains, so `D_ab = <b|a>` is a Gram matrix. It is unchanged
//! by the unitary evolution applied to all branches between projections.

mod extension;
mod tree;

use std::fmt;
use std::str::FromStr;

pub use extension::{evaluate_extension, ExtensionContext, Verdict};
pub use tree::{HistoryNode, HistoryTree, NodeId};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, C64};

/// Branches with probability below this are recorded but never extended and
/// never enter a DHP.
pub const DEAD_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConsistencyKind {
    /// `|D_ab| <= eps sqrt(D_aa D_bb)`
    MediumDhc,
    /// `|Re D_ab| <= eps sqrt(D_aa D_bb)`
    WeakDhc,
    /// `|D_ab| <= eps`
    Absolute,
}

impl ConsistencyKind {
    pub fn name(self) -> &'static str {
        match self {
            ConsistencyKind::MediumDhc => "medium-dhc",
            ConsistencyKind::WeakDhc => "weak-dhc",
            ConsistencyKind::Absolute => "absolute",
        }
    }

    /// The pair statistic compared against epsilon.
    pub fn pair_measure(self, d_ab: C64, d_aa: f64, d_bb: f64) -> f64 {
        match self {
            ConsistencyKind::MediumDhc => d_ab.norm() / (d_aa * d_bb).sqrt(),
            ConsistencyKind::WeakDhc => d_ab.re.abs() / (d_aa * d_bb).sqrt(),
            ConsistencyKind::Absolute => d_ab.norm(),
        }
    }
}

impl fmt::Display for ConsistencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConsistencyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "medium-dhc" => Ok(ConsistencyKind::MediumDhc),
            "weak-dhc" => Ok(ConsistencyKind::WeakDhc),
            "absolute" => Ok(ConsistencyKind::Absolute),
            other => Err(Error::InvalidArgument(format!("unknown consistency criterion `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyCriterion {
    pub kind: ConsistencyKind,
    pub epsilon: f64,
}

impl ConsistencyCriterion {
    pub fn new(kind: ConsistencyKind, epsilon: f64) -> Result<Self> {
        let c = Self { kind, epsilon };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ConsistencyKind::MediumDhc | ConsistencyKind::WeakDhc => (0.0..=1.0).contains(&self.epsilon),
            ConsistencyKind::Absolute => self.epsilon >= 0.0 && self.epsilon.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "epsilon {} out of range for {}",
                self.epsilon, self.kind
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrivialityKind {
    /// Child probability over parent probability.
    Relative,
    /// Child probability.
    Absolute,
}

impl TrivialityKind {
    pub fn name(self) -> &'static str {
        match self {
            TrivialityKind::Relative => "relative",
            TrivialityKind::Absolute => "absolute",
        }
    }
}

impl fmt::Display for TrivialityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrivialityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(TrivialityKind::Relative),
            "absolute" => Ok(TrivialityKind::Absolute),
            other => Err(Error::InvalidArgument(format!("unknown triviality mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrivialityCriterion {
    pub kind: TrivialityKind,
    pub delta: f64,
}

impl TrivialityCriterion {
    pub fn new(kind: TrivialityKind, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be non-negative, got {delta}")));
        }
        Ok(Self { kind, delta })
    }

    /// A branch at or below the threshold (or below the dead floor) is trivial.
    pub fn is_trivial(&self, child_probability: f64, parent_probability: f64) -> bool {
        if child_probability < DEAD_FLOOR {
            return true;
        }
        match self.kind {
            TrivialityKind::Relative => child_probability <= self.delta * parent_probability,
            TrivialityKind::Absolute => child_probability <= self.delta,
        }
    }
}

/// `D_ab = <b|a>` over the given branch vectors.
pub fn decoherence_matrix(branches: &[ComplexVector]) -> ComplexMatrix {
    let k = branches.len();
    let mut d = ComplexMatrix::zeros(k, k);
    for a in 0..k {
        d[(a, a)] = C64::new(branches[a].norm_squared(), 0.0);
        for b in (a + 1)..k {
            let z = branches[b].dotc(&branches[a]);
            d[(a, b)] = z;
            d[(b, a)] = z.conj();
        }
    }
    d
}

/// Largest pair statistic over histories with `D_aa, D_bb` above the dead
/// floor. For the DHC kinds this is the Dowker-Halliwell parameter.
pub fn dhp(d: &ComplexMatrix, kind: ConsistencyKind) -> Result<f64> {
    let live: Vec<usize> = (0..d.nrows()).filter(|&a| d[(a, a)].re >= DEAD_FLOOR).collect();
    if live.len() < 2 {
        return Err(Error::UndefinedDhp);
    }
    let mut worst: f64 = 0.0;
    for (x, &a) in live.iter().enumerate() {
        for &b in &live[x + 1..] {
            worst = worst.max(kind.pair_measure(d[(a, b)], d[(a, a)].re, d[(b, b)].re));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use crate::rng::RandomStream;

    #[test]
    fn single_leaf_matrix() {
        let mut v = ComplexVector::zeros(3);
        v[1] = C64::new(0.0, 1.0);
        let d = decoherence_matrix(&[v]);
        assert_eq!(d[(0, 0)], C64::new(1.0, 0.0));
        assert!(matches!(dhp(&d, ConsistencyKind::MediumDhc), Err(Error::UndefinedDhp)));
    }

    #[test]
    fn orthogonal_branches_are_consistent() {
        let branches: Vec<_> = (0..3)
            .map(|i| {
                let mut v = ComplexVector::zeros(3);
                v[i] = C64::new(0.5, 0.0);
                v
            })
            .collect();
        let d = decoherence_matrix(&branches);
        assert!(frobenius(&(d.clone() - ComplexMatrix::from_diagonal(&d.diagonal()))) == 0.0);
        assert_eq!(dhp(&d, ConsistencyKind::MediumDhc).unwrap(), 0.0);
    }

    #[test]
    fn two_leaf_arithmetic() {
        let mut d = ComplexMatrix::zeros(2, 2);
        d[(0, 0)] = C64::new(0.25, 0.0);
        d[(1, 1)] = C64::new(0.25, 0.0);
        d[(0, 1)] = C64::new(0.1, 0.0);
        d[(1, 0)] = C64::new(0.1, 0.0);
        assert!((dhp(&d, ConsistencyKind::MediumDhc).unwrap() - 0.4).abs() < 1e-15);
        assert!((dhp(&d, ConsistencyKind::Absolute).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_pairs_excluded() {
        let mut d = ComplexMatrix::zeros(3, 3);
        d[(0, 0)] = C64::new(0.5, 0.0);
        d[(1, 1)] = C64::new(0.5, 0.0);
        d[(0, 1)] = C64::new(0.05, 0.0);
        d[(1, 0)] = C64::new(0.05, 0.0);
        assert!((dhp(&d, ConsistencyKind::MediumDhc).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn random_set_matches_exhaustive_pairs() {
        let mut r = RandomStream::new(3);
        let branches: Vec<_> = (0..5).map(|_| r.complex_gaussian_vector(6)).collect();
        let d = decoherence_matrix(&branches);
        let mut brute: f64 = 0.0;
        for a in 0..5 {
            for b in 0..5 {
                if a != b {
                    let v = branches[b].dotc(&branches[a]).norm()
                        / (branches[a].norm_squared() * branches[b].norm_squared()).sqrt();
                    brute = brute.max(v);
                }
            }
        }
        assert!((dhp(&d, ConsistencyKind::MediumDhc).unwrap() - brute).abs() < 1e-14);
    }

    #[test]
    fn criteria_parse_and_validate() {
        assert_eq!("weak-dhc".parse::<ConsistencyKind>().unwrap(), ConsistencyKind::WeakDhc);
        assert!("nope".parse::<ConsistencyKind>().is_err());
        assert!(ConsistencyCriterion::new(ConsistencyKind::MediumDhc, 1.5).is_err());
        assert!(ConsistencyCriterion::new(ConsistencyKind::Absolute, 1.5).is_ok());
        assert!(TrivialityCriterion::new(TrivialityKind::Relative, -1.0).is_err());
    }

    #[test]
    fn triviality_thresholds() {
        let rel = TrivialityCriterion::new(TrivialityKind::Relative, 0.1).unwrap();
        assert!(rel.is_trivial(0.01, 0.2));
        assert!(!rel.is_trivial(0.03, 0.2));
        let abs = TrivialityCriterion::new(TrivialityKind::Absolute, 0.01).unwrap();
        assert!(abs.is_trivial(0.01, 0.5));
        assert!(!abs.is_trivial(0.011, 0.5));
        assert!(TrivialityCriterion::new(TrivialityKind::Absolute, 0.0).unwrap().is_trivial(1e-15, 1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn branches(seed: u64, k: usize) -> Vec<ComplexVector> {
            let mut r = RandomStream::new(seed);
            (0..k).map(|_| r.complex_gaussian_vector(5)).collect()
        }

        proptest! {
            #[test]
            fn global_phases_do_not_change_dhp(seed in 0u64..10_000, phase in 0.0f64..6.3) {
                let mut b = branches(seed, 4);
                let d0 = dhp(&decoherence_matrix(&b), ConsistencyKind::MediumDhc).unwrap();
                b[1] *= C64::from_polar(1.0, phase);
                let d1 = dhp(&decoherence_matrix(&b), ConsistencyKind::MediumDhc).unwrap();
                prop_assert!((d0 - d1).abs() < 1e-12);
            }

            #[test]
            fn medium_dominates_weak(seed in 0u64..10_000) {
                let d = decoherence_matrix(&branches(seed, 5));
                prop_assert!(dhp(&d, ConsistencyKind::MediumDhc).unwrap() >= dhp(&d, ConsistencyKind::WeakDhc).unwrap());
            }

            #[test]
            fn absolute_is_permutation_invariant(seed in 0u64..10_000, rot in 0usize..5) {
                let mut b = branches(seed, 5);
                let d0 = dhp(&decoherence_matrix(&b), ConsistencyKind::Absolute).unwrap();
                b.rotate_left(rot);
                b.swap(0, 3);
                let d1 = dhp(&decoherence_matrix(&b), ConsistencyKind::Absolute).unwrap();
                prop_assert!((d0 - d1).abs() < 1e-15);
            }

            #[test]
            fn decoherence_matrix_is_hermitian_psd(seed in 0u64..10_000) {
                let d = decoherence_matrix(&branches(seed, 4));
                prop_assert!(frobenius(&(&d - d.adjoint())) < 1e-14);
                let h = crate::linalg::HermitianOperator::new(d).unwrap();
                let e = crate::linalg::eigendecompose(&h).unwrap();
                prop_assert!(e.eigenvalues[0] > -1e-12);
            }
        }
    }
}
