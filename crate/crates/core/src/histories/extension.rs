//! Candidate extensions of one leaf by a binary Schmidt partition.
//!
//! All live branch vectors are rotated into the instantaneous Schmidt basis
//! of the system factor, where `Q_S (x) I` keeps the rows labelled by `S`
//! and zeroes the rest. The overlap of a child `P_S |a>` with another branch
//! `|b>` is then a sum of per-row overlaps, so every partition of every leaf
//! is evaluated from one table of `k^2 d1` numbers.

use crate::error::{Error, Result};
use crate::linalg::{to_coefficients, ComplexMatrix, ComplexVector, C64};
use crate::schmidt::{SchmidtDecomposition, SchmidtPartition, DEGENERACY_TOLERANCE};

use super::{ConsistencyCriterion, ConsistencyKind, HistoryTree, NodeId, TrivialityCriterion, DEAD_FLOOR};

const KINDS: [ConsistencyKind; 3] = [
    ConsistencyKind::MediumDhc,
    ConsistencyKind::WeakDhc,
    ConsistencyKind::Absolute,
];

fn kind_slot(kind: ConsistencyKind) -> usize {
    match kind {
        ConsistencyKind::MediumDhc => 0,
        ConsistencyKind::WeakDhc => 1,
        ConsistencyKind::Absolute => 2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub leaf: NodeId,
    pub partition: SchmidtPartition,
    pub consistent: bool,
    pub trivial: bool,
    /// Pair statistic maximized over the hypothetically extended leaf set.
    pub dhp: f64,
    /// Probabilities of `P_S |a>` and `P_{S^c} |a>`.
    pub child_probabilities: [f64; 2],
}

impl Verdict {
    pub fn qualifies(&self) -> bool {
        self.consistent && !self.trivial
    }
}

/// The live leaves at one instant, prepared for extension evaluation.
#[derive(Debug, Clone)]
pub struct ExtensionContext {
    decomp: SchmidtDecomposition,
    ids: Vec<NodeId>,
    /// Squared row norms `|row_i(a)|^2` per leaf.
    row_weights: Vec<Vec<f64>>,
    /// `overlap[a][b][i] = <row_i(b) | row_i(a)>`.
    overlap: Vec<Vec<Vec<C64>>>,
    probabilities: Vec<f64>,
    /// Per consistency kind: max pair statistic among leaves other than `a`.
    base_excluding: [Vec<f64>; 3],
    degenerate: Vec<Vec<usize>>,
}

impl ExtensionContext {
    pub fn from_tree(tree: &HistoryTree, decomp: SchmidtDecomposition) -> Self {
        let (ids, vectors) = tree.probe_live_leaves(None);
        Self::new(ids, &vectors, decomp, tree.d2())
    }

    /// Builds the context from live leaf ids and their branch vectors at the
    /// instant `decomp` describes.
    pub fn new(ids: Vec<NodeId>, vectors: &[ComplexVector], decomp: SchmidtDecomposition, d2: usize) -> Self {
        Self::with_degeneracy_tolerance(ids, vectors, decomp, d2, DEGENERACY_TOLERANCE)
    }

    pub fn with_degeneracy_tolerance(
        ids: Vec<NodeId>,
        vectors: &[ComplexVector],
        decomp: SchmidtDecomposition,
        d2: usize,
        degeneracy_tol: f64,
    ) -> Self {
        let d1 = decomp.d1();
        let w_adj = decomp.left.adjoint();
        let rows: Vec<ComplexMatrix> = vectors.iter().map(|v| &w_adj * to_coefficients(v, d1, d2)).collect();
        let row_weights: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| (0..d1).map(|i| r.row(i).iter().map(|z| z.norm_sqr()).sum()).collect())
            .collect();
        let probabilities: Vec<f64> = row_weights.iter().map(|w| w.iter().sum()).collect();

        let k = rows.len();
        let mut overlap = vec![vec![vec![C64::new(0.0, 0.0); d1]; k]; k];
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    continue;
                }
                for i in 0..d1 {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..d2 {
                        acc += rows[b][(i, j)].conj() * rows[a][(i, j)];
                    }
                    overlap[a][b][i] = acc;
                }
            }
        }

        let base_excluding = KINDS.map(|kind| {
            let mut pair = vec![vec![0.0; k]; k];
            for a in 0..k {
                for b in (a + 1)..k {
                    let d_ab: C64 = overlap[a][b].iter().sum();
                    let m = kind.pair_measure(d_ab, probabilities[a], probabilities[b]);
                    pair[a][b] = m;
                    pair[b][a] = m;
                }
            }
            (0..k)
                .map(|skip| {
                    let mut worst: f64 = 0.0;
                    for a in (0..k).filter(|&a| a != skip) {
                        for b in ((a + 1)..k).filter(|&b| b != skip) {
                            worst = worst.max(pair[a][b]);
                        }
                    }
                    worst
                })
                .collect()
        });

        let degenerate = decomp.degenerate_clusters(degeneracy_tol);
        Self {
            decomp,
            ids,
            row_weights,
            overlap,
            probabilities,
            base_excluding,
            degenerate,
        }
    }

    pub fn decomposition(&self) -> &SchmidtDecomposition {
        &self.decomp
    }

    pub fn leaf_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate.is_empty()
    }

    /// True when `partition` cuts through a degenerate Schmidt eigenspace.
    pub fn is_ill_defined(&self, partition: &SchmidtPartition) -> bool {
        self.degenerate.iter().any(|c| {
            let inside = c.iter().filter(|&&i| partition.contains(i)).count();
            inside != 0 && inside != c.len()
        })
    }

    fn position(&self, leaf: NodeId) -> Result<usize> {
        self.ids.iter().position(|&id| id == leaf).ok_or(Error::NotALiveLeaf(leaf))
    }

    pub fn evaluate(
        &self,
        leaf: NodeId,
        partition: &SchmidtPartition,
        criterion: &ConsistencyCriterion,
        triviality: &TrivialityCriterion,
    ) -> Result<Verdict> {
        let a = self.position(leaf)?;
        if self.is_ill_defined(partition) {
            let c = self
                .degenerate
                .iter()
                .find(|c| c.iter().any(|&i| partition.contains(i)))
                .expect("ill-defined partition touches a cluster");
            return Err(Error::Degenerate {
                first: self.decomp.weights[c[0]],
                second: self.decomp.weights[c[1]],
                tolerance: DEGENERACY_TOLERANCE,
            });
        }
        let kind = criterion.kind;
        let parent = self.probabilities[a];
        let outside_labels = partition.complement();
        let inside: f64 = partition.indices().iter().map(|&i| self.row_weights[a][i]).sum();
        let outside: f64 = outside_labels.iter().map(|&i| self.row_weights[a][i]).sum();
        let children = [inside, outside];

        let mut worst = self.base_excluding[kind_slot(kind)][a];
        for (b, &pb) in self.probabilities.iter().enumerate() {
            if b == a {
                continue;
            }
            let in_part: C64 = partition.indices().iter().map(|&i| self.overlap[a][b][i]).sum();
            let out_part: C64 = outside_labels.iter().map(|&i| self.overlap[a][b][i]).sum();
            for (z, &q) in [in_part, out_part].iter().zip(&children) {
                if q >= DEAD_FLOOR {
                    worst = worst.max(kind.pair_measure(*z, q, pb));
                }
            }
        }

        let trivial = children.iter().any(|&q| triviality.is_trivial(q, parent));
        Ok(Verdict {
            leaf,
            partition: partition.clone(),
            consistent: worst <= criterion.epsilon,
            trivial,
            dhp: worst,
            child_probabilities: children,
        })
    }
}

/// Evaluates extending `leaf` by `{P_S, P_{S^c}}` at the context's instant.
pub fn evaluate_extension(
    ctx: &ExtensionContext,
    leaf: NodeId,
    partition: &SchmidtPartition,
    criterion: &ConsistencyCriterion,
    triviality: &TrivialityCriterion,
) -> Result<Verdict> {
    ctx.evaluate(leaf, partition, criterion, triviality)
}
