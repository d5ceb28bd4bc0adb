use crate::error::{Error, Result};
use crate::linalg::{to_coefficients, ComplexMatrix, ComplexVector};
use crate::schmidt::{BipartiteState, SchmidtDecomposition, SchmidtPartition};

use super::{decoherence_matrix, DEAD_FLOOR};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    /// Time of the projection that created this node (0 for the root).
    pub time: f64,
    /// Schmidt labels this node was projected onto; empty for the root.
    pub partition: Vec<usize>,
    /// `|branch|^2`; constant under unitary evolution.
    pub probability: f64,
    /// Branch vector at creation.
    pub created: ComplexVector,
    /// Current branch vector for leaves, frozen at the branching time for
    /// internal nodes.
    pub branch: ComplexVector,
    pub children: Vec<NodeId>,
    pub dead: bool,
}

impl HistoryNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_live_leaf(&self) -> bool {
        self.is_leaf() && !self.dead
    }
}

/// A branch-dependent set of histories rooted at the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTree {
    d1: usize,
    d2: usize,
    time: f64,
    nodes: Vec<HistoryNode>,
    state: ComplexVector,
}

impl HistoryTree {
    pub fn new(initial: &BipartiteState) -> Self {
        let v = initial.vector().clone();
        let root = HistoryNode {
            id: 0,
            parent: None,
            time: 0.0,
            partition: Vec::new(),
            probability: v.norm_squared(),
            created: v.clone(),
            branch: v.clone(),
            children: Vec::new(),
            dead: false,
        };
        Self {
            d1: initial.d1(),
            d2: initial.d2(),
            time: 0.0,
            nodes: vec![root],
            state: v,
        }
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn nodes(&self) -> &[HistoryNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &HistoryNode {
        &self.nodes[id]
    }

    /// The full state `U(t) |psi(0)>`, equal to the sum of all leaf branches.
    pub fn state(&self) -> &ComplexVector {
        &self.state
    }

    pub fn bipartite_state(&self) -> Result<BipartiteState> {
        BipartiteState::normalized(self.state.clone(), self.d1, self.d2)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &HistoryNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn live_leaves(&self) -> impl Iterator<Item = &HistoryNode> {
        self.nodes.iter().filter(|n| n.is_live_leaf())
    }

    pub fn live_leaf_count(&self) -> usize {
        self.live_leaves().count()
    }

    pub fn leaf_probability_sum(&self) -> f64 {
        self.leaves().map(|n| n.branch.norm_squared()).sum()
    }

    /// Decoherence matrix over the live leaves, in node order.
    pub fn decoherence_matrix(&self) -> ComplexMatrix {
        let v: Vec<ComplexVector> = self.live_leaves().map(|n| n.branch.clone()).collect();
        decoherence_matrix(&v)
    }

    /// Multiplies every leaf branch and the full state by the one-step
    /// propagator `u`.
    pub fn evolve(&mut self, dt: f64, u: &ComplexMatrix) {
        if dt == 0.0 {
            return;
        }
        for n in self.nodes.iter_mut().filter(|n| n.children.is_empty()) {
            n.branch = u * &n.branch;
        }
        self.state = u * &self.state;
        self.time += dt;
    }

    /// Current live leaves evolved by `u`, without modifying the tree.
    pub fn probe_live_leaves(&self, u: Option<&ComplexMatrix>) -> (Vec<NodeId>, Vec<ComplexVector>) {
        self.live_leaves()
            .map(|n| {
                let v = match u {
                    Some(u) => u * &n.branch,
                    None => n.branch.clone(),
                };
                (n.id, v)
            })
            .unzip()
    }

    /// Splits `leaf` into `P_S |alpha>` and `P_{S^c} |alpha>` at the current
    /// time. Returns the new node ids in that order.
    pub fn apply_extension(
        &mut self,
        leaf: NodeId,
        decomp: &SchmidtDecomposition,
        partition: &SchmidtPartition,
    ) -> Result<[NodeId; 2]> {
        let node = self.nodes.get(leaf).ok_or(Error::NotALiveLeaf(leaf))?;
        if !node.is_live_leaf() {
            return Err(Error::NotALiveLeaf(leaf));
        }
        if partition.d1() != self.d1 || decomp.d1() != self.d1 {
            return Err(Error::DimensionMismatch {
                expected: self.d1,
                got: partition.d1(),
            });
        }
        let a = to_coefficients(&node.branch, self.d1, self.d2);
        let inside = partition.indices().to_vec();
        let outside = partition.complement();
        let mut ids = [0; 2];
        for (slot, labels) in [inside, outside].into_iter().enumerate() {
            let q = decomp.system_projector(&labels);
            let child = crate::linalg::from_coefficients(&(q * &a));
            let probability = child.norm_squared();
            let id = self.nodes.len();
            self.nodes.push(HistoryNode {
                id,
                parent: Some(leaf),
                time: self.time,
                partition: labels,
                probability,
                created: child.clone(),
                branch: child,
                children: Vec::new(),
                dead: probability < DEAD_FLOOR,
            });
            ids[slot] = id;
        }
        self.nodes[leaf].children.extend_from_slice(&ids);
        Ok(ids)
    }

    /// Largest `|sum(children at creation) - parent at branching|` over all
    /// internal nodes.
    pub fn completeness_defect(&self) -> f64 {
        self.nodes
            .iter()
            .filter(|n| !n.is_leaf())
            .map(|n| {
                let sum = n
                    .children
                    .iter()
                    .fold(ComplexVector::zeros(n.branch.len()), |acc, &c| acc + &self.nodes[c].created);
                (sum - &n.branch).norm()
            })
            .fold(0.0, f64::max)
    }
}
