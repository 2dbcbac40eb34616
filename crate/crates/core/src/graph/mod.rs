//! Heterogeneous gene/disease graph.
//!
//! Nodes carry a fixed [`NodeKind`]; edges live in one undirected set per
//! [`RelationKind`], stored as `(min, max)` index pairs. Iteration order is
//! deterministic and duplicates collapse.

mod io;
mod propagation;
mod sparse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use io::{
    load_bundle, read_edge_file, save_bundle, variant_threshold, EdgeRecord, GraphManifest,
    BUNDLE_FILE, MANIFEST_FILE,
};
pub use propagation::{mix_relations, normalize_relation, MixingWeights, PropagationOperator};
pub use sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Gene,
    Disease,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Gene => "gene",
            NodeKind::Disease => "disease",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gene" => Ok(NodeKind::Gene),
            "disease" => Ok(NodeKind::Disease),
            other => Err(format!("unknown node kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    GG,
    DD,
    GD,
}

impl RelationKind {
    pub const ALL: [RelationKind; 3] = [RelationKind::GG, RelationKind::DD, RelationKind::GD];

    fn slot(self) -> usize {
        match self {
            RelationKind::GG => 0,
            RelationKind::DD => 1,
            RelationKind::GD => 2,
        }
    }

    /// Whether an unordered pair of node kinds is allowed under this relation.
    pub fn admits(self, a: NodeKind, b: NodeKind) -> bool {
        use NodeKind::*;
        match self {
            RelationKind::GG => a == Gene && b == Gene,
            RelationKind::DD => a == Disease && b == Disease,
            RelationKind::GD => a != b,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::GG => "GG",
            RelationKind::DD => "DD",
            RelationKind::GD => "GD",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "GG" => Ok(RelationKind::GG),
            "DD" => Ok(RelationKind::DD),
            "GD" => Ok(RelationKind::GD),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeteroGraph {
    ids: Vec<String>,
    kinds: Vec<NodeKind>,
    index: HashMap<String, usize>,
    edges: [BTreeSet<(usize, usize)>; 3],
}

impl HeteroGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, external_id: &str, kind: NodeKind) -> Result<usize> {
        if self.index.contains_key(external_id) {
            return Err(Error::DuplicateNode(external_id.to_string()));
        }
        let idx = self.ids.len();
        self.ids.push(external_id.to_string());
        self.kinds.push(kind);
        self.index.insert(external_id.to_string(), idx);
        Ok(idx)
    }

    /// Inserts an undirected edge. Re-adding an existing pair is a no-op;
    /// returns whether the pair was new.
    pub fn add_edge(&mut self, rel: RelationKind, i: usize, j: usize) -> Result<bool> {
        let n = self.node_count();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::NodeOutOfRange { index: idx, len: n });
            }
        }
        if i == j {
            return Err(Error::SelfLoopRejected(i));
        }
        if !rel.admits(self.kinds[i], self.kinds[j]) {
            return Err(Error::TypeConstraintViolation {
                rel: rel.to_string(),
                left: self.ids[i].clone(),
                right: self.ids[j].clone(),
            });
        }
        Ok(self.edges[rel.slot()].insert((i.min(j), i.max(j))))
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, external_id: &str) -> Option<usize> {
        self.index.get(external_id).copied()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(move |(_, k)| **k == kind)
            .map(|(i, _)| i)
    }

    pub fn count_of_kind(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|k| **k == kind).count()
    }

    /// Edges of one relation as `(min, max)` pairs in ascending order.
    pub fn edges(&self, rel: RelationKind) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges[rel.slot()].iter().copied()
    }

    pub fn edge_count(&self, rel: RelationKind) -> usize {
        self.edges[rel.slot()].len()
    }

    pub fn has_edge(&self, rel: RelationKind, i: usize, j: usize) -> bool {
        self.edges[rel.slot()].contains(&(i.min(j), i.max(j)))
    }

    pub fn has_any_edge(&self, i: usize, j: usize) -> bool {
        RelationKind::ALL.iter().any(|&r| self.has_edge(r, i, j))
    }

    /// GD edges oriented as `(gene, disease)`.
    pub fn gd_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges(RelationKind::GD).map(|(a, b)| {
            if self.kinds[a] == NodeKind::Gene {
                (a, b)
            } else {
                (b, a)
            }
        })
    }

    /// Per-node degree in one relation.
    pub fn degrees(&self, rel: RelationKind) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for (a, b) in self.edges(rel) {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Per-node degree summed over all relations.
    pub fn total_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for rel in RelationKind::ALL {
            for (d, x) in deg.iter_mut().zip(self.degrees(rel)) {
                *d += x;
            }
        }
        deg
    }

    /// Copy of this graph whose GD relation holds only `keep`. Node indexing is
    /// unchanged; pairs not present in the original GD set are ignored.
    pub fn with_gd_subset(&self, keep: impl IntoIterator<Item = (usize, usize)>) -> HeteroGraph {
        let mut out = self.clone();
        let slot = RelationKind::GD.slot();
        out.edges[slot] = keep
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .filter(|p| self.edges[slot].contains(p))
            .collect();
        out
    }
}
