//! Relation-wise symmetric normalization and convex mixing into one operator.

use super::{CsrMatrix, HeteroGraph, RelationKind};
use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Convex weights over the three relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingWeights {
    pub gg: f64,
    pub dd: f64,
    pub gd: f64,
}

impl Default for MixingWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

impl MixingWeights {
    pub fn uniform() -> Self {
        let third = 1.0 / 3.0;
        Self {
            gg: third,
            dd: third,
            gd: third,
        }
    }

    pub fn new(gg: f64, dd: f64, gd: f64) -> Result<Self> {
        let w = Self { gg, dd, gd };
        w.validate()?;
        Ok(w)
    }

    pub fn get(&self, rel: RelationKind) -> f64 {
        match rel {
            RelationKind::GG => self.gg,
            RelationKind::DD => self.dd,
            RelationKind::GD => self.gd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.gg, self.dd, self.gd];
        let ok = w.iter().all(|x| x.is_finite() && *x >= 0.0)
            && (w.iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOL;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMixingWeights(w.to_vec()))
        }
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` for one relation over all nodes, where `D` is
/// the degree matrix of `A + I`.
pub fn normalize_relation(graph: &HeteroGraph, rel: RelationKind) -> CsrMatrix {
    let n = graph.node_count();
    let inv_sqrt: Vec<f64> = graph
        .degrees(rel)
        .into_iter()
        .map(|d| 1.0 / ((d + 1) as f64).sqrt())
        .collect();
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, inv_sqrt[i] * inv_sqrt[i])]).collect();
    for (a, b) in graph.edges(rel) {
        let v = inv_sqrt[a] * inv_sqrt[b];
        rows[a].push((b, v));
        rows[b].push((a, v));
    }
    CsrMatrix::from_rows(n, rows)
}

/// The mixed propagation operator `Σ_r λ_r M_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOperator {
    matrix: CsrMatrix,
    weights: MixingWeights,
}

impl PropagationOperator {
    pub fn build(graph: &HeteroGraph, weights: MixingWeights) -> Result<Self> {
        let mats = RelationKind::ALL.map(|r| normalize_relation(graph, r));
        mix_relations(&mats, weights)
    }

    /// Wraps an arbitrary square matrix; used for local (restricted) operators.
    pub fn from_matrix(matrix: CsrMatrix, weights: MixingWeights) -> Self {
        Self { matrix, weights }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn weights(&self) -> MixingWeights {
        self.weights
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape().0
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.matrix.row(i).map(|(j, _)| j)
    }

    pub fn restrict(&self, nodes: &[usize]) -> PropagationOperator {
        Self::from_matrix(self.matrix.restrict(nodes), self.weights)
    }
}

/// Mixes per-relation matrices (ordered GG, DD, GD). Relations with zero
/// weight are skipped entirely, so a one-hot weight vector reproduces the
/// selected matrix exactly.
pub fn mix_relations(mats: &[CsrMatrix; 3], weights: MixingWeights) -> Result<PropagationOperator> {
    weights.validate()?;
    let shape = mats[0].shape();
    if mats.iter().any(|m| m.shape() != shape) || shape.0 != shape.1 {
        return Err(Error::ShapeError(format!(
            "relation matrices must share one square shape, got {:?}",
            mats.iter().map(CsrMatrix::shape).collect::<Vec<_>>()
        )));
    }
    let n = shape.0;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (rel, m) in RelationKind::ALL.into_iter().zip(mats) {
        let w = weights.get(rel);
        if w == 0.0 {
            continue;
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.extend(m.row(i).map(|(j, v)| (j, w * v)));
        }
    }
    Ok(PropagationOperator {
        matrix: CsrMatrix::from_rows(n, rows),
        weights,
    })
}
