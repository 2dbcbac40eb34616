//! Random graphs and dense reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use dglink_core::graph::{HeteroGraph, MixingWeights, NodeKind, RelationKind};
use dglink_core::rng::StreamRng;
use ndarray::Array2;
use rand::Rng;

/// Genes first, then diseases; each admissible pair is an edge with the
/// relation's probability.
pub fn random_graph(r: &mut StreamRng, genes: usize, diseases: usize, p: [f64; 3]) -> HeteroGraph {
    let mut g = HeteroGraph::new();
    for i in 0..genes {
        g.add_node(&format!("G{i}"), NodeKind::Gene).unwrap();
    }
    for j in 0..diseases {
        g.add_node(&format!("D{j}"), NodeKind::Disease).unwrap();
    }
    let n = genes + diseases;
    for a in 0..n {
        for b in a + 1..n {
            let rel = match (g.kind(a), g.kind(b)) {
                (NodeKind::Gene, NodeKind::Gene) => RelationKind::GG,
                (NodeKind::Disease, NodeKind::Disease) => RelationKind::DD,
                _ => RelationKind::GD,
            };
            let prob = p[RelationKind::ALL.iter().position(|&x| x == rel).unwrap()];
            if r.random_bool(prob) {
                g.add_edge(rel, a, b).unwrap();
            }
        }
    }
    g
}

/// Random convex weights, with a chance of exact zeros.
pub fn random_weights(r: &mut StreamRng) -> MixingWeights {
    let mut w: [f64; 3] = std::array::from_fn(|_| if r.random_bool(0.2) { 0.0 } else { r.random::<f64>() });
    if w.iter().sum::<f64>() == 0.0 {
        w[r.random_range(0..3)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    let last = 1.0 - w[0] / s - w[1] / s;
    MixingWeights::new(w[0] / s, w[1] / s, last.max(0.0)).unwrap()
}

/// Dense `Σ λ_r D_r^{-1/2}(A_r + I)D_r^{-1/2}` built straight from the edge
/// lists.
pub fn dense_operator(g: &HeteroGraph, w: MixingWeights) -> Array2<f64> {
    let n = g.node_count();
    let mut out = Array2::zeros((n, n));
    for rel in RelationKind::ALL {
        let mut a = Array2::<f64>::eye(n);
        for (i, j) in g.edges(rel) {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += w.get(rel) * a[[i, j]] / (d[i] * d[j]).sqrt();
            }
        }
    }
    out
}

pub fn random_matrix(r: &mut StreamRng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| r.random_range(-scale..scale))
}

/// Plain triple-loop product.
pub fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, k) = a.dim();
    let m = b.ncols();
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[[i, t]] * b[[t, j]];
            }
            out[[i, j]] = s;
        }
    }
    out
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
