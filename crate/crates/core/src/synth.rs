//! Planted-structure synthetic task.
//!
//! Every node belongs to one of `communities` groups and gets a unit latent
//! vector near its group centroid. Edges of each relation are the top pairs
//! by `u·v / temperature + Gumbel noise`, which samples pairs without
//! replacement in proportion to `exp(u·v / temperature)`. Embeddings are
//! noisy random projections of the same latent vectors, so features predict
//! edges.
//!
//! With `shuffle_associations` the gene-disease edges are drawn from randomly
//! permuted latent vectors instead, which keeps degrees and the GG/DD
//! structure but removes any link between features and associations.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Gumbel, StandardNormal};

use crate::dataset::ClusterMap;
use crate::error::Result;
use crate::features::{synth_embeddings, PlantedStructure, RawEmbedding};
use crate::graph::{HeteroGraph, NodeKind, RelationKind};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub genes: usize,
    pub diseases: usize,
    pub gd_edges: usize,
    pub gg_edges: usize,
    pub dd_edges: usize,
    pub communities: usize,
    pub latent_dim: usize,
    /// Scale of the per-node offset from the community centroid.
    pub spread: f64,
    pub temperature: f64,
    pub feature_noise: f64,
    /// Genes per homology cluster.
    pub cluster_size: usize,
    pub shuffle_associations: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            genes: 200,
            diseases: 200,
            gd_edges: 2000,
            gg_edges: 800,
            dd_edges: 400,
            communities: 10,
            latent_dim: 16,
            spread: 0.3,
            temperature: 0.1,
            feature_noise: 0.5,
            cluster_size: 2,
            shuffle_associations: false,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub graph: HeteroGraph,
    pub clusters: ClusterMap,
    pub embeddings: Vec<RawEmbedding>,
    /// Community of each node, by graph index.
    pub community: Vec<usize>,
    pub latent: Vec<Vec<f64>>,
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.into_iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Top-`k` candidate pairs by perturbed similarity.
fn gumbel_top_k<R: Rng>(
    pairs: impl Iterator<Item = (usize, usize)>,
    latent_of: impl Fn(usize) -> Vec<f64>,
    k: usize,
    temperature: f64,
    r: &mut R,
) -> Vec<(usize, usize)> {
    let gumbel = Gumbel::new(0.0, 1.0).expect("valid gumbel");
    let mut keyed: Vec<(f64, (usize, usize))> = pairs
        .map(|(a, b)| (dot(&latent_of(a), &latent_of(b)) / temperature + r.sample(gumbel), (a, b)))
        .collect();
    keyed.sort_by(|x, y| y.0.total_cmp(&x.0));
    keyed.into_iter().take(k).map(|(_, p)| p).collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    let mut g = HeteroGraph::new();
    for i in 0..cfg.genes {
        g.add_node(&format!("G{i:04}"), NodeKind::Gene)?;
    }
    for j in 0..cfg.diseases {
        g.add_node(&format!("D{j:04}"), NodeKind::Disease)?;
    }
    let n = g.node_count();

    let mut r = rng::stream(cfg.seed, "synth/latent");
    let k = cfg.communities.max(1);
    let centroids: Vec<Vec<f64>> = (0..k)
        .map(|_| unit((0..cfg.latent_dim).map(|_| r.sample(StandardNormal)).collect()))
        .collect();
    let community: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
    let offset_scale = cfg.spread / (cfg.latent_dim as f64).sqrt();
    let latent: Vec<Vec<f64>> = community
        .iter()
        .map(|&c| {
            unit(
                centroids[c]
                    .iter()
                    .map(|x| x + offset_scale * r.sample::<f64, _>(StandardNormal))
                    .collect(),
            )
        })
        .collect();

    let genes: Vec<usize> = (0..cfg.genes).collect();
    let diseases: Vec<usize> = (cfg.genes..n).collect();
    let mut er = rng::stream(cfg.seed, "synth/edges");
    let within = |v: &[usize]| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (x, &a) in v.iter().enumerate() {
            for &b in &v[x + 1..] {
                out.push((a, b));
            }
        }
        out
    };
    for (a, b) in gumbel_top_k(within(&genes).into_iter(), |i| latent[i].clone(), cfg.gg_edges, cfg.temperature, &mut er) {
        g.add_edge(RelationKind::GG, a, b)?;
    }
    for (a, b) in gumbel_top_k(within(&diseases).into_iter(), |i| latent[i].clone(), cfg.dd_edges, cfg.temperature, &mut er) {
        g.add_edge(RelationKind::DD, a, b)?;
    }

    // Latent vectors used for association edges; permuted for the null control.
    let mut assoc_latent = latent.clone();
    if cfg.shuffle_associations {
        let mut pr = rng::stream(cfg.seed, "synth/shuffle");
        let mut perm_g = genes.clone();
        perm_g.shuffle(&mut pr);
        let mut perm_d = diseases.clone();
        perm_d.shuffle(&mut pr);
        for (&from, &to) in genes.iter().zip(&perm_g).chain(diseases.iter().zip(&perm_d)) {
            assoc_latent[to] = latent[from].clone();
        }
    }
    let gd_candidates = genes.iter().flat_map(|&a| diseases.iter().map(move |&b| (a, b)));
    for (a, b) in gumbel_top_k(gd_candidates, |i| assoc_latent[i].clone(), cfg.gd_edges, cfg.temperature, &mut er) {
        g.add_edge(RelationKind::GD, a, b)?;
    }

    let mut cr = rng::stream(cfg.seed, "synth/clusters");
    let mut order = genes.clone();
    order.shuffle(&mut cr);
    let mut clusters = ClusterMap::new();
    for (c, chunk) in order.chunks(cfg.cluster_size.max(1)).enumerate() {
        let members: BTreeSet<usize> = chunk.iter().copied().collect();
        for m in members {
            clusters.insert(g.id(m), format!("C{c:04}"));
        }
    }

    let planted = PlantedStructure {
        latent: latent.clone(),
        noise: cfg.feature_noise,
    };
    let embeddings = synth_embeddings(&g, cfg.seed, Some(&planted));
    Ok(SynthDataset {
        graph: g,
        clusters,
        embeddings,
        community,
        latent,
    })
}
