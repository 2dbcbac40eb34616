//! Node features: raw per-entity embeddings and their alignment into one
//! matrix whose rows follow graph node order.
//!
//! Embedding files hold one entity per line, `id<TAB>v1,v2,...` (or
//! whitespace-separated values with [`ValueSeparator::Whitespace`]).

use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeKind};
use crate::rng;

pub const GENE_DIM: usize = 1024;
pub const DISEASE_DIM: usize = 768;
pub const ALIGNED_DIM: usize = GENE_DIM + DISEASE_DIM;

pub fn raw_width(kind: NodeKind) -> usize {
    match kind {
        NodeKind::Gene => GENE_DIM,
        NodeKind::Disease => DISEASE_DIM,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbedding {
    pub external_id: String,
    pub kind: NodeKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValueSeparator {
    #[default]
    Comma,
    Whitespace,
}

impl FromStr for ValueSeparator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "comma" => Ok(Self::Comma),
            "whitespace" => Ok(Self::Whitespace),
            o => Err(format!("unknown separator `{o}` (comma|whitespace)")),
        }
    }
}

/// How gene and disease vectors share one coordinate space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignMode {
    /// Width 1792: genes on `[0,1024)`, diseases on `[1024,1792)`.
    #[default]
    Default,
    /// Width 1024: genes as-is, diseases on `[0,768)` with 256 trailing zeros.
    Ablation,
}

impl AlignMode {
    pub fn width(self) -> usize {
        match self {
            AlignMode::Default => ALIGNED_DIM,
            AlignMode::Ablation => GENE_DIM,
        }
    }

    /// First column a raw vector of `kind` is written to.
    pub fn offset(self, kind: NodeKind) -> usize {
        match (self, kind) {
            (AlignMode::Default, NodeKind::Disease) => GENE_DIM,
            _ => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlignMode::Default => "default",
            AlignMode::Ablation => "ablation",
        }
    }
}

impl FromStr for AlignMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "default" => Ok(Self::Default),
            "ablation" => Ok(Self::Ablation),
            o => Err(format!("unknown align mode `{o}` (default|ablation)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Error,
    ZeroFill,
}

impl MissingPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MissingPolicy::Error => "error",
            MissingPolicy::ZeroFill => "zero",
        }
    }
}

impl FromStr for MissingPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "error" => Ok(Self::Error),
            "zero" | "zero_fill" => Ok(Self::ZeroFill),
            o => Err(format!("unknown missing policy `{o}` (error|zero)")),
        }
    }
}

/// Aligned node features, one row per graph node in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Array2<f64>,
    pub mode: AlignMode,
    /// Rows that were zero-filled because no embedding was provided.
    pub zero_filled: usize,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        self.data.ncols()
    }
}

pub fn parse_embedding_line(line: &str, kind: NodeKind, sep: ValueSeparator) -> Result<RawEmbedding> {
    let (id, rest) = match sep {
        ValueSeparator::Comma => line.split_once('\t').unwrap_or((line, "")),
        ValueSeparator::Whitespace => {
            let t = line.trim_start();
            t.split_once(char::is_whitespace).unwrap_or((t, ""))
        }
    };
    let id = id.trim().to_string();
    let tokens: Vec<&str> = match sep {
        ValueSeparator::Comma => rest.split(',').map(str::trim).filter(|t| !t.is_empty()).collect(),
        ValueSeparator::Whitespace => rest.split_whitespace().collect(),
    };
    let mut values = Vec::with_capacity(tokens.len());
    for t in tokens {
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => return Err(Error::CorruptEmbedding(id)),
        }
    }
    let expected = raw_width(kind);
    if values.len() != expected {
        return Err(Error::DimensionMismatch {
            id,
            expected,
            got: values.len(),
        });
    }
    Ok(RawEmbedding {
        external_id: id,
        kind,
        values,
    })
}

pub fn load_embeddings(path: &Path, kind: NodeKind, sep: ValueSeparator) -> Result<Vec<RawEmbedding>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse_embedding_line(l, kind, sep))
        .collect()
}

pub fn format_embedding_line(e: &RawEmbedding) -> String {
    let vals: Vec<String> = e.values.iter().map(|v| format!("{v:?}")).collect();
    format!("{}\t{}", e.external_id, vals.join(","))
}

/// Writes embeddings in the comma-separated file format. Values are printed
/// with shortest round-trip formatting, so reloading is bit-exact.
pub fn save_embeddings(path: &Path, raws: &[RawEmbedding]) -> Result<()> {
    let mut s = String::new();
    for e in raws {
        s.push_str(&format_embedding_line(e));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn align_features(
    graph: &HeteroGraph,
    raws: &[RawEmbedding],
    mode: AlignMode,
    missing: MissingPolicy,
) -> Result<FeatureMatrix> {
    let n = graph.node_count();
    let mut data = Array2::zeros((n, mode.width()));
    let mut filled = vec![false; n];
    let mut skipped = 0usize;
    for raw in raws {
        let Some(i) = graph.index_of(&raw.external_id) else {
            skipped += 1;
            continue;
        };
        let kind = graph.kind(i);
        if kind != raw.kind {
            warn!("embedding `{}` is a {} vector but the node is a {}; skipped", raw.external_id, raw.kind, kind);
            continue;
        }
        if raw.values.len() != raw_width(kind) {
            return Err(Error::DimensionMismatch {
                id: raw.external_id.clone(),
                expected: raw_width(kind),
                got: raw.values.len(),
            });
        }
        if filled[i] {
            warn!("duplicate embedding for `{}`; keeping the first", raw.external_id);
            continue;
        }
        let off = mode.offset(kind);
        for (k, v) in raw.values.iter().enumerate() {
            data[[i, off + k]] = *v;
        }
        filled[i] = true;
    }
    if skipped > 0 {
        warn!("{skipped} embeddings reference ids absent from the graph; skipped");
    }
    let missing_rows: Vec<usize> = (0..n).filter(|&i| !filled[i]).collect();
    if let Some(&first) = missing_rows.first() {
        match missing {
            MissingPolicy::Error => return Err(Error::MissingEmbedding(graph.id(first).to_string())),
            MissingPolicy::ZeroFill => warn!("{} nodes have no embedding; zero-filled", missing_rows.len()),
        }
    }
    Ok(FeatureMatrix {
        data,
        mode,
        zero_filled: missing_rows.len(),
    })
}

/// Latent structure for [`synth_embeddings`]: one latent vector per node.
/// Nodes with similar latent vectors receive correlated embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedStructure {
    pub latent: Vec<Vec<f64>>,
    /// Standard deviation of the independent per-coordinate noise relative to
    /// the unit-variance signal.
    pub noise: f64,
}

/// Deterministic pseudo-random embeddings with unit per-coordinate variance.
///
/// With a planted structure, a node's vector is `P_kind · u + noise · ε`,
/// rescaled to unit variance, where `u` is the node's unit-norm latent vector
/// and `P_kind` a Gaussian projection shared by all nodes of that kind.
pub fn synth_embeddings(graph: &HeteroGraph, seed: u64, planted: Option<&PlantedStructure>) -> Vec<RawEmbedding> {
    let mut noise_rng = rng::stream(seed, "synth/embedding-noise");
    let projections = planted.map(|p| {
        let k = p.latent.first().map_or(0, Vec::len);
        [NodeKind::Gene, NodeKind::Disease].map(|kind| {
            let mut r = rng::stream(seed, &format!("synth/projection/{kind}"));
            Array2::<f64>::from_shape_fn((raw_width(kind), k), |_| r.sample(StandardNormal))
        })
    });

    (0..graph.node_count())
        .map(|i| {
            let kind = graph.kind(i);
            let width = raw_width(kind);
            let values = match (planted, &projections) {
                (Some(p), Some(proj)) => {
                    let u = &p.latent[i];
                    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                    let pm = &proj[usize::from(kind == NodeKind::Disease)];
                    let scale = 1.0 / (1.0 + p.noise * p.noise).sqrt();
                    (0..width)
                        .map(|r| {
                            let signal: f64 = pm.row(r).iter().zip(u).map(|(a, b)| a * b / norm).sum();
                            let eps: f64 = noise_rng.sample(StandardNormal);
                            (signal + p.noise * eps) * scale
                        })
                        .collect()
                }
                _ => (0..width).map(|_| noise_rng.sample(StandardNormal)).collect(),
            };
            RawEmbedding {
                external_id: graph.id(i).to_string(),
                kind,
                values,
            }
        })
        .collect()
}
