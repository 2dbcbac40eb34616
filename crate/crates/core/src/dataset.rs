//! Cluster-respecting train/validation/test split of gene-disease edges and
//! balanced negative sampling.
//!
//! All GD edges of genes that share a sequence cluster land in one split.
//! GG and DD edges never enter the split; they stay as graph context.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::Descriptor;
use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeKind, RelationKind};
use crate::rng::{self, StreamRng};

/// Gene id to cluster id (e.g. UniRef50). Genes absent from the map form
/// singleton clusters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterMap {
    map: HashMap<String, String>,
}

impl ClusterMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, gene: impl Into<String>, cluster: impl Into<String>) {
        self.map.insert(gene.into(), cluster.into());
    }

    pub fn cluster_of(&self, gene: &str) -> String {
        self.map
            .get(gene)
            .cloned()
            .unwrap_or_else(|| format!("singleton:{gene}"))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Reads `gene_id<TAB>cluster_id` rows; a leading header row is skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || (i == 0 && line.starts_with("gene_id\t")) {
                continue;
            }
            match line.split('\t').collect::<Vec<_>>().as_slice() {
                [gene, cluster] if !gene.is_empty() && !cluster.is_empty() => out.insert(*gene, *cluster),
                _ => return Err(Error::parse(path, i + 1, "expected gene_id<TAB>cluster_id")),
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let sorted: BTreeMap<_, _> = self.map.iter().collect();
        let mut s = String::from("gene_id\tcluster_id\n");
        for (g, c) in sorted {
            s.push_str(&format!("{g}\t{c}\n"));
        }
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

/// A scored candidate pair. For type-constrained pairs `u` is the gene and
/// `v` the disease; unconstrained negatives may join any two node kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledPair {
    pub u: usize,
    pub v: usize,
    pub label: u8,
}

impl LabeledPair {
    pub fn positive(gene: usize, disease: usize) -> Self {
        Self {
            u: gene,
            v: disease,
            label: 1,
        }
    }

    pub fn negative(u: usize, v: usize) -> Self {
        Self { u, v, label: 0 }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.u.min(self.v), self.u.max(self.v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Val, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            o => Err(format!("unknown split `{o}` (train|val|test)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.as_array();
        if r.iter().all(|x| x.is_finite() && *x >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9 {
            Ok(())
        } else {
            Err(Error::Config(format!("split ratios must be non-negative and sum to 1, got {r:?}")))
        }
    }
}

/// Positive GD edges per split, each `(gene, disease)`, sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PositiveSplit {
    pub parts: [Vec<(usize, usize)>; 3],
}

impl PositiveSplit {
    pub fn part(&self, s: SplitName) -> &[(usize, usize)] {
        &self.parts[s.slot()]
    }

    pub fn total(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }
}

/// Assigns whole gene clusters to splits. Clusters are visited in a seeded
/// shuffle and each goes to the split with the largest remaining deficit
/// against its target edge count (earlier split wins ties).
pub fn split_edges(
    graph: &HeteroGraph,
    clusters: &ClusterMap,
    ratios: SplitRatios,
    seed: u64,
) -> Result<PositiveSplit> {
    ratios.validate()?;
    let mut by_cluster: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for (g, d) in graph.gd_pairs() {
        by_cluster.entry(clusters.cluster_of(graph.id(g))).or_default().push((g, d));
    }
    if by_cluster.len() < 3 {
        return Err(Error::InsufficientClusters(by_cluster.len()));
    }
    let mut groups: Vec<Vec<(usize, usize)>> = by_cluster.into_values().collect();
    groups.shuffle(&mut rng::stream(seed, "split/clusters"));

    let total: usize = groups.iter().map(Vec::len).sum();
    let targets = ratios.as_array().map(|r| r * total as f64);
    let mut split = PositiveSplit::default();
    for group in groups {
        let deficit = |k: usize| targets[k] - split.parts[k].len() as f64;
        let mut best = 0;
        for k in 1..3 {
            if deficit(k) > deficit(best) {
                best = k;
            }
        }
        split.parts[best].extend(group);
    }
    for part in &mut split.parts {
        part.sort_unstable();
    }
    Ok(split)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeakageReport {
    /// Clusters whose positives appear in more than one split, with those splits.
    pub violations: Vec<(String, Vec<SplitName>)>,
}

impl LeakageReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("cluster_id\tsplits\n");
        for (c, splits) in &self.violations {
            let names: Vec<&str> = splits.iter().map(|s| s.as_str()).collect();
            s.push_str(&format!("{c}\t{}\n", names.join(",")));
        }
        s
    }
}

/// Audits `(split, gene id)` occurrences of positive edges.
pub fn check_leakage<'a>(
    positives: impl IntoIterator<Item = (SplitName, &'a str)>,
    clusters: &ClusterMap,
) -> LeakageReport {
    let mut seen: BTreeMap<String, BTreeSet<SplitName>> = BTreeMap::new();
    for (split, gene) in positives {
        seen.entry(clusters.cluster_of(gene)).or_default().insert(split);
    }
    LeakageReport {
        violations: seen
            .into_iter()
            .filter(|(_, s)| s.len() > 1)
            .map(|(c, s)| (c, s.into_iter().collect()))
            .collect(),
    }
}

pub fn check_split_leakage(graph: &HeteroGraph, split: &PositiveSplit, clusters: &ClusterMap) -> LeakageReport {
    check_leakage(
        SplitName::ALL
            .into_iter()
            .flat_map(|s| split.part(s).iter().map(move |&(g, _)| (s, graph.id(g)))),
        clusters,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeMode {
    /// Gene x disease pairs only.
    #[default]
    Constrained,
    /// Any two distinct nodes that share no edge in any relation.
    Unconstrained,
}

impl NegativeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NegativeMode::Constrained => "constrained",
            NegativeMode::Unconstrained => "unconstrained",
        }
    }
}

impl FromStr for NegativeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "constrained" => Ok(Self::Constrained),
            "unconstrained" => Ok(Self::Unconstrained),
            o => Err(format!("unknown negative mode `{o}` (constrained|unconstrained)")),
        }
    }
}

/// Which degree weights degree-aware sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegreeSource {
    #[default]
    Total,
    Gd,
    Dd,
}

impl DegreeSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DegreeSource::Total => "total",
            DegreeSource::Gd => "gd",
            DegreeSource::Dd => "dd",
        }
    }

    pub fn degrees(self, graph: &HeteroGraph) -> Vec<usize> {
        match self {
            DegreeSource::Total => graph.total_degrees(),
            DegreeSource::Gd => graph.degrees(RelationKind::GD),
            DegreeSource::Dd => graph.degrees(RelationKind::DD),
        }
    }
}

impl FromStr for DegreeSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "total" => Ok(Self::Total),
            "gd" => Ok(Self::Gd),
            "dd" => Ok(Self::Dd),
            o => Err(format!("unknown degree source `{o}` (total|gd|dd)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeSampler {
    pub mode: NegativeMode,
    pub degree_aware: bool,
    pub alpha: f64,
    pub degree_source: DegreeSource,
}

impl Default for NegativeSampler {
    fn default() -> Self {
        Self {
            mode: NegativeMode::Constrained,
            degree_aware: true,
            alpha: 1.0,
            degree_source: DegreeSource::Total,
        }
    }
}

/// Draws from a fixed candidate list, uniformly or with probability
/// proportional to `degree^alpha`.
#[derive(Debug, Clone)]
pub struct CandidateSampler {
    candidates: Vec<usize>,
    weighted: Option<WeightedIndex<f64>>,
}

impl CandidateSampler {
    pub fn uniform(candidates: Vec<usize>) -> Self {
        Self {
            candidates,
            weighted: None,
        }
    }

    /// `degrees` is indexed by candidate position. Returns `None` when every
    /// weight is zero.
    pub fn degree_weighted(candidates: Vec<usize>, degrees: &[usize], alpha: f64) -> Option<Self> {
        let weights: Vec<f64> = degrees.iter().map(|&d| (d as f64).powf(alpha)).collect();
        let weighted = WeightedIndex::new(weights).ok()?;
        Some(Self {
            candidates,
            weighted: Some(weighted),
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let k = match &self.weighted {
            Some(w) => w.sample(rng),
            None => rng.random_range(0..self.candidates.len()),
        };
        self.candidates[k]
    }
}

const MIN_ATTEMPTS: usize = 10_000;
const ATTEMPTS_PER_SAMPLE: usize = 200;

/// Samples exactly `positives.len()` label-0 pairs that are absent from the
/// graph (GD relation when constrained, every relation otherwise) and from
/// each other.
///
/// Constrained: gene endpoint uniform over the genes of `positives`, disease
/// endpoint over all diseases (degree-weighted when enabled). Unconstrained:
/// first endpoint uniform over all nodes, second over all nodes
/// (degree-weighted when enabled).
pub fn sample_negatives(
    graph: &HeteroGraph,
    positives: &[LabeledPair],
    sampler: &NegativeSampler,
    rng: &mut StreamRng,
) -> Result<Vec<LabeledPair>> {
    let wanted = positives.len();
    if wanted == 0 {
        return Ok(Vec::new());
    }
    let degrees = sampler.degree_source.degrees(graph);
    let pick = |cands: Vec<usize>| -> Option<CandidateSampler> {
        if cands.is_empty() {
            return None;
        }
        if sampler.degree_aware {
            let d: Vec<usize> = cands.iter().map(|&c| degrees[c]).collect();
            CandidateSampler::degree_weighted(cands, &d, sampler.alpha)
        } else {
            Some(CandidateSampler::uniform(cands))
        }
    };

    let (first, second) = match sampler.mode {
        NegativeMode::Constrained => {
            let genes: BTreeSet<usize> = positives
                .iter()
                .flat_map(|p| [p.u, p.v])
                .filter(|&n| graph.kind(n) == NodeKind::Gene)
                .collect();
            let diseases: Vec<usize> = graph.nodes_of_kind(NodeKind::Disease).collect();
            (
                (!genes.is_empty()).then(|| CandidateSampler::uniform(genes.into_iter().collect())),
                pick(diseases),
            )
        }
        NegativeMode::Unconstrained => {
            let all: Vec<usize> = (0..graph.node_count()).collect();
            (Some(CandidateSampler::uniform(all.clone())), pick(all))
        }
    };
    let exhausted = |attempts, found| Error::NegativeSpaceExhausted {
        attempts,
        found,
        wanted,
    };
    let (Some(first), Some(second)) = (first, second) else {
        return Err(exhausted(0, 0));
    };

    let max_attempts = MIN_ATTEMPTS.max(ATTEMPTS_PER_SAMPLE * wanted);
    let mut taken: HashSet<(usize, usize)> = HashSet::with_capacity(wanted);
    let mut out = Vec::with_capacity(wanted);
    let mut attempts = 0;
    while out.len() < wanted {
        if attempts == max_attempts {
            return Err(exhausted(attempts, out.len()));
        }
        attempts += 1;
        let (u, v) = (first.draw(rng), second.draw(rng));
        let collides = match sampler.mode {
            NegativeMode::Constrained => graph.has_edge(RelationKind::GD, u, v),
            NegativeMode::Unconstrained => u == v || graph.has_any_edge(u, v),
        };
        if collides || !taken.insert((u.min(v), u.max(v))) {
            continue;
        }
        out.push(LabeledPair::negative(u, v));
    }
    Ok(out)
}

/// Positives plus frozen negatives for each split.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplit {
    pub parts: [Vec<LabeledPair>; 3],
    pub seed: u64,
    pub ratios: SplitRatios,
    pub sampler: NegativeSampler,
}

impl EdgeSplit {
    pub fn part(&self, s: SplitName) -> &[LabeledPair] {
        &self.parts[s.slot()]
    }

    pub fn positives(&self, s: SplitName) -> impl Iterator<Item = &LabeledPair> {
        self.part(s).iter().filter(|p| p.label == 1)
    }

    pub fn to_positive_split(&self) -> PositiveSplit {
        PositiveSplit {
            parts: SplitName::ALL.map(|s| {
                let mut v: Vec<(usize, usize)> = self.positives(s).map(|p| (p.u, p.v)).collect();
                v.sort_unstable();
                v
            }),
        }
    }

    pub fn descriptor(&self) -> Descriptor {
        let mut d = Descriptor::new();
        d.set("seed", self.seed);
        d.set("ratio_train", self.ratios.train);
        d.set("ratio_val", self.ratios.val);
        d.set("ratio_test", self.ratios.test);
        d.set("negative_mode", self.sampler.mode.as_str());
        d.set("degree_aware", self.sampler.degree_aware);
        d.set("alpha", self.sampler.alpha);
        d.set("degree_source", self.sampler.degree_source.as_str());
        for s in SplitName::ALL {
            d.set(&format!("{s}_pairs"), self.part(s).len());
        }
        d
    }
}

/// Name of the RNG stream used for one split's negatives.
pub fn negative_stream_name(split: SplitName) -> String {
    format!("negatives/{split}")
}

/// Splits positives by cluster and samples balanced negatives per split.
///
/// Training negatives follow `sampler`; validation and test negatives are
/// always type-constrained (same degree settings). Collisions are checked
/// against the whole graph.
pub fn build_edge_split(
    graph: &HeteroGraph,
    clusters: &ClusterMap,
    ratios: SplitRatios,
    sampler: NegativeSampler,
    seed: u64,
    tolerance: f64,
) -> Result<EdgeSplit> {
    let pos = split_edges(graph, clusters, ratios, seed)?;
    let total = pos.total() as f64;
    for (s, target) in SplitName::ALL.into_iter().zip(ratios.as_array()) {
        let frac = pos.part(s).len() as f64 / total;
        if (frac - target).abs() > tolerance {
            warn!("{s} holds {:.1}% of positives (target {:.1}%)", 100.0 * frac, 100.0 * target);
        }
    }
    let mut parts: [Vec<LabeledPair>; 3] = Default::default();
    for s in SplitName::ALL {
        let positives: Vec<LabeledPair> = pos.part(s).iter().map(|&(g, d)| LabeledPair::positive(g, d)).collect();
        let split_sampler = match s {
            SplitName::Train => sampler,
            _ => NegativeSampler {
                mode: NegativeMode::Constrained,
                ..sampler
            },
        };
        let mut r = rng::stream(seed, &negative_stream_name(s));
        let negatives = sample_negatives(graph, &positives, &split_sampler, &mut r)?;
        parts[s.slot()] = positives.into_iter().chain(negatives).collect();
    }
    Ok(EdgeSplit {
        parts,
        seed,
        ratios,
        sampler,
    })
}

pub const SPLIT_HEADER: &str = "gene_id\tdisease_id\tlabel";
pub const SPLIT_DESCRIPTOR: &str = "split.desc";

pub fn split_file_name(s: SplitName) -> String {
    format!("{s}.tsv")
}

pub fn split_to_tsv(graph: &HeteroGraph, pairs: &[LabeledPair]) -> String {
    let mut s = format!("{SPLIT_HEADER}\n");
    for p in pairs {
        s.push_str(&format!("{}\t{}\t{}\n", graph.id(p.u), graph.id(p.v), p.label));
    }
    s
}

pub fn parse_split_tsv(graph: &HeteroGraph, text: &str, path: &Path) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != SPLIT_HEADER {
                return Err(Error::parse(path, 1, format!("expected header `{SPLIT_HEADER}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [a, b, label] = f.as_slice() else {
            return Err(Error::parse(path, i + 1, "expected 3 columns"));
        };
        let idx = |id: &str| graph.index_of(id).ok_or_else(|| Error::UnknownEntity(id.to_string()));
        let label = match *label {
            "1" => 1,
            "0" => 0,
            o => return Err(Error::parse(path, i + 1, format!("bad label `{o}`"))),
        };
        out.push(LabeledPair {
            u: idx(a)?,
            v: idx(b)?,
            label,
        });
    }
    Ok(out)
}

/// Writes `train.tsv`, `val.tsv`, `test.tsv` and `split.desc` into `dir`.
/// `extra` entries are appended to the descriptor.
pub fn save_split(dir: &Path, graph: &HeteroGraph, split: &EdgeSplit, extra: &Descriptor) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in SplitName::ALL {
        let p = dir.join(split_file_name(s));
        fs::write(&p, split_to_tsv(graph, split.part(s))).map_err(|e| Error::io(&p, e))?;
    }
    let mut d = split.descriptor();
    d.extend(extra);
    d.save(&dir.join(SPLIT_DESCRIPTOR))
}

/// Loads the three split files and the descriptor. Returns the split and the
/// raw bytes of the three files, in split order, for hashing.
pub fn load_split(dir: &Path, graph: &HeteroGraph) -> Result<(EdgeSplit, Descriptor, Vec<Vec<u8>>)> {
    let desc = Descriptor::load(&dir.join(SPLIT_DESCRIPTOR))?;
    let mut parts: [Vec<LabeledPair>; 3] = Default::default();
    let mut raw = Vec::new();
    for s in SplitName::ALL {
        let p = dir.join(split_file_name(s));
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let text = String::from_utf8_lossy(&bytes);
        parts[s.slot()] = parse_split_tsv(graph, &text, &p)?;
        raw.push(bytes);
    }
    let sampler = NegativeSampler {
        mode: desc.parse("negative_mode")?,
        degree_aware: desc.parse("degree_aware")?,
        alpha: desc.parse("alpha")?,
        degree_source: desc.parse("degree_source")?,
    };
    let split = EdgeSplit {
        parts,
        seed: desc.parse("seed")?,
        ratios: SplitRatios {
            train: desc.parse("ratio_train")?,
            val: desc.parse("ratio_val")?,
            test: desc.parse("ratio_test")?,
        },
        sampler,
    };
    Ok((split, desc, raw))
}
