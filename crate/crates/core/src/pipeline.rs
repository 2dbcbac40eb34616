//! End-to-end runs: in-memory stages plus the file-based commands behind the
//! CLI.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::config::{Descriptor, RunConfig};
use crate::dataset::{
    build_edge_split, check_split_leakage, load_split, save_split, ClusterMap, EdgeSplit, LabeledPair, LeakageReport,
    NegativeMode, SplitName,
};
use crate::error::{Error, Result};
use crate::features::{
    align_features, load_embeddings, save_embeddings, AlignMode, FeatureMatrix, RawEmbedding, ValueSeparator,
};
use crate::graph::{load_bundle, read_edge_file, save_bundle, GraphManifest, HeteroGraph, NodeKind, PropagationOperator};
use crate::hash::content_hash;
use crate::metrics::MetricReport;
use crate::model::{decode_pairs, encode, load_checkpoint, save_checkpoint, Checkpoint, ModelParams};
use crate::synth::{generate, SynthConfig, SynthDataset};
use crate::train::{evaluate, train, TrainInputs, TrainLog, TrainOutcome};

/// GG and DD edges plus the training split's GD edges.
pub fn message_passing_graph(graph: &HeteroGraph, split: &EdgeSplit) -> HeteroGraph {
    graph.with_gd_subset(split.positives(SplitName::Train).map(|p| (p.u, p.v)))
}

/// Inputs to training, derived from the raw artifacts.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub features: FeatureMatrix,
    pub split: EdgeSplit,
    pub op: PropagationOperator,
}

impl Prepared {
    pub fn new(graph: &HeteroGraph, features: FeatureMatrix, split: EdgeSplit, cfg: &RunConfig) -> Result<Self> {
        let op = PropagationOperator::build(&message_passing_graph(graph, &split), cfg.mixing)?;
        Ok(Self { features, split, op })
    }

    pub fn inputs<'a>(&'a self, graph: &'a HeteroGraph) -> TrainInputs<'a> {
        TrainInputs {
            graph,
            op: &self.op,
            features: self.features.data.view(),
            split: &self.split,
        }
    }
}

pub fn make_split(graph: &HeteroGraph, clusters: &ClusterMap, cfg: &RunConfig) -> Result<EdgeSplit> {
    build_edge_split(graph, clusters, cfg.ratios, cfg.sampler, cfg.split_seed, cfg.split_tolerance)
}

pub fn prepare(graph: &HeteroGraph, clusters: &ClusterMap, raws: &[RawEmbedding], cfg: &RunConfig) -> Result<Prepared> {
    let features = align_features(graph, raws, cfg.align_mode, cfg.missing)?;
    let split = make_split(graph, clusters, cfg)?;
    Prepared::new(graph, features, split, cfg)
}

pub fn train_prepared(graph: &HeteroGraph, prepared: &Prepared, cfg: &RunConfig) -> Result<TrainOutcome> {
    train(prepared.inputs(graph), &cfg.train)
}

/// Hashes of the artifacts a run consumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactHashes {
    pub graph: String,
    pub features: String,
    pub split: String,
}

impl ArtifactHashes {
    fn record(&self, d: &mut Descriptor) {
        d.set("graph_hash", &self.graph);
        d.set("features_hash", &self.features);
        d.set("split_hash", &self.split);
    }

    /// Fails on the first recorded hash that differs from `self`.
    fn verify(&self, d: &Descriptor, what: &str) -> Result<()> {
        for (key, actual) in [
            ("graph_hash", &self.graph),
            ("features_hash", &self.features),
            ("split_hash", &self.split),
        ] {
            match d.get(key) {
                Some(expected) if expected != actual => {
                    return Err(Error::ArtifactMismatch(format!(
                        "{what} records {key} {expected}, inputs hash to {actual}"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

pub fn load_graph(path: &Path) -> Result<(HeteroGraph, String)> {
    let (g, bytes) = load_bundle(path)?;
    Ok((g, content_hash([bytes.as_slice()])))
}

/// Raw gene and disease embedding files.
#[derive(Debug, Clone)]
pub struct EmbeddingFiles {
    pub genes: PathBuf,
    pub diseases: PathBuf,
}

impl EmbeddingFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            genes: dir.join(GENE_EMBEDDINGS),
            diseases: dir.join(DISEASE_EMBEDDINGS),
        }
    }

    /// Parsed embeddings plus a hash of both files' bytes.
    pub fn load(&self, sep: ValueSeparator) -> Result<(Vec<RawEmbedding>, String)> {
        let gb = fs::read(&self.genes).map_err(|e| Error::io(&self.genes, e))?;
        let db = fs::read(&self.diseases).map_err(|e| Error::io(&self.diseases, e))?;
        let mut raws = load_embeddings(&self.genes, NodeKind::Gene, sep)?;
        raws.extend(load_embeddings(&self.diseases, NodeKind::Disease, sep)?);
        Ok((raws, content_hash([gb.as_slice(), db.as_slice()])))
    }
}

pub const GENE_EMBEDDINGS: &str = "genes.emb";
pub const DISEASE_EMBEDDINGS: &str = "diseases.emb";
pub const CLUSTERS_FILE: &str = "clusters.tsv";
pub const COMMUNITIES_FILE: &str = "communities.tsv";
pub const AUDIT_FILE: &str = "audit.tsv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.tsv";
pub const RUN_DESCRIPTOR_FILE: &str = "run.desc";
pub const ABLATION_FILE: &str = "ablation.tsv";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Edge files for `build-graph`.
#[derive(Debug, Clone)]
pub struct EdgeFiles {
    pub gg: PathBuf,
    pub dd: PathBuf,
    pub gd: PathBuf,
}

/// Reads the three edge lists, filters gene-disease rows by `threshold` and
/// writes the bundle and manifest into `out`.
pub fn cmd_build_graph(files: &EdgeFiles, threshold: Option<f64>, out: &Path, name: &str) -> Result<GraphManifest> {
    let gg = read_edge_file(&files.gg, None)?;
    let dd = read_edge_file(&files.dd, None)?;
    let gd = read_edge_file(&files.gd, threshold)?;
    let g = HeteroGraph::from_edge_records(&gg, &dd, &gd)?;
    let m = save_bundle(out, name, &g)?;
    info!(
        "graph {name}: {} genes, {} diseases, {}/{}/{} GG/DD/GD edges",
        m.genes, m.diseases, m.gga, m.dda, m.gda
    );
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub split: EdgeSplit,
    pub leakage: LeakageReport,
    pub split_hash: String,
}

fn split_hash(raw: &[Vec<u8>]) -> String {
    content_hash(raw.iter().map(Vec::as_slice))
}

/// Builds the cluster-grouped split with frozen negatives, writes the three
/// manifests, the descriptor and the leakage audit.
pub fn cmd_split(graph_path: &Path, clusters_path: &Path, out: &Path, cfg: &RunConfig) -> Result<SplitOutcome> {
    let (g, graph_hash) = load_graph(graph_path)?;
    let clusters = ClusterMap::load(clusters_path)?;
    let clusters_bytes = fs::read(clusters_path).map_err(|e| Error::io(clusters_path, e))?;
    let split = make_split(&g, &clusters, cfg)?;
    let mut extra = Descriptor::new();
    extra.set("graph_hash", graph_hash);
    extra.set("clusters_hash", content_hash([clusters_bytes.as_slice()]));
    save_split(out, &g, &split, &extra)?;
    let leakage = check_split_leakage(&g, &split.to_positive_split(), &clusters);
    write(&out.join(AUDIT_FILE), leakage.to_tsv())?;
    let (_, _, raw) = load_split(out, &g)?;
    Ok(SplitOutcome {
        split,
        leakage,
        split_hash: split_hash(&raw),
    })
}

/// Re-audits split manifests already on disk.
pub fn cmd_audit(graph_path: &Path, clusters_path: &Path, split_dir: &Path) -> Result<LeakageReport> {
    let (g, _) = load_graph(graph_path)?;
    let clusters = ClusterMap::load(clusters_path)?;
    let (split, _, _) = load_split(split_dir, &g)?;
    Ok(check_split_leakage(&g, &split.to_positive_split(), &clusters))
}

/// Graph, embeddings and split for a training or scoring run.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub graph: PathBuf,
    pub embeddings: EmbeddingFiles,
    pub split: PathBuf,
}

/// Everything loaded from [`RunInputs`], with hashes checked.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub graph: HeteroGraph,
    pub prepared: Prepared,
    pub hashes: ArtifactHashes,
}

impl RunInputs {
    pub fn load(&self, cfg: &RunConfig) -> Result<Loaded> {
        let (graph, graph_hash) = load_graph(&self.graph)?;
        let (split, desc, raw) = load_split(&self.split, &graph)?;
        if let Some(expected) = desc.get("graph_hash") {
            if expected != graph_hash {
                return Err(Error::ArtifactMismatch(format!(
                    "split in {} was built from graph {expected}, but {} hashes to {graph_hash}",
                    self.split.display(),
                    self.graph.display()
                )));
            }
        }
        let (raws, features_hash) = self.embeddings.load(cfg.embedding_separator)?;
        let features = align_features(&graph, &raws, cfg.align_mode, cfg.missing)?;
        let prepared = Prepared::new(&graph, features, split, cfg)?;
        Ok(Loaded {
            graph,
            prepared,
            hashes: ArtifactHashes {
                graph: graph_hash,
                features: features_hash,
                split: split_hash(&raw),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log: TrainLog,
    pub descriptor: Descriptor,
}

pub fn checkpoint_path(out: &Path, cfg: &RunConfig) -> PathBuf {
    match &cfg.checkpoint_dir {
        Some(dir) => Path::new(dir).join(CHECKPOINT_FILE),
        None => out.join(CHECKPOINT_FILE),
    }
}

/// Trains, then writes the best checkpoint, the per-epoch log and a run
/// descriptor carrying the resolved config, seeds and artifact hashes.
pub fn cmd_train(inputs: &RunInputs, out: &Path, cfg: &RunConfig) -> Result<TrainSummary> {
    let loaded = inputs.load(cfg)?;
    let outcome = train_prepared(&loaded.graph, &loaded.prepared, cfg)?;
    info!("trained in {:.1}s", outcome.log.wall_time_secs);
    let log_text = outcome.log.to_tsv();

    let mut desc = cfg.descriptor().prefixed("config");
    desc.set("config_hash", cfg.content_hash());
    loaded.hashes.record(&mut desc);
    desc.set("best_epoch", outcome.log.best_epoch);
    desc.set("best_val_roc_auc", outcome.log.best().val.roc_auc);
    desc.set("train_log_hash", content_hash([log_text.as_bytes()]));

    let ckpt_path = checkpoint_path(out, cfg);
    save_checkpoint(&ckpt_path, &Checkpoint::new(outcome.best, desc.clone()))?;
    write(&out.join(TRAIN_LOG_FILE), &log_text)?;
    desc.set("checkpoint", ckpt_path.display());
    desc.save(&out.join(RUN_DESCRIPTOR_FILE))?;
    Ok(TrainSummary {
        checkpoint: ckpt_path,
        log: outcome.log,
        descriptor: desc,
    })
}

/// A checkpoint together with the config it was trained under.
#[derive(Debug, Clone)]
pub struct LoadedCheckpoint {
    pub checkpoint: Checkpoint,
    pub config: RunConfig,
}

pub fn open_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let checkpoint = load_checkpoint(path)?;
    let config = RunConfig::from_descriptor(&checkpoint.meta.section("config"))?;
    Ok(LoadedCheckpoint { checkpoint, config })
}

impl LoadedCheckpoint {
    /// Loads `inputs` under the training config and checks them against the
    /// hashes recorded at training time.
    pub fn load_inputs(&self, inputs: &RunInputs) -> Result<Loaded> {
        let loaded = inputs.load(&self.config)?;
        loaded.hashes.verify(&self.checkpoint.meta, "checkpoint")?;
        if loaded.prepared.features.width() != self.checkpoint.params.config.in_dim {
            return Err(Error::ArtifactMismatch(format!(
                "features are {} wide, checkpoint expects {}",
                loaded.prepared.features.width(),
                self.checkpoint.params.config.in_dim
            )));
        }
        Ok(loaded)
    }
}

/// Metrics of a checkpoint on one split. `threshold` defaults to the one the
/// checkpoint was trained with.
pub fn cmd_evaluate(ckpt: &Path, inputs: &RunInputs, which: SplitName, threshold: Option<f64>) -> Result<MetricReport> {
    let lc = open_checkpoint(ckpt)?;
    let loaded = lc.load_inputs(inputs)?;
    let p = &loaded.prepared;
    evaluate(
        &lc.checkpoint.params,
        &p.op,
        p.features.data.view(),
        p.split.part(which),
        threshold.unwrap_or(lc.config.train.threshold),
    )
}

/// Ids whose candidate partners are ranked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Genes(Vec<String>),
    Diseases(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPair {
    pub query: String,
    pub gene: String,
    pub disease: String,
    pub probability: f64,
    /// Edge of the training graph, so not a novel prediction.
    pub known: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionRanking {
    pub rows: Vec<RankedPair>,
}

impl PredictionRanking {
    pub const HEADER: &'static str = "query_id\tgene_id\tdisease_id\tprobability\tknown_edge";

    pub fn to_tsv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.query,
                r.gene,
                r.disease,
                r.probability,
                u8::from(r.known)
            ));
        }
        s
    }
}

/// Scores every gene-disease candidate for each query id in eval mode. Rows
/// for one query are contiguous and sorted by descending probability, ties
/// by id; `top_k` applies per query.
pub fn rank_candidates(
    graph: &HeteroGraph,
    params: &ModelParams,
    prepared: &Prepared,
    query: &Query,
    top_k: Option<usize>,
    exclude_known: bool,
) -> Result<PredictionRanking> {
    let (ids, kind) = match query {
        Query::Genes(ids) => (ids, NodeKind::Gene),
        Query::Diseases(ids) => (ids, NodeKind::Disease),
    };
    let known: HashSet<(usize, usize)> = prepared
        .split
        .positives(SplitName::Train)
        .map(|p| (p.u, p.v))
        .collect();
    let z = encode(params, prepared.op.matrix(), prepared.features.data.view(), false, 0)?.z;
    let mut rows = Vec::new();
    for id in ids {
        let q = graph
            .index_of(id)
            .filter(|&i| graph.kind(i) == kind)
            .ok_or_else(|| Error::UnknownEntity(id.clone()))?;
        let other = match kind {
            NodeKind::Gene => NodeKind::Disease,
            NodeKind::Disease => NodeKind::Gene,
        };
        let pairs: Vec<(usize, usize)> = graph
            .nodes_of_kind(other)
            .map(|c| if kind == NodeKind::Gene { (q, c) } else { (c, q) })
            .filter(|p| !(exclude_known && known.contains(p)))
            .collect();
        let probs = decode_pairs(&z, &pairs)?.probs;
        let mut scored: Vec<RankedPair> = pairs
            .iter()
            .zip(probs)
            .map(|(&(gi, di), probability)| RankedPair {
                query: id.clone(),
                gene: graph.id(gi).to_string(),
                disease: graph.id(di).to_string(),
                probability,
                known: known.contains(&(gi, di)),
            })
            .collect();
        scored.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then_with(|| (&a.gene, &a.disease).cmp(&(&b.gene, &b.disease)))
        });
        scored.truncate(top_k.unwrap_or(usize::MAX));
        rows.extend(scored);
    }
    Ok(PredictionRanking { rows })
}

pub fn cmd_predict(
    ckpt: &Path,
    inputs: &RunInputs,
    query: &Query,
    top_k: Option<usize>,
    exclude_known: bool,
) -> Result<PredictionRanking> {
    let lc = open_checkpoint(ckpt)?;
    let loaded = lc.load_inputs(inputs)?;
    rank_candidates(&loaded.graph, &lc.checkpoint.params, &loaded.prepared, query, top_k, exclude_known)
}

/// One ablation configuration and its validation and test metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub align_mode: AlignMode,
    pub negative_mode: NegativeMode,
    pub seed: u64,
    pub split_seed: u64,
    pub val: MetricReport,
    pub test: MetricReport,
    /// Training negatives by endpoint kinds: gene-disease, gene-gene,
    /// disease-disease.
    pub train_negative_kinds: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn header() -> String {
        let metrics = |p: &str| {
            MetricReport::HEADER
                .split('\t')
                .map(|m| format!("{p}_{m}"))
                .collect::<Vec<_>>()
                .join("\t")
        };
        format!(
            "align_mode\tnegative_mode\tseed\tsplit_seed\t{}\t{}\ttrain_neg_gd\ttrain_neg_gg\ttrain_neg_dd",
            metrics("val"),
            metrics("test")
        )
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("{}\n", Self::header());
        for r in &self.rows {
            let [gd, gg, dd] = r.train_negative_kinds;
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{gd}\t{gg}\t{dd}\n",
                r.align_mode.as_str(),
                r.negative_mode.as_str(),
                r.seed,
                r.split_seed,
                r.val.to_tsv_row(),
                r.test.to_tsv_row()
            ));
        }
        s
    }
}

fn negative_kinds(graph: &HeteroGraph, pairs: &[LabeledPair]) -> [usize; 3] {
    let mut out = [0; 3];
    for p in pairs.iter().filter(|p| p.label == 0) {
        match (graph.kind(p.u), graph.kind(p.v)) {
            (NodeKind::Gene, NodeKind::Gene) => out[1] += 1,
            (NodeKind::Disease, NodeKind::Disease) => out[2] += 1,
            _ => out[0] += 1,
        }
    }
    out
}

/// The 2x2 of alignment mode and training-negative mode, all other knobs and
/// seeds taken from `base`.
pub fn run_ablation(
    graph: &HeteroGraph,
    clusters: &ClusterMap,
    raws: &[RawEmbedding],
    base: &RunConfig,
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for align_mode in [AlignMode::Default, AlignMode::Ablation] {
        for negative_mode in [NegativeMode::Constrained, NegativeMode::Unconstrained] {
            let mut cfg = base.clone();
            cfg.align_mode = align_mode;
            cfg.sampler.mode = negative_mode;
            info!("ablation: {} alignment, {} negatives", align_mode.as_str(), negative_mode.as_str());
            let prepared = prepare(graph, clusters, raws, &cfg)?;
            let outcome = train_prepared(graph, &prepared, &cfg)?;
            let x = prepared.features.data.view();
            let at = |s: SplitName| evaluate(&outcome.best, &prepared.op, x, prepared.split.part(s), cfg.train.threshold);
            rows.push(AblationRow {
                align_mode,
                negative_mode,
                seed: cfg.train.seed,
                split_seed: cfg.split_seed,
                val: at(SplitName::Val)?,
                test: at(SplitName::Test)?,
                train_negative_kinds: negative_kinds(graph, prepared.split.part(SplitName::Train)),
            });
        }
    }
    Ok(AblationTable { rows })
}

/// Runs the ablation over on-disk artifacts and writes `ablation.tsv` plus a
/// run descriptor into `out`.
pub fn cmd_ablate(
    graph_path: &Path,
    clusters_path: &Path,
    embeddings: &EmbeddingFiles,
    out: &Path,
    base: &RunConfig,
) -> Result<AblationTable> {
    let (graph, graph_hash) = load_graph(graph_path)?;
    let clusters = ClusterMap::load(clusters_path)?;
    let (raws, features_hash) = embeddings.load(base.embedding_separator)?;
    let table = run_ablation(&graph, &clusters, &raws, base)?;
    let text = table.to_tsv();
    write(&out.join(ABLATION_FILE), &text)?;
    let mut desc = base.descriptor().prefixed("config");
    desc.set("config_hash", base.content_hash());
    desc.set("graph_hash", graph_hash);
    desc.set("features_hash", features_hash);
    desc.set("ablation_hash", content_hash([text.as_bytes()]));
    desc.save(&out.join(RUN_DESCRIPTOR_FILE))?;
    Ok(table)
}

/// Writes a planted-structure dataset: `graph/` bundle, cluster map,
/// embeddings and the planted community of every node.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<SynthDataset> {
    let d = generate(cfg)?;
    save_bundle(&out.join("graph"), "synthetic", &d.graph)?;
    d.clusters.save(&out.join(CLUSTERS_FILE))?;
    let (genes, diseases): (Vec<RawEmbedding>, Vec<RawEmbedding>) =
        d.embeddings.iter().cloned().partition(|e| e.kind == NodeKind::Gene);
    save_embeddings(&out.join(GENE_EMBEDDINGS), &genes)?;
    save_embeddings(&out.join(DISEASE_EMBEDDINGS), &diseases)?;
    let mut s = String::from("node_id\tkind\tcommunity\n");
    for (i, c) in d.community.iter().enumerate() {
        s.push_str(&format!("{}\t{}\t{c}\n", d.graph.id(i), d.graph.kind(i)));
    }
    write(&out.join(COMMUNITIES_FILE), s)?;
    Ok(d)
}
