//! `dglink` command-line entry point.
//!
//! Exit codes: 0 on success, 2 on validation or audit failures, 1 otherwise.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dglink_core::config::RunConfig;
use dglink_core::dataset::SplitName;
use dglink_core::graph::variant_threshold;
use dglink_core::metrics::MetricReport;
use dglink_core::pipeline::{self, EdgeFiles, EmbeddingFiles, Query, RunInputs};
use dglink_core::synth::SynthConfig;
use log::error;

#[derive(Parser)]
#[command(name = "dglink", version, about = "Disease-gene link prediction with a heterogeneous GCN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a graph bundle from GG, DD and GD edge lists.
    BuildGraph(BuildGraphArgs),
    /// Cluster-grouped train/val/test split with frozen negatives.
    Split(SplitArgs),
    /// Train and keep the best-validation checkpoint.
    Train(TrainArgs),
    /// Metrics of a checkpoint on the validation or test split.
    Evaluate(EvaluateArgs),
    /// Rank candidate partners for genes or diseases.
    Predict(PredictArgs),
    /// Alignment x negative-sampling ablation table.
    Ablate(AblateArgs),
    /// Generate a planted-structure synthetic dataset.
    Synth(SynthArgs),
}

/// Layered run configuration: defaults < file < DGLINK_* env < --set.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat TOML file of config keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// KEY=VALUE override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut overrides = Vec::new();
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!(dglink_core::Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")));
            };
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(RunConfig::resolve(self.config.as_deref(), std::env::vars(), &overrides)?)
    }
}

#[derive(Args)]
struct EmbeddingArgs {
    /// Directory holding genes.emb and diseases.emb.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    gene_emb: Option<PathBuf>,
    #[arg(long)]
    disease_emb: Option<PathBuf>,
}

impl EmbeddingArgs {
    fn files(&self) -> anyhow::Result<EmbeddingFiles> {
        let base = self.embeddings.as_deref().map(EmbeddingFiles::in_dir);
        let pick = |explicit: &Option<PathBuf>, from_dir: Option<PathBuf>, what: &str| {
            explicit
                .clone()
                .or(from_dir)
                .with_context(|| format!("no {what} embeddings: pass --embeddings or --{what}-emb"))
        };
        Ok(EmbeddingFiles {
            genes: pick(&self.gene_emb, base.as_ref().map(|b| b.genes.clone()), "gene")?,
            diseases: pick(&self.disease_emb, base.map(|b| b.diseases), "disease")?,
        })
    }
}

#[derive(Args)]
struct InputArgs {
    /// Graph bundle directory or graph.tsv.
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    /// Split directory written by `split`.
    #[arg(long)]
    split: PathBuf,
}

impl InputArgs {
    fn inputs(&self) -> anyhow::Result<RunInputs> {
        Ok(RunInputs {
            graph: self.graph.clone(),
            embeddings: self.embeddings.files()?,
            split: self.split.clone(),
        })
    }
}

#[derive(Args)]
struct BuildGraphArgs {
    #[arg(long)]
    gg: PathBuf,
    #[arg(long)]
    dd: PathBuf,
    #[arg(long)]
    gd: PathBuf,
    /// Keep GD rows with score >= threshold.
    #[arg(long, conflicts_with = "variant")]
    threshold: Option<f64>,
    /// Graph variant 1-5, mapped to a GD score threshold.
    #[arg(long)]
    variant: Option<u8>,
    #[arg(long, default_value = "graph")]
    name: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    graph: PathBuf,
    /// gene_id<TAB>cluster_id map.
    #[arg(long)]
    clusters: PathBuf,
    /// Output directory; with --audit-only, the split directory to audit.
    #[arg(long)]
    out: PathBuf,
    /// Only re-audit existing manifests for cluster leakage.
    #[arg(long)]
    audit_only: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    inputs: InputArgs,
    #[arg(long, default_value = "val")]
    which: SplitName,
    /// Override the checkpoint's operating threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    inputs: InputArgs,
    /// Gene id to rank diseases for; repeatable.
    #[arg(long = "gene", conflicts_with = "diseases", required_unless_present = "diseases")]
    genes: Vec<String>,
    /// Disease id to rank genes for; repeatable.
    #[arg(long = "disease")]
    diseases: Vec<String>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Drop pairs that are edges of the training graph.
    #[arg(long)]
    exclude_known: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SynthConfig::default().genes)]
    genes: usize,
    #[arg(long, default_value_t = SynthConfig::default().diseases)]
    diseases: usize,
    #[arg(long, default_value_t = SynthConfig::default().gd_edges)]
    gd_edges: usize,
    /// Decouple associations from features (null control).
    #[arg(long)]
    shuffle_associations: bool,
}

fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Returns the exit code for non-error outcomes.
fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::BuildGraph(a) => {
            let threshold = match a.variant {
                Some(v) => variant_threshold(v)
                    .ok_or_else(|| dglink_core::Error::Config(format!("unknown graph variant {v}")))?,
                None => a.threshold,
            };
            let files = EdgeFiles { gg: a.gg, dd: a.dd, gd: a.gd };
            let m = pipeline::cmd_build_graph(&files, threshold, &a.out, &a.name)?;
            print!("{}", m.to_tsv());
        }
        Command::Split(a) => {
            let report = if a.audit_only {
                pipeline::cmd_audit(&a.graph, &a.clusters, &a.out)?
            } else {
                let cfg = a.config.resolve()?;
                let o = pipeline::cmd_split(&a.graph, &a.clusters, &a.out, &cfg)?;
                for s in SplitName::ALL {
                    eprintln!("{s}: {} pairs", o.split.part(s).len());
                }
                o.leakage
            };
            print!("{}", report.to_tsv());
            eprintln!("leakage violations: {}", report.violations.len());
            if !report.is_clean() {
                return Ok(2);
            }
        }
        Command::Train(a) => {
            let cfg = a.config.resolve()?;
            let s = pipeline::cmd_train(&a.inputs.inputs()?, &a.out, &cfg)?;
            let best = s.log.best();
            println!(
                "best epoch {} val roc_auc {} checkpoint {}",
                s.log.best_epoch,
                best.val.roc_auc,
                s.checkpoint.display()
            );
        }
        Command::Evaluate(a) => {
            let r = pipeline::cmd_evaluate(&a.checkpoint, &a.inputs.inputs()?, a.which, a.threshold)?;
            let text = format!("{}\n{}\n", MetricReport::HEADER, r.to_tsv_row());
            print!("{text}");
            if let Some(p) = &a.out {
                fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Predict(a) => {
            let query = if a.genes.is_empty() {
                Query::Diseases(a.diseases)
            } else {
                Query::Genes(a.genes)
            };
            let ranking = pipeline::cmd_predict(&a.checkpoint, &a.inputs.inputs()?, &query, a.top_k, a.exclude_known)?;
            write_or_print(a.out.as_deref(), &ranking.to_tsv())?;
        }
        Command::Ablate(a) => {
            let cfg = a.config.resolve()?;
            let t = pipeline::cmd_ablate(&a.graph, &a.clusters, &a.embeddings.files()?, &a.out, &cfg)?;
            print!("{}", t.to_tsv());
        }
        Command::Synth(a) => {
            let cfg = SynthConfig {
                seed: a.seed,
                genes: a.genes,
                diseases: a.diseases,
                gd_edges: a.gd_edges,
                shuffle_associations: a.shuffle_associations,
                ..SynthConfig::default()
            };
            let d = pipeline::cmd_synth(&cfg, &a.out)?;
            println!(
                "wrote {} nodes, {} clusters to {}",
                d.graph.node_count(),
                d.clusters.len(),
                a.out.display()
            );
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DGLINK_LOG", "info")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e:#}");
            let validation = e
                .downcast_ref::<dglink_core::Error>()
                .is_some_and(dglink_core::Error::is_validation);
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
