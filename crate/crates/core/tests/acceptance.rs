//! Acceptance suite: one check per criterion, each printing a PASS/FAIL line.
//! Runs as a plain binary so the lines show up in `cargo test` output.

mod common;

use std::collections::HashSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use common::{dense_operator, matmul, max_abs_diff, random_graph, random_matrix, random_weights};
use dglink_core::config::RunConfig;
use dglink_core::dataset::{
    build_edge_split, check_split_leakage, CandidateSampler, ClusterMap, DegreeSource, NegativeMode, NegativeSampler,
    SplitName, SplitRatios,
};
use dglink_core::features::{align_features, AlignMode, MissingPolicy, ALIGNED_DIM, DISEASE_DIM, GENE_DIM};
use dglink_core::graph::{NodeKind, PropagationOperator, RelationKind};
use dglink_core::metrics::{pr_auc, roc_auc, ScoredSet};
use dglink_core::model::{backward, encode, init_params, FinalActivation, ModelConfig, ModelParams};
use dglink_core::pipeline::{self, EmbeddingFiles, RunInputs, CLUSTERS_FILE, TRAIN_LOG_FILE};
use dglink_core::rng::stream;
use dglink_core::synth::{generate, SynthConfig};
use dglink_core::train::{batch_step, evaluate, loss, make_batches, BatchScope, TrainConfig};
use ndarray::Array2;
use rand::Rng;

const GRAD_GRAPHS: usize = 20;
const GRAD_STEP: f64 = 1e-5;
const GRAD_MAX_REL_ERR: f64 = 1e-4;
/// Denominator floor for relative errors of near-zero gradients.
const GRAD_REL_FLOOR: f64 = 1e-6;
const GRAD_BUDGET_SECS: f64 = 60.0;
const ENCODER_TRIALS: usize = 100;
const ENCODER_TOL: f64 = 1e-10;
const NORM_TRIALS: usize = 100;
const NORM_TOL: f64 = 1e-10;
const AUC_SETS: usize = 1000;
const AUC_POINTS: usize = 200;
const PR_AUC_TOL: f64 = 1e-12;
const LOSS_REL_TOL: f64 = 1e-10;
const LOSS_UNDERFLOW_ABS: f64 = 1e-40;
const SPLIT_GRAPHS: usize = 1000;
const SAMPLER_DRAWS: usize = 10_000;
const SAMPLER_RATIO_TOL: f64 = 0.10;
/// Chi-square critical value, 9 degrees of freedom, alpha = 0.01.
const CHI2_9_DF_01: f64 = 21.666;
const LEARN_MIN_VAL_AUC: f64 = 0.90;
const LEARN_MIN_TEST_AUC: f64 = 0.85;
const NULL_AUC_RANGE: (f64, f64) = (0.45, 0.55);
const LEARN_BUDGET_SECS: f64 = 300.0;
const BATCH_LOSS_TOL: f64 = 1e-8;
const PIPELINE_EPOCHS: &str = "10";

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// 1
fn gradient_check() -> Check {
    let started = Instant::now();
    let mut r = stream(101, "acceptance/grad");
    let mut worst = 0.0f64;
    for trial in 0..GRAD_GRAPHS {
        let genes = r.random_range(2..10);
        let diseases = r.random_range(2..=(20 - genes).min(10));
        let g = random_graph(&mut r, genes, diseases, [0.3, 0.3, 0.3]);
        let op = PropagationOperator::build(&g, random_weights(&mut r)).map_err(err)?;
        let n = g.node_count();
        let x = random_matrix(&mut r, n, 8, 1.0);
        let cfg = ModelConfig {
            in_dim: 8,
            hidden_dim: 6,
            embed_dim: 4,
            dropout: 0.5,
            final_activation: if trial % 2 == 0 { FinalActivation::Relu } else { FinalActivation::None },
        };
        let params = init_params(trial as u64, cfg).map_err(err)?;
        let pairs: Vec<(usize, usize)> = (0..8).map(|_| (r.random_range(0..n), r.random_range(0..n))).collect();
        let labels: Vec<u8> = (0..pairs.len()).map(|i| (i % 2) as u8).collect();
        let (w0, w1) = (r.random_range(0.5..2.0), r.random_range(0.5..2.0));
        let seed = trial as u64;
        let objective = |p: &ModelParams| -> f64 {
            let mut t = encode(p, op.matrix(), x.view(), true, seed).unwrap();
            let d = t.decode(&pairs).unwrap();
            loss(&d.scores, &labels, w0, w1).unwrap().0
        };
        let mut t = encode(&params, op.matrix(), x.view(), true, seed).map_err(err)?;
        let d = t.decode(&pairs).map_err(err)?;
        let (_, mut up) = loss(&d.scores, &labels, w0, w1).map_err(err)?;
        up.iter_mut().for_each(|v| *v /= pairs.len() as f64);
        let grads = backward(&t, &up).map_err(err)?;
        for which in 0..2 {
            let analytic = if which == 0 { &grads.w0 } else { &grads.w1 };
            for (idx, &a) in analytic.indexed_iter() {
                let bump = |delta: f64| {
                    let mut p = params.clone();
                    let m = if which == 0 { &mut p.w0 } else { &mut p.w1 };
                    m[idx] += delta;
                    objective(&p)
                };
                let numeric = (bump(GRAD_STEP) - bump(-GRAD_STEP)) / (2.0 * GRAD_STEP);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_REL_FLOOR);
                worst = worst.max(rel);
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(worst < GRAD_MAX_REL_ERR, || format!("max relative error {worst:e}"))?;
    ensure(secs < GRAD_BUDGET_SECS, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "{GRAD_GRAPHS} graphs, max relative error {worst:.2e} < {GRAD_MAX_REL_ERR:e}, {secs:.2}s"
    ))
}

// 2
fn encoder_oracle() -> Check {
    let mut r = stream(102, "acceptance/encoder");
    let mut worst = 0.0f64;
    for trial in 0..ENCODER_TRIALS {
        let genes = r.random_range(1..5);
        let g = random_graph(&mut r, genes, 5 - genes, [0.5, 0.5, 0.5]);
        let w = random_weights(&mut r);
        let op = PropagationOperator::build(&g, w).map_err(err)?;
        let x = random_matrix(&mut r, 5, 7, 1.0);
        let act = if trial % 2 == 0 { FinalActivation::Relu } else { FinalActivation::None };
        let cfg = ModelConfig {
            in_dim: 7,
            hidden_dim: 5,
            embed_dim: 3,
            dropout: 0.5,
            final_activation: act,
        };
        let params = init_params(trial as u64, cfg).map_err(err)?;
        let z = encode(&params, op.matrix(), x.view(), false, 0).map_err(err)?.z;

        let a = dense_operator(&g, w);
        let h1 = matmul(&a, &matmul(&x, &params.w0)).mapv(|v| v.max(0.0));
        let pre2 = matmul(&a, &matmul(&h1, &params.w1));
        let oracle = match act {
            FinalActivation::Relu => pre2.mapv(|v| v.max(0.0)),
            FinalActivation::None => pre2,
        };
        worst = worst.max(max_abs_diff(&z, &oracle));
    }
    ensure(worst < ENCODER_TOL, || format!("max abs difference {worst:e}"))?;
    Ok(format!("{ENCODER_TRIALS} trials, max abs difference {worst:.2e} < {ENCODER_TOL:e}"))
}

// 3
fn normalization_oracle() -> Check {
    let mut r = stream(103, "acceptance/normalization");
    let mut worst = 0.0f64;
    for _ in 0..NORM_TRIALS {
        let genes = r.random_range(1..30);
        let diseases = r.random_range(1..=(50 - genes).min(25));
        let p = [r.random_range(0.0..0.3), r.random_range(0.0..0.3), r.random_range(0.0..0.3)];
        let g = random_graph(&mut r, genes, diseases, p);
        let w = random_weights(&mut r);
        let sparse = PropagationOperator::build(&g, w).map_err(err)?.matrix().to_dense();
        worst = worst.max(max_abs_diff(&sparse, &dense_operator(&g, w)));
    }
    ensure(worst < NORM_TOL, || format!("max abs difference {worst:e}"))?;
    Ok(format!("{NORM_TRIALS} graphs up to 50 nodes, max abs difference {worst:.2e} < {NORM_TOL:e}"))
}

// 4
fn auc_oracles() -> Check {
    let mut r = stream(104, "acceptance/auc");
    let mut worst_pr = 0.0f64;
    for _ in 0..AUC_SETS {
        let levels = r.random_range(2..50);
        let z: Vec<f64> = (0..AUC_POINTS).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
        let mut y: Vec<u8> = (0..AUC_POINTS).map(|_| u8::from(r.random_bool(0.4))).collect();
        y[0] = 1;
        y[1] = 0;
        let set = ScoredSet::new(&z, &y).map_err(err)?;

        let (mut twice, mut p, mut n) = (0u64, 0u64, 0u64);
        for i in 0..AUC_POINTS {
            if y[i] == 1 {
                p += 1;
            } else {
                n += 1;
            }
            for j in 0..AUC_POINTS {
                if y[i] == 1 && y[j] == 0 {
                    twice += if z[i] > z[j] { 2 } else { u64::from(z[i] == z[j]) };
                }
            }
        }
        let brute = twice as f64 / (2 * p * n) as f64;
        let fast = roc_auc(set).map_err(err)?;
        ensure(fast == brute, || format!("roc-auc {fast} vs brute force {brute}"))?;

        let mut thresholds: Vec<f64> = z.clone();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let (mut area, mut prev_recall) = (0.0, 0.0);
        for t in thresholds {
            let tp = (0..AUC_POINTS).filter(|&i| z[i] >= t && y[i] == 1).count() as f64;
            let predicted = (0..AUC_POINTS).filter(|&i| z[i] >= t).count() as f64;
            let recall = tp / p as f64;
            area += (recall - prev_recall) * (tp / predicted);
            prev_recall = recall;
        }
        worst_pr = worst_pr.max((pr_auc(set).map_err(err)? - area).abs());
    }
    ensure(worst_pr < PR_AUC_TOL, || format!("pr-auc max difference {worst_pr:e}"))?;
    Ok(format!(
        "{AUC_SETS} sets of {AUC_POINTS}: roc-auc exact, pr-auc max difference {worst_pr:.2e} < {PR_AUC_TOL:e}"
    ))
}

// 5
fn loss_values() -> Check {
    let ln2 = std::f64::consts::LN_2;
    for y in [0u8, 1] {
        let v = loss(&[0.0], &[y], 1.0, 1.0).map_err(err)?.0;
        ensure((v - ln2).abs() <= f64::EPSILON, || format!("l(0, {y}) = {v}"))?;
    }
    // log(1 + e^-s) and log(1 + e^s), 60-digit reference values.
    #[allow(clippy::excessive_precision)]
    let reference: [(f64, f64, f64); 4] = [
        (30.0, 9.357622968839736779377697e-14, 30.00000000000009357622969),
        (-30.0, 30.00000000000009357622969, 9.357622968839736779377697e-14),
        (100.0, 3.720075976020835964434563e-44, 100.0),
        (-100.0, 100.0, 3.720075976020835964434563e-44),
    ];
    let mut worst = 0.0f64;
    for (s, pos, neg) in reference {
        for (y, want) in [(1u8, pos), (0u8, neg)] {
            let got = loss(&[s], &[y], 1.0, 1.0).map_err(err)?.0;
            let ok = if want < LOSS_UNDERFLOW_ABS {
                (got - want).abs() <= LOSS_UNDERFLOW_ABS
            } else {
                let rel = (got - want).abs() / want;
                worst = worst.max(rel);
                rel <= LOSS_REL_TOL
            };
            ensure(ok && got.is_finite(), || format!("l({s}, {y}) = {got}, reference {want}"))?;
        }
    }
    Ok(format!(
        "l(0,y) = ln 2; s in {{+-30, +-100}} max relative error {worst:.2e} <= {LOSS_REL_TOL:e}"
    ))
}

// 6
fn split_soundness() -> Check {
    let mut r = stream(106, "acceptance/split");
    let mut negatives = 0usize;
    for trial in 0..SPLIT_GRAPHS {
        let genes = r.random_range(8..16);
        let diseases = r.random_range(12..20);
        let mut g = random_graph(&mut r, genes, diseases, [0.1, 0.0, 0.0]);
        for d in genes..genes + diseases - 1 {
            g.add_edge(RelationKind::DD, d, d + 1).map_err(err)?;
        }
        for gene in 0..genes {
            for _ in 0..r.random_range(1..=2) {
                g.add_edge(RelationKind::GD, gene, r.random_range(genes..genes + diseases)).map_err(err)?;
            }
        }
        let mut clusters = ClusterMap::new();
        for gene in 0..genes {
            clusters.insert(g.id(gene), format!("C{}", gene / r.random_range(1..=3)));
        }
        let sampler = NegativeSampler {
            mode: if trial % 2 == 0 { NegativeMode::Constrained } else { NegativeMode::Unconstrained },
            degree_aware: trial % 3 != 0,
            alpha: r.random_range(0.0..=1.0),
            degree_source: [DegreeSource::Total, DegreeSource::Gd, DegreeSource::Dd][trial % 3],
        };
        let split = build_edge_split(&g, &clusters, SplitRatios::default(), sampler, trial as u64, 1.0)
            .map_err(|e| format!("graph {trial}: {e}"))?;

        let leak = check_split_leakage(&g, &split.to_positive_split(), &clusters);
        ensure(leak.is_clean(), || format!("graph {trial}: leakage {:?}", leak.violations))?;

        let mut seen = HashSet::new();
        for s in SplitName::ALL {
            for p in split.positives(s) {
                ensure(seen.insert((p.u, p.v)), || format!("graph {trial}: positive in two splits"))?;
            }
        }
        let all: HashSet<(usize, usize)> = g.gd_pairs().collect();
        ensure(seen == all, || format!("graph {trial}: positives are not the GD edge set"))?;

        for s in SplitName::ALL {
            let part = split.part(s);
            let pos = part.iter().filter(|p| p.label == 1).count();
            let neg: Vec<_> = part.iter().filter(|p| p.label == 0).collect();
            ensure(pos == neg.len(), || format!("graph {trial} {s}: {pos} positives, {} negatives", neg.len()))?;
            for p in neg {
                ensure(!g.has_any_edge(p.u, p.v) && p.u != p.v, || {
                    format!("graph {trial} {s}: negative ({}, {}) collides", p.u, p.v)
                })?;
                let constrained = matches!(s, SplitName::Val | SplitName::Test) || sampler.mode == NegativeMode::Constrained;
                if constrained {
                    ensure(g.kind(p.u) == NodeKind::Gene && g.kind(p.v) == NodeKind::Disease, || {
                        format!("graph {trial} {s}: negative is not gene-disease")
                    })?;
                }
                negatives += 1;
            }
        }
    }
    Ok(format!(
        "{SPLIT_GRAPHS} graphs, {negatives} negatives: no leakage, exact partition, balanced, no collisions"
    ))
}

// 7
fn sampler_distribution() -> Check {
    let mut r = stream(107, "acceptance/sampler");
    let weighted = CandidateSampler::degree_weighted(vec![0, 1], &[9, 1], 1.0).ok_or("no candidates")?;
    let heavy = (0..SAMPLER_DRAWS).filter(|_| weighted.draw(&mut r) == 0).count();
    let ratio = heavy as f64 / (SAMPLER_DRAWS - heavy) as f64;
    ensure((ratio / 9.0 - 1.0).abs() <= SAMPLER_RATIO_TOL, || format!("draw ratio {ratio:.3}"))?;

    let degrees: Vec<usize> = (1..=10).map(|d| d * d).collect();
    let uniform = CandidateSampler::degree_weighted((0..10).collect(), &degrees, 0.0).ok_or("no candidates")?;
    let mut counts = [0usize; 10];
    for _ in 0..SAMPLER_DRAWS {
        counts[uniform.draw(&mut r)] += 1;
    }
    let expected = SAMPLER_DRAWS as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    ensure(chi2 < CHI2_9_DF_01, || format!("chi-square {chi2:.2}"))?;
    Ok(format!(
        "degrees (9,1): ratio {ratio:.3} within 9 +-{:.0}%; alpha=0 chi-square {chi2:.2} < {CHI2_9_DF_01}",
        SAMPLER_RATIO_TOL * 100.0
    ))
}

// 8
fn learnability() -> Check {
    let run = |shuffle: bool| -> Result<(f64, f64, f64, f64, usize), String> {
        let started = Instant::now();
        let d = generate(&SynthConfig {
            shuffle_associations: shuffle,
            ..SynthConfig::default()
        })
        .map_err(err)?;
        let cfg = RunConfig::default();
        let p = pipeline::prepare(&d.graph, &d.clusters, &d.embeddings, &cfg).map_err(err)?;
        let out = pipeline::train_prepared(&d.graph, &p, &cfg).map_err(err)?;
        let test = evaluate(&out.best, &p.op, p.features.data.view(), p.split.part(SplitName::Test), 0.5).map_err(err)?;
        let last = out.log.epochs.last().unwrap().val.roc_auc;
        Ok((
            out.log.best().val.roc_auc,
            last,
            test.roc_auc,
            started.elapsed().as_secs_f64(),
            out.log.best_epoch,
        ))
    };
    let (val, _, test, secs, epoch) = run(false)?;
    ensure(val > LEARN_MIN_VAL_AUC, || format!("planted val roc-auc {val:.4}"))?;
    ensure(test > LEARN_MIN_TEST_AUC, || format!("planted test roc-auc {test:.4}"))?;
    ensure(secs < LEARN_BUDGET_SECS, || format!("planted run took {secs:.1}s"))?;
    let (_, null_val, null_test, null_secs, _) = run(true)?;
    let in_range = |v: f64| (NULL_AUC_RANGE.0..=NULL_AUC_RANGE.1).contains(&v);
    ensure(in_range(null_val) && in_range(null_test), || {
        format!("shuffled control val {null_val:.4}, test {null_test:.4}")
    })?;
    ensure(null_secs < LEARN_BUDGET_SECS, || format!("control run took {null_secs:.1}s"))?;
    Ok(format!(
        "planted: best val {val:.4} (epoch {epoch}) > {LEARN_MIN_VAL_AUC}, test {test:.4} > {LEARN_MIN_TEST_AUC}, {secs:.1}s; \
         shuffled: final val {null_val:.4}, test {null_test:.4} in {NULL_AUC_RANGE:?}, {null_secs:.1}s"
    ))
}

// 9
fn batching_equivalence() -> Check {
    let d = generate(&SynthConfig::default()).map_err(err)?;
    let cfg = RunConfig::default();
    let p = pipeline::prepare(&d.graph, &d.clusters, &d.embeddings, &cfg).map_err(err)?;
    let tc = TrainConfig {
        batch_size: 256,
        ..cfg.train.clone()
    };
    let params = init_params(3, tc.model_config(p.features.width())).map_err(err)?;
    let x = p.features.data.view();
    let mut worst = 0.0f64;
    let mut one_hop_worst = 0.0f64;
    let batches = make_batches(p.split.part(SplitName::Train), tc.batch_size, tc.seed, 1);
    for b in &batches {
        let (full, _) = batch_step(&params, &p.op, x, b, BatchScope::FullGraph, &tc, None).map_err(err)?;
        let (sub, _) = batch_step(&params, &p.op, x, b, BatchScope::Subgraph { hops: 2 }, &tc, None).map_err(err)?;
        let (one, _) = batch_step(&params, &p.op, x, b, BatchScope::Subgraph { hops: 1 }, &tc, None).map_err(err)?;
        worst = worst.max((full - sub).abs());
        one_hop_worst = one_hop_worst.max((full - one).abs());
    }
    ensure(worst <= BATCH_LOSS_TOL, || format!("max loss difference {worst:e}"))?;
    Ok(format!(
        "{} batches, two-hop max loss difference {worst:.2e} <= {BATCH_LOSS_TOL:e} (one-hop: {one_hop_worst:.2e})",
        batches.len()
    ))
}

fn synth_on_disk(dir: &Path) -> Result<(), String> {
    pipeline::cmd_synth(&SynthConfig::default(), dir).map(|_| ()).map_err(err)
}

fn small_config() -> Result<RunConfig, String> {
    RunConfig::resolve(None, Vec::new(), &[("epochs".into(), PIPELINE_EPOCHS.into())]).map_err(err)
}

fn read(p: &Path) -> Result<Vec<u8>, String> {
    fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

// 10
fn determinism_and_round_trip() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth_on_disk(&a)?;
    synth_on_disk(&b)?;
    let cfg = small_config()?;
    let mut compared = 0;
    for f in ["graph/graph.tsv", "graph/manifest.tsv", CLUSTERS_FILE, "genes.emb", "diseases.emb"] {
        ensure(read(&a.join(f))? == read(&b.join(f))?, || format!("{f} differs"))?;
        compared += 1;
    }
    for root in [&a, &b] {
        pipeline::cmd_split(&root.join("graph"), &root.join(CLUSTERS_FILE), &root.join("split"), &cfg).map_err(err)?;
    }
    for f in ["train.tsv", "val.tsv", "test.tsv", "split.desc", "audit.tsv"] {
        ensure(read(&a.join("split").join(f))? == read(&b.join("split").join(f))?, || format!("split {f} differs"))?;
        compared += 1;
    }
    let inputs = RunInputs {
        graph: a.join("graph"),
        embeddings: EmbeddingFiles::in_dir(&a),
        split: a.join("split"),
    };
    let first = pipeline::cmd_train(&inputs, &a.join("run"), &cfg).map_err(err)?;
    let log1 = read(&a.join("run").join(TRAIN_LOG_FILE))?;
    let ckpt1 = read(&first.checkpoint)?;
    let second = pipeline::cmd_train(&inputs, &a.join("run"), &cfg).map_err(err)?;
    ensure(log1 == read(&a.join("run").join(TRAIN_LOG_FILE))?, || "train log differs".into())?;
    ensure(ckpt1 == read(&second.checkpoint)?, || "checkpoint differs".into())?;
    ensure(first.descriptor == second.descriptor, || "run descriptor differs".into())?;
    compared += 3;

    let val = pipeline::cmd_evaluate(&first.checkpoint, &inputs, SplitName::Val, None).map_err(err)?;
    let logged = first.log.best().val;
    ensure(val == logged, || format!("reloaded val metrics {val:?} vs logged {logged:?}"))?;
    Ok(format!(
        "{compared} artifacts byte-identical across reruns; reloaded checkpoint reproduces val metrics bit for bit (roc-auc {})",
        val.roc_auc
    ))
}

// 11
fn alignment_invariants() -> Check {
    let d = generate(&SynthConfig::default()).map_err(err)?;
    let g = &d.graph;
    let def = align_features(g, &d.embeddings, AlignMode::Default, MissingPolicy::Error).map_err(err)?;
    ensure(def.width() == ALIGNED_DIM, || format!("default width {}", def.width()))?;
    let genes: Vec<usize> = g.nodes_of_kind(NodeKind::Gene).collect();
    let diseases: Vec<usize> = g.nodes_of_kind(NodeKind::Disease).collect();
    let mut products = 0usize;
    for &a in &genes {
        for &b in &diseases {
            let dot = def.data.row(a).dot(&def.data.row(b));
            ensure(dot == 0.0, || format!("gene {a} x disease {b} dot product {dot}"))?;
            products += 1;
        }
    }
    let zero_in = |m: &Array2<f64>, rows: &[usize], cols: std::ops::Range<usize>| {
        rows.iter().all(|&i| cols.clone().all(|j| m[[i, j]] == 0.0))
    };
    ensure(zero_in(&def.data, &genes, GENE_DIM..ALIGNED_DIM), || "gene suffix not zero".into())?;
    ensure(zero_in(&def.data, &diseases, 0..GENE_DIM), || "disease prefix not zero".into())?;

    let abl = align_features(g, &d.embeddings, AlignMode::Ablation, MissingPolicy::Error).map_err(err)?;
    ensure(abl.width() == GENE_DIM, || format!("ablation width {}", abl.width()))?;
    ensure(zero_in(&abl.data, &diseases, DISEASE_DIM..GENE_DIM), || "disease padding not zero".into())?;
    for &i in &diseases {
        let raw = &d.embeddings[i].values;
        ensure(abl.data.row(i).iter().take(DISEASE_DIM).eq(raw.iter()), || format!("disease row {i} not copied"))?;
    }
    for &i in &genes {
        ensure(abl.data.row(i).iter().eq(d.embeddings[i].values.iter()), || format!("gene row {i} not copied"))?;
    }
    Ok(format!(
        "{products} gene x disease dot products exactly 0 at width {ALIGNED_DIM}; ablation rows width {GENE_DIM}, disease [{DISEASE_DIM}, {GENE_DIM}) zero"
    ))
}

// 12
fn ablation_shape() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let root = tmp.path();
    synth_on_disk(root)?;
    let cfg = small_config()?;
    let emb = EmbeddingFiles::in_dir(root);
    let table = pipeline::cmd_ablate(&root.join("graph"), &root.join(CLUSTERS_FILE), &emb, &root.join("ablate"), &cfg)
        .map_err(err)?;
    ensure(table.rows.len() == 4, || format!("{} rows", table.rows.len()))?;
    let text = table.to_tsv();
    ensure(text.lines().count() == 5, || "table is not header + 4 rows".into())?;
    ensure(
        table.rows.iter().all(|r| r.seed == cfg.train.seed && r.split_seed == cfg.split_seed),
        || "rows use different seeds".into(),
    )?;
    for r in &table.rows {
        let [_, gg, dd] = r.train_negative_kinds;
        let unconstrained = r.negative_mode == NegativeMode::Unconstrained;
        ensure(unconstrained == (gg > 0 && dd > 0), || {
            format!("{} row has {gg} GG and {dd} DD negatives", r.negative_mode.as_str())
        })?;
    }

    pipeline::cmd_split(&root.join("graph"), &root.join(CLUSTERS_FILE), &root.join("split"), &cfg).map_err(err)?;
    let inputs = RunInputs {
        graph: root.join("graph"),
        embeddings: emb,
        split: root.join("split"),
    };
    let run = pipeline::cmd_train(&inputs, &root.join("run"), &cfg).map_err(err)?;
    let val = pipeline::cmd_evaluate(&run.checkpoint, &inputs, SplitName::Val, None).map_err(err)?;
    let test = pipeline::cmd_evaluate(&run.checkpoint, &inputs, SplitName::Test, None).map_err(err)?;
    let row = &table.rows[0];
    ensure(
        row.align_mode == AlignMode::Default && row.negative_mode == NegativeMode::Constrained,
        || "first row is not the default configuration".into(),
    )?;
    ensure(row.val == val && row.test == test, || {
        format!("default row {:?}/{:?} vs standalone {val:?}/{test:?}", row.val, row.test)
    })?;
    Ok(format!(
        "4 rows with shared seeds; default row equals standalone run (test roc-auc {})",
        test.roc_auc
    ))
}

fn main() {
    let checks: [Criterion; 12] = [
        ("gradient correctness", gradient_check),
        ("encoder oracle equivalence", encoder_oracle),
        ("normalization oracle", normalization_oracle),
        ("ROC-AUC / PR-AUC oracles", auc_oracles),
        ("loss values", loss_values),
        ("split soundness", split_soundness),
        ("sampler distribution", sampler_distribution),
        ("learnability bar", learnability),
        ("batching equivalence", batching_equivalence),
        ("determinism and round-trip", determinism_and_round_trip),
        ("feature-alignment invariants", alignment_invariants),
        ("ablation harness shape", ablation_shape),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    println!("\nrunning {} acceptance criteria", checks.len());
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
