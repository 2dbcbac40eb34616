//! Mini-batch training with the weighted logistic loss and AdamW, plus
//! evaluation and best-validation checkpoint selection.

use std::collections::HashMap;
use std::time::Instant;

use log::{debug, info};
use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;

use crate::dataset::{sample_negatives, EdgeSplit, LabeledPair, SplitName};
use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, HeteroGraph, PropagationOperator};
use crate::metrics::MetricReport;
use crate::model::{backward, encode, init_params, predict, FinalActivation, ModelConfig, ModelParams, ParamGrads};
use crate::rng;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// `w1`, weight on positive pairs.
    pub class_weight_pos: f64,
    /// `w0`, weight on negative pairs.
    pub class_weight_neg: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub final_activation: FinalActivation,
    pub seed: u64,
    pub resample_train_negatives: bool,
    /// Run every batch on the whole graph instead of its induced subgraph.
    pub full_graph_batching: bool,
    /// Induced subgraphs hold batch endpoints and their direct neighbours
    /// only, instead of the two-hop closure.
    pub one_hop_subgraph: bool,
    /// Operating threshold for the threshold metrics.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 512,
            class_weight_pos: 1.0,
            class_weight_neg: 1.0,
            weight_decay: 0.01,
            dropout: 0.5,
            hidden_dim: crate::model::HIDDEN_DIM,
            embed_dim: crate::model::EMBED_DIM,
            final_activation: FinalActivation::Relu,
            seed: 0,
            resample_train_negatives: false,
            full_graph_batching: false,
            one_hop_subgraph: false,
            threshold: crate::metrics::DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.class_weight_pos >= 0.0 && self.class_weight_neg >= 0.0) {
            return bad("class weights must be non-negative");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight_decay must be non-negative");
        }
        self.model_config(1).validate()
    }

    pub fn model_config(&self, in_dim: usize) -> ModelConfig {
        ModelConfig {
            in_dim,
            hidden_dim: self.hidden_dim,
            embed_dim: self.embed_dim,
            dropout: self.dropout,
            final_activation: self.final_activation,
        }
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Weighted logistic loss on logits. Returns the batch mean and the per-pair
/// derivative `∂ℓ/∂s` (not divided by the batch size).
pub fn loss(scores: &[f64], labels: &[u8], w0: f64, w1: f64) -> Result<(f64, Vec<f64>)> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeError(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (&s, &y) in scores.iter().zip(labels) {
        let sig = crate::model::sigmoid(s);
        if y == 1 {
            total += w1 * softplus(-s);
            grad.push(w1 * (sig - 1.0));
        } else {
            total += w0 * softplus(s);
            grad.push(w0 * sig);
        }
    }
    Ok((total / scores.len() as f64, grad))
}

/// First and second moments for W0 and W1.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: ParamGrads,
    pub v: ParamGrads,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: ParamGrads::zeros_like(params),
            v: ParamGrads::zeros_like(params),
            step: 0,
        }
    }
}

/// Learning rate, decay and bias corrections for one step.
#[derive(Clone, Copy)]
struct StepScale {
    lr: f64,
    decay: f64,
    bc1: f64,
    bc2: f64,
}

fn adamw_update(w: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>, k: StepScale) {
    Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
        *w *= 1.0 - k.lr * k.decay;
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / k.bc1;
        let v_hat = *v / k.bc2;
        *w -= k.lr * m_hat / (v_hat.sqrt() + EPSILON);
    });
}

/// One AdamW step with bias-corrected moments and decoupled weight decay.
/// Nothing is modified when a gradient is non-finite.
pub fn adamw_step(params: &mut ModelParams, grads: &ParamGrads, state: &mut OptimizerState, cfg: &TrainConfig) -> Result<()> {
    if grads.w0.dim() != params.w0.dim() || grads.w1.dim() != params.w1.dim() {
        return Err(Error::ShapeError("gradient shapes differ from parameters".into()));
    }
    if !grads.is_finite() {
        return Err(Error::NonFiniteGradient { epoch: 0 });
    }
    state.step += 1;
    let t = state.step as i32;
    let k = StepScale {
        lr: cfg.learning_rate,
        decay: cfg.weight_decay,
        bc1: 1.0 - BETA1.powi(t),
        bc2: 1.0 - BETA2.powi(t),
    };
    adamw_update(&mut params.w0, &grads.w0, &mut state.m.w0, &mut state.v.w0, k);
    adamw_update(&mut params.w1, &grads.w1, &mut state.m.w1, &mut state.v.w1, k);
    Ok(())
}

/// Shuffles `pairs` with a stream keyed by `(seed, epoch)` and chunks them.
pub fn make_batches(pairs: &[LabeledPair], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<LabeledPair>> {
    let mut order = pairs.to_vec();
    order.shuffle(&mut rng::stream(seed, &format!("batches/epoch{epoch}")));
    order.chunks(batch_size.max(1)).map(<[_]>::to_vec).collect()
}

/// A node subset with the propagation operator restricted to it.
#[derive(Debug, Clone)]
pub struct Subgraph {
    /// Global node indices, ascending; local index `k` is `nodes[k]`.
    pub nodes: Vec<usize>,
    pub op: CsrMatrix,
    local: HashMap<usize, usize>,
}

impl Subgraph {
    pub fn local(&self, global: usize) -> Option<usize> {
        self.local.get(&global).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Batch endpoints expanded by `hops` rounds of neighbours under the mixed
/// operator. Two hops make endpoint embeddings of a two-layer encoder equal
/// their full-graph values.
pub fn induced_subgraph(op: &PropagationOperator, endpoints: impl IntoIterator<Item = usize>, hops: usize) -> Subgraph {
    let mut inside = vec![false; op.dim()];
    let mut frontier: Vec<usize> = Vec::new();
    for e in endpoints {
        if !inside[e] {
            inside[e] = true;
            frontier.push(e);
        }
    }
    for _ in 0..hops {
        let mut next = Vec::new();
        for &n in &frontier {
            for m in op.neighbors(n) {
                if !inside[m] {
                    inside[m] = true;
                    next.push(m);
                }
            }
        }
        frontier = next;
    }
    let nodes: Vec<usize> = (0..op.dim()).filter(|&i| inside[i]).collect();
    let local = nodes.iter().enumerate().map(|(k, &g)| (g, k)).collect();
    Subgraph {
        op: op.matrix().restrict(&nodes),
        nodes,
        local,
    }
}

pub fn batch_endpoints(batch: &[LabeledPair]) -> impl Iterator<Item = usize> + '_ {
    batch.iter().flat_map(|p| [p.u, p.v])
}

/// Where a batch's forward pass runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchScope {
    FullGraph,
    Subgraph { hops: usize },
}

impl BatchScope {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        if cfg.full_graph_batching {
            BatchScope::FullGraph
        } else if cfg.one_hop_subgraph {
            BatchScope::Subgraph { hops: 1 }
        } else {
            BatchScope::Subgraph { hops: 2 }
        }
    }
}

/// Forward and backward over one batch. Returns the mean batch loss and the
/// gradients of that mean. Dropout is active iff `dropout_seed` is given.
pub fn batch_step(
    params: &ModelParams,
    op: &PropagationOperator,
    features: ArrayView2<'_, f64>,
    batch: &[LabeledPair],
    scope: BatchScope,
    cfg: &TrainConfig,
    dropout_seed: Option<u64>,
) -> Result<(f64, ParamGrads)> {
    let labels: Vec<u8> = batch.iter().map(|p| p.label).collect();
    let run = |op: &CsrMatrix, x: ArrayView2<'_, f64>, pairs: Vec<(usize, usize)>| -> Result<(f64, ParamGrads)> {
        let mut trace = encode(params, op, x, dropout_seed.is_some(), dropout_seed.unwrap_or(0))?;
        let decoded = trace.decode(&pairs)?;
        let (mean, mut grad) = loss(&decoded.scores, &labels, cfg.class_weight_neg, cfg.class_weight_pos)?;
        let n = grad.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((mean, backward(&trace, &grad)?))
    };
    match scope {
        BatchScope::FullGraph => run(op.matrix(), features, batch.iter().map(|p| (p.u, p.v)).collect()),
        BatchScope::Subgraph { hops } => {
            let sub = induced_subgraph(op, batch_endpoints(batch), hops);
            let x = features.select(Axis(0), &sub.nodes);
            let pairs = batch
                .iter()
                .map(|p| (sub.local(p.u).unwrap(), sub.local(p.v).unwrap()))
                .collect();
            run(&sub.op, x.view(), pairs)
        }
    }
}

/// Eval-mode probabilities for `pairs` on the whole graph.
pub fn score_pairs(
    params: &ModelParams,
    op: &PropagationOperator,
    features: ArrayView2<'_, f64>,
    pairs: &[LabeledPair],
) -> Result<Vec<f64>> {
    let idx: Vec<(usize, usize)> = pairs.iter().map(|p| (p.u, p.v)).collect();
    Ok(predict(params, op.matrix(), features, &idx)?.probs)
}

pub fn evaluate(
    params: &ModelParams,
    op: &PropagationOperator,
    features: ArrayView2<'_, f64>,
    pairs: &[LabeledPair],
    threshold: f64,
) -> Result<MetricReport> {
    let probs = score_pairs(params, op, features, pairs)?;
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    MetricReport::compute(&probs, &labels, threshold)
}

/// Eval-mode mean loss over `pairs` on the whole graph.
pub fn eval_loss(
    params: &ModelParams,
    op: &PropagationOperator,
    features: ArrayView2<'_, f64>,
    pairs: &[LabeledPair],
    cfg: &TrainConfig,
) -> Result<f64> {
    let idx: Vec<(usize, usize)> = pairs.iter().map(|p| (p.u, p.v)).collect();
    let scores = predict(params, op.matrix(), features, &idx)?.scores;
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    Ok(loss(&scores, &labels, cfg.class_weight_neg, cfg.class_weight_pos)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val: MetricReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch of the selected checkpoint.
    pub best_epoch: usize,
    pub wall_time_secs: f64,
}

impl TrainLog {
    pub const HEADER: &'static str = "epoch\tloss\tval_acc\tval_f1\tval_prec\tval_rec\tval_rocauc\tval_prauc\tval_spec";

    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    /// Per-epoch rows. Wall time is not included.
    pub fn to_tsv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.epochs {
            s.push_str(&format!("{}\t{}\t{}\n", r.epoch, r.loss, r.val.to_tsv_row()));
        }
        s
    }
}

/// Everything training reads.
#[derive(Debug, Clone, Copy)]
pub struct TrainInputs<'a> {
    /// Full graph, for collision checks when resampling negatives.
    pub graph: &'a HeteroGraph,
    /// Operator over the message-passing graph.
    pub op: &'a PropagationOperator,
    pub features: ArrayView2<'a, f64>,
    pub split: &'a EdgeSplit,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: ModelParams,
    pub log: TrainLog,
}

pub fn train(inputs: TrainInputs<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let TrainInputs {
        graph,
        op,
        features,
        split,
    } = inputs;
    if op.dim() != features.nrows() || graph.node_count() != features.nrows() {
        return Err(Error::ShapeError(format!(
            "graph has {} nodes, operator {}, features {}",
            graph.node_count(),
            op.dim(),
            features.nrows()
        )));
    }
    let started = Instant::now();
    let mut params = init_params(cfg.seed, cfg.model_config(features.ncols()))?;
    let mut state = OptimizerState::new(&params);
    let scope = BatchScope::from_config(cfg);
    let train_positives: Vec<LabeledPair> = split.positives(SplitName::Train).copied().collect();
    let val = split.part(SplitName::Val);

    let mut log = TrainLog {
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        wall_time_secs: 0.0,
    };
    let mut best: Option<(f64, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        let pairs: Vec<LabeledPair> = if cfg.resample_train_negatives && epoch > 1 {
            let mut r = rng::stream(cfg.seed, &format!("negatives/train/epoch{epoch}"));
            let neg = sample_negatives(graph, &train_positives, &split.sampler, &mut r)?;
            train_positives.iter().copied().chain(neg).collect()
        } else {
            split.part(SplitName::Train).to_vec()
        };
        let batches = make_batches(&pairs, cfg.batch_size, cfg.seed, epoch);
        let mut loss_sum = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let dropout_seed = rng::derive_seed(cfg.seed, &format!("dropout/epoch{epoch}/batch{b}"));
            let (batch_loss, grads) = batch_step(&params, op, features, batch, scope, cfg, Some(dropout_seed))?;
            adamw_step(&mut params, &grads, &mut state, cfg).map_err(|e| match e {
                Error::NonFiniteGradient { .. } => Error::NonFiniteGradient { epoch },
                other => other,
            })?;
            loss_sum += batch_loss * batch.len() as f64;
        }
        let epoch_loss = if pairs.is_empty() { 0.0 } else { loss_sum / pairs.len() as f64 };
        let report = evaluate(&params, op, features, val, cfg.threshold)?;
        debug!("epoch {epoch}: loss {epoch_loss:.5} val roc-auc {:.4}", report.roc_auc);
        if best.as_ref().is_none_or(|(auc, _)| report.roc_auc > *auc) {
            best = Some((report.roc_auc, params.clone()));
            log.best_epoch = epoch;
        }
        log.epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            val: report,
        });
    }
    log.wall_time_secs = started.elapsed().as_secs_f64();
    let best_record = log.best();
    info!(
        "best epoch {} of {}: val roc-auc {:.4}",
        log.best_epoch,
        cfg.epochs,
        best_record.val.roc_auc
    );
    Ok(TrainOutcome {
        best: best.expect("at least one epoch").1,
        log,
    })
}
