//! Classification and ranking metrics over scored pairs.
//!
//! Predictions use `z >= threshold` (ties count as positive). ROC-AUC is the
//! Mann-Whitney statistic with ties contributing one half, accumulated in
//! integer half-units so it is exact. PR-AUC is the step-wise sum
//! `Σ (R_k − R_{k−1}) · P_k` over descending distinct thresholds, anchored at
//! recall 0; no linear interpolation between operating points.

use std::cmp::Ordering;

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Parallel probabilities and binary labels.
#[derive(Debug, Clone, Copy)]
pub struct ScoredSet<'a> {
    pub scores: &'a [f64],
    pub labels: &'a [u8],
}

impl<'a> ScoredSet<'a> {
    pub fn new(scores: &'a [f64], labels: &'a [u8]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::ShapeError(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        Ok(Self { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Indices sorted by descending score.
    fn order_desc(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].partial_cmp(&self.scores[a]).unwrap_or(Ordering::Equal));
        idx
    }

    /// `(positives, negatives)` per distinct score, in descending score order.
    fn tie_groups(&self) -> Vec<(usize, usize)> {
        let order = self.order_desc();
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut last: Option<f64> = None;
        for i in order {
            let s = self.scores[i];
            if last != Some(s) {
                groups.push((0, 0));
                last = Some(s);
            }
            let g = groups.last_mut().unwrap();
            if self.labels[i] == 1 {
                g.0 += 1;
            } else {
                g.1 += 1;
            }
        }
        groups
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdMetrics {
    pub acc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn threshold_metrics(set: ScoredSet<'_>, threshold: f64) -> Result<ThresholdMetrics> {
    if set.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&z, &y) in set.scores.iter().zip(set.labels) {
        match (z >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ThresholdMetrics {
        acc: ratio(tp + tn, set.len()),
        f1,
        precision,
        recall,
        specificity: ratio(tn, tn + fp),
    })
}

pub fn roc_auc(set: ScoredSet<'_>) -> Result<f64> {
    let p = set.positives();
    let n = set.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClassInput);
    }
    // Twice the Mann-Whitney U, so half-credit ties stay integral.
    let mut twice_u: u128 = 0;
    let mut negatives_below = n;
    for (gp, gn) in set.tie_groups() {
        negatives_below -= gn;
        twice_u += (gp as u128) * (2 * negatives_below as u128 + gn as u128);
    }
    Ok(twice_u as f64 / (2 * p as u128 * n as u128) as f64)
}

pub fn pr_auc(set: ScoredSet<'_>) -> Result<f64> {
    let p = set.positives();
    if p == 0 {
        return Err(Error::SingleClassInput);
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for (gp, gn) in set.tie_groups() {
        tp += gp;
        fp += gn;
        let recall = tp as f64 / p as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// One evaluation pass, in the column order Acc, F1, Prec, Rec, ROC-AUC,
/// PR-AUC, Spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub acc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub specificity: f64,
    pub threshold: f64,
}

impl MetricReport {
    pub const HEADER: &'static str = "acc\tf1\tprec\trec\troc_auc\tpr_auc\tspec";

    pub fn compute(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Self> {
        let set = ScoredSet::new(scores, labels)?;
        let t = threshold_metrics(set, threshold)?;
        Ok(Self {
            acc: t.acc,
            f1: t.f1,
            precision: t.precision,
            recall: t.recall,
            roc_auc: roc_auc(set)?,
            pr_auc: pr_auc(set)?,
            specificity: t.specificity,
            threshold,
        })
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.acc,
            self.f1,
            self.precision,
            self.recall,
            self.roc_auc,
            self.pr_auc,
            self.specificity,
        ]
    }

    /// Tab-separated values with shortest round-trip formatting.
    pub fn to_tsv_row(&self) -> String {
        self.values().map(|v| v.to_string()).join("\t")
    }
}
