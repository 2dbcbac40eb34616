//! Two-layer GCN encoder with a Hadamard-sum decoder, and its exact gradients.
//!
//! ```text
//! H1 = drop(ReLU(Ã X W0))
//! Z  = drop(act(Ã H1 W1))         act = ReLU (default) or identity
//! s_ij = Σ_k Z[i,k] Z[j,k],  z_ij = sigmoid(s_ij)
//! ```
//!
//! Dropout is inverted (survivors scaled by `1/(1-p)`) and only active in
//! training mode. There are no bias terms.

mod checkpoint;

use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

pub const HIDDEN_DIM: usize = 112;
pub const EMBED_DIM: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FinalActivation {
    #[default]
    Relu,
    None,
}

impl FinalActivation {
    pub fn as_str(self) -> &'static str {
        match self {
            FinalActivation::Relu => "relu",
            FinalActivation::None => "none",
        }
    }
}

impl FromStr for FinalActivation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Self::Relu),
            "none" => Ok(Self::None),
            o => Err(format!("unknown final activation `{o}` (relu|none)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub dropout: f64,
    pub final_activation: FinalActivation,
}

impl ModelConfig {
    pub fn new(in_dim: usize) -> Self {
        Self {
            in_dim,
            hidden_dim: HIDDEN_DIM,
            embed_dim: EMBED_DIM,
            dropout: 0.5,
            final_activation: FinalActivation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0,1), got {}", self.dropout)));
        }
        if self.in_dim == 0 || self.hidden_dim == 0 || self.embed_dim == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

/// Glorot-uniform bound for a `fan_in x fan_out` matrix.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot(rows: usize, cols: usize, seed: u64, name: &str) -> Array2<f64> {
    let bound = glorot_bound(rows, cols);
    let mut r = rng::stream(seed, name);
    Array2::from_shape_fn((rows, cols), |_| r.random_range(-bound..=bound))
}

pub fn init_params(seed: u64, config: ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    Ok(ModelParams {
        config,
        w0: glorot(config.in_dim, config.hidden_dim, seed, "init/w0"),
        w1: glorot(config.hidden_dim, config.embed_dim, seed, "init/w1"),
    })
}

impl ModelParams {
    pub fn is_finite(&self) -> bool {
        self.w0.iter().chain(self.w1.iter()).all(|v| v.is_finite())
    }
}

/// Inverted-dropout scale factors: `0` or `1/(1-p)` per entry.
fn dropout_mask(shape: (usize, usize), p: f64, seed: u64, name: &str) -> Array2<f64> {
    let mut r = rng::stream(seed, name);
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_fn(shape, |_| if r.random::<f64>() < p { 0.0 } else { keep })
}

/// Intermediates of one forward pass, retained for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace<'a> {
    params: &'a ModelParams,
    op: &'a CsrMatrix,
    x: ArrayView2<'a, f64>,
    /// `Ã X W0` (layer-1 pre-activation).
    pub pre1: Array2<f64>,
    /// Layer-1 output after ReLU and dropout.
    pub h1: Array2<f64>,
    /// `Ã H1 W1` (layer-2 pre-activation).
    pub pre2: Array2<f64>,
    /// Node embeddings.
    pub z: Array2<f64>,
    pub mask1: Option<Array2<f64>>,
    pub mask2: Option<Array2<f64>>,
    pairs: Option<Vec<(usize, usize)>>,
}

impl<'a> ForwardTrace<'a> {
    pub fn embeddings(&self) -> &Array2<f64> {
        &self.z
    }

    /// Scores `pairs` against this trace's embeddings and records them for
    /// the backward pass.
    pub fn decode(&mut self, pairs: &[(usize, usize)]) -> Result<Decoded> {
        let out = decode_pairs(&self.z, pairs)?;
        self.pairs = Some(pairs.to_vec());
        Ok(out)
    }

    pub fn pairs(&self) -> Option<&[(usize, usize)]> {
        self.pairs.as_deref()
    }
}

/// Runs the encoder. With `training`, dropout masks are drawn from streams
/// derived from `rng_seed`; otherwise the pass is deterministic.
pub fn encode<'a>(
    params: &'a ModelParams,
    op: &'a CsrMatrix,
    x: ArrayView2<'a, f64>,
    training: bool,
    rng_seed: u64,
) -> Result<ForwardTrace<'a>> {
    let cfg = &params.config;
    if x.ncols() != params.w0.nrows() {
        return Err(Error::ShapeError(format!(
            "feature width {} does not match W0 input width {}",
            x.ncols(),
            params.w0.nrows()
        )));
    }
    if op.shape() != (x.nrows(), x.nrows()) {
        return Err(Error::ShapeError(format!(
            "operator {:?} does not match {} nodes",
            op.shape(),
            x.nrows()
        )));
    }
    if params.w1.nrows() != params.w0.ncols() {
        return Err(Error::ShapeError("W1 rows must equal W0 columns".into()));
    }
    let n = x.nrows();
    let use_dropout = training && cfg.dropout > 0.0;

    let pre1 = op.mul_dense(&x.dot(&params.w0).view());
    let mut h1 = pre1.mapv(|v| v.max(0.0));
    let mask1 = use_dropout.then(|| dropout_mask((n, params.w0.ncols()), cfg.dropout, rng_seed, "dropout/layer1"));
    if let Some(m) = &mask1 {
        h1 *= m;
    }

    let pre2 = op.mul_dense(&h1.dot(&params.w1).view());
    let mut z = match cfg.final_activation {
        FinalActivation::Relu => pre2.mapv(|v| v.max(0.0)),
        FinalActivation::None => pre2.clone(),
    };
    let mask2 = use_dropout.then(|| dropout_mask((n, params.w1.ncols()), cfg.dropout, rng_seed, "dropout/layer2"));
    if let Some(m) = &mask2 {
        z *= m;
    }

    Ok(ForwardTrace {
        params,
        op,
        x,
        pre1,
        h1,
        pre2,
        z,
        mask1,
        mask2,
        pairs: None,
    })
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Logits `s`.
    pub scores: Vec<f64>,
    /// Probabilities `sigmoid(s)`.
    pub probs: Vec<f64>,
}

pub fn decode_pairs(z: &Array2<f64>, pairs: &[(usize, usize)]) -> Result<Decoded> {
    let n = z.nrows();
    let mut scores = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        for index in [i, j] {
            if index >= n {
                return Err(Error::IndexError { index, len: n });
            }
        }
        scores.push(z.row(i).dot(&z.row(j)));
    }
    let probs = scores.iter().map(|&s| sigmoid(s)).collect();
    Ok(Decoded { scores, probs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            w0: Array2::zeros(params.w0.raw_dim()),
            w1: Array2::zeros(params.w1.raw_dim()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w0.iter().chain(self.w1.iter()).all(|v| v.is_finite())
    }
}

/// Gradients of `L = Σ_p upstream[p] · s_p` with respect to W0 and W1, for the
/// pairs recorded by [`ForwardTrace::decode`]. Dropout masks are replayed
/// from the trace.
pub fn backward(trace: &ForwardTrace<'_>, upstream: &[f64]) -> Result<ParamGrads> {
    let pairs = trace.pairs.as_ref().ok_or(Error::StaleTrace)?;
    if pairs.len() != upstream.len() {
        return Err(Error::ShapeError(format!(
            "{} upstream gradients for {} pairs",
            upstream.len(),
            pairs.len()
        )));
    }
    let params = trace.params;
    let op = trace.op;

    let mut dz = Array2::<f64>::zeros(trace.z.raw_dim());
    for (&(i, j), &g) in pairs.iter().zip(upstream) {
        if g == 0.0 {
            continue;
        }
        let zi = trace.z.row(i).to_owned();
        let zj = trace.z.row(j).to_owned();
        dz.row_mut(i).scaled_add(g, &zj);
        dz.row_mut(j).scaled_add(g, &zi);
    }

    // Through dropout and the final activation.
    let mut dpre2 = dz;
    if let Some(m) = &trace.mask2 {
        dpre2 *= m;
    }
    if params.config.final_activation == FinalActivation::Relu {
        Zip::from(&mut dpre2).and(&trace.pre2).for_each(|d, &p| {
            if p <= 0.0 {
                *d = 0.0;
            }
        });
    }
    // pre2 = Ã (H1 W1)
    let d_h1w1 = op.transpose_mul_dense(&dpre2.view());
    let gw1 = trace.h1.t().dot(&d_h1w1);
    let mut dpre1 = d_h1w1.dot(&params.w1.t());
    if let Some(m) = &trace.mask1 {
        dpre1 *= m;
    }
    Zip::from(&mut dpre1).and(&trace.pre1).for_each(|d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });
    // pre1 = Ã (X W0)
    let d_xw0 = op.transpose_mul_dense(&dpre1.view());
    let gw0 = trace.x.t().dot(&d_xw0);
    Ok(ParamGrads { w0: gw0, w1: gw1 })
}

/// Eval-mode probabilities for `pairs` on the given operator and features.
pub fn predict(params: &ModelParams, op: &CsrMatrix, x: ArrayView2<'_, f64>, pairs: &[(usize, usize)]) -> Result<Decoded> {
    let trace = encode(params, op, x, false, 0)?;
    decode_pairs(&trace.z, pairs)
}
