//! Run configuration and flat key-value descriptors.
//!
//! A [`RunConfig`] is resolved from defaults, then an optional TOML file,
//! then `DGLINK_<KEY>` environment variables, then explicit overrides
//! (command-line flags), each layer replacing the previous one. Unknown keys
//! are rejected at every layer.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::dataset::{NegativeSampler, SplitRatios};
use crate::error::{Error, Result};
use crate::features::{AlignMode, MissingPolicy, ValueSeparator};
use crate::graph::MixingWeights;
use crate::hash::content_hash;
use crate::train::TrainConfig;

pub const ENV_PREFIX: &str = "DGLINK_";

/// Ordered `key = value` record, written one pair per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Descriptor {
    entries: BTreeMap<String, String>,
}

impl Descriptor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let v = value.to_string();
        assert!(!v.contains('\n') && !key.contains(" = "), "descriptor entries must be single-line");
        self.entries.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing descriptor key `{key}`")))?;
        raw.parse()
            .map_err(|e| Error::Config(format!("descriptor key `{key}`: {e}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn extend(&mut self, other: &Descriptor) {
        for (k, v) in other.iter() {
            self.entries.insert(k.to_string(), v.to_string());
        }
    }

    /// Copy with every key prefixed by `prefix.`.
    pub fn prefixed(&self, prefix: &str) -> Descriptor {
        Descriptor {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (format!("{prefix}.{k}"), v.clone()))
                .collect(),
        }
    }

    /// Entries under `prefix.` with the prefix stripped.
    pub fn section(&self, prefix: &str) -> Descriptor {
        let p = format!("{prefix}.");
        Descriptor {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|k| (k.to_string(), v.clone())))
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut d = Descriptor::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Config(format!("descriptor line {}: expected `key = value`", i + 1)))?;
            d.entries.insert(k.to_string(), v.to_string());
        }
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }

    pub fn hash(&self) -> String {
        content_hash([self.to_text().as_bytes()])
    }
}

/// Every knob of the pipeline, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mixing: MixingWeights,
    pub align_mode: AlignMode,
    pub missing: MissingPolicy,
    pub embedding_separator: ValueSeparator,
    pub ratios: SplitRatios,
    pub split_tolerance: f64,
    pub split_seed: u64,
    pub sampler: NegativeSampler,
    pub train: TrainConfig,
    pub checkpoint_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mixing: MixingWeights::uniform(),
            align_mode: AlignMode::Default,
            missing: MissingPolicy::Error,
            embedding_separator: ValueSeparator::Comma,
            ratios: SplitRatios::default(),
            split_tolerance: 0.03,
            split_seed: 0,
            sampler: NegativeSampler::default(),
            train: TrainConfig::default(),
            checkpoint_dir: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "mix_gg",
        "mix_dd",
        "mix_gd",
        "align_mode",
        "missing",
        "embedding_separator",
        "ratio_train",
        "ratio_val",
        "ratio_test",
        "split_tolerance",
        "split_seed",
        "negative_mode",
        "degree_aware",
        "alpha",
        "degree_source",
        "learning_rate",
        "epochs",
        "batch_size",
        "class_weight_pos",
        "class_weight_neg",
        "weight_decay",
        "dropout",
        "hidden_dim",
        "embed_dim",
        "final_activation",
        "seed",
        "resample_train_negatives",
        "full_graph_batching",
        "one_hop_subgraph",
        "threshold",
        "checkpoint_dir",
    ];

    /// Sets one key from its string form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "mix_gg" => self.mixing.gg = parse_value(key, value)?,
            "mix_dd" => self.mixing.dd = parse_value(key, value)?,
            "mix_gd" => self.mixing.gd = parse_value(key, value)?,
            "align_mode" => self.align_mode = parse_value(key, value)?,
            "missing" => self.missing = parse_value(key, value)?,
            "embedding_separator" => self.embedding_separator = parse_value(key, value)?,
            "ratio_train" => self.ratios.train = parse_value(key, value)?,
            "ratio_val" => self.ratios.val = parse_value(key, value)?,
            "ratio_test" => self.ratios.test = parse_value(key, value)?,
            "split_tolerance" => self.split_tolerance = parse_value(key, value)?,
            "split_seed" => self.split_seed = parse_value(key, value)?,
            "negative_mode" => self.sampler.mode = parse_value(key, value)?,
            "degree_aware" => self.sampler.degree_aware = parse_value(key, value)?,
            "alpha" => self.sampler.alpha = parse_value(key, value)?,
            "degree_source" => self.sampler.degree_source = parse_value(key, value)?,
            "learning_rate" => t.learning_rate = parse_value(key, value)?,
            "epochs" => t.epochs = parse_value(key, value)?,
            "batch_size" => t.batch_size = parse_value(key, value)?,
            "class_weight_pos" => t.class_weight_pos = parse_value(key, value)?,
            "class_weight_neg" => t.class_weight_neg = parse_value(key, value)?,
            "weight_decay" => t.weight_decay = parse_value(key, value)?,
            "dropout" => t.dropout = parse_value(key, value)?,
            "hidden_dim" => t.hidden_dim = parse_value(key, value)?,
            "embed_dim" => t.embed_dim = parse_value(key, value)?,
            "final_activation" => t.final_activation = parse_value(key, value)?,
            "seed" => t.seed = parse_value(key, value)?,
            "resample_train_negatives" => t.resample_train_negatives = parse_value(key, value)?,
            "full_graph_batching" => t.full_graph_batching = parse_value(key, value)?,
            "one_hop_subgraph" => t.one_hop_subgraph = parse_value(key, value)?,
            "threshold" => t.threshold = parse_value(key, value)?,
            "checkpoint_dir" => self.checkpoint_dir = Some(value.to_string()),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// All resolved keys, in [`Self::KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let s = &self.sampler;
        vec![
            ("mix_gg", self.mixing.gg.to_string()),
            ("mix_dd", self.mixing.dd.to_string()),
            ("mix_gd", self.mixing.gd.to_string()),
            ("align_mode", self.align_mode.as_str().into()),
            ("missing", self.missing.as_str().into()),
            (
                "embedding_separator",
                match self.embedding_separator {
                    ValueSeparator::Comma => "comma",
                    ValueSeparator::Whitespace => "whitespace",
                }
                .into(),
            ),
            ("ratio_train", self.ratios.train.to_string()),
            ("ratio_val", self.ratios.val.to_string()),
            ("ratio_test", self.ratios.test.to_string()),
            ("split_tolerance", self.split_tolerance.to_string()),
            ("split_seed", self.split_seed.to_string()),
            ("negative_mode", s.mode.as_str().into()),
            ("degree_aware", s.degree_aware.to_string()),
            ("alpha", s.alpha.to_string()),
            ("degree_source", s.degree_source.as_str().into()),
            ("learning_rate", t.learning_rate.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("class_weight_pos", t.class_weight_pos.to_string()),
            ("class_weight_neg", t.class_weight_neg.to_string()),
            ("weight_decay", t.weight_decay.to_string()),
            ("dropout", t.dropout.to_string()),
            ("hidden_dim", t.hidden_dim.to_string()),
            ("embed_dim", t.embed_dim.to_string()),
            ("final_activation", t.final_activation.as_str().into()),
            ("seed", t.seed.to_string()),
            ("resample_train_negatives", t.resample_train_negatives.to_string()),
            ("full_graph_batching", t.full_graph_batching.to_string()),
            ("one_hop_subgraph", t.one_hop_subgraph.to_string()),
            ("threshold", t.threshold.to_string()),
            ("checkpoint_dir", self.checkpoint_dir.clone().unwrap_or_default()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.mixing.validate()?;
        self.ratios.validate()?;
        if !(0.0..=1.0).contains(&self.sampler.alpha) {
            return Err(Error::Config(format!("alpha must be in [0,1], got {}", self.sampler.alpha)));
        }
        if self.split_tolerance.is_nan() || self.split_tolerance < 0.0 {
            return Err(Error::Config("split_tolerance must be non-negative".into()));
        }
        self.train.validate()
    }

    /// Applies a flat TOML table. Nested tables are rejected.
    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("config file: {e}")))?;
        for (k, v) in table {
            let s = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => return Err(Error::Config(format!("`{k}`: unsupported value {other}"))),
            };
            self.set(&k, &s)?;
        }
        Ok(())
    }

    /// Applies `DGLINK_<KEY>` variables for known keys. Only variables that
    /// map onto a known key are consulted.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = rest.to_ascii_lowercase();
            if Self::KEYS.contains(&key.as_str()) {
                self.set(&key, &value)?;
            }
        }
        Ok(())
    }

    /// Defaults < file < env < overrides, then validation.
    pub fn resolve(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(p) = file {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            cfg.apply_toml(&text)?;
        }
        cfg.apply_env(env)?;
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn descriptor(&self) -> Descriptor {
        let mut d = Descriptor::new();
        for (k, v) in self.entries() {
            d.set(k, v);
        }
        d
    }

    pub fn content_hash(&self) -> String {
        self.descriptor().hash()
    }

    /// Rebuilds a config from a descriptor written by [`Self::descriptor`].
    pub fn from_descriptor(d: &Descriptor) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in d.iter() {
            if k == "checkpoint_dir" && v.is_empty() {
                continue;
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::NegativeMode;

    #[test]
    fn every_key_round_trips() {
        let d = RunConfig::default().descriptor();
        let keys: Vec<&str> = d.iter().map(|(k, _)| k).collect();
        let mut expected = RunConfig::KEYS.to_vec();
        expected.sort_unstable();
        assert_eq!(keys, expected);
        assert_eq!(RunConfig::from_descriptor(&d).unwrap(), RunConfig::default());
    }

    #[test]
    fn layer_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, "epochs = 7\nlearning_rate = 0.01\nnegative_mode = \"unconstrained\"\n").unwrap();
        let env = vec![
            ("DGLINK_EPOCHS".to_string(), "9".to_string()),
            ("DGLINK_CHECKPOINT_DIR".to_string(), "/tmp/ck".to_string()),
            ("DGLINK_LOG".to_string(), "ignored".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let cfg = RunConfig::resolve(Some(&p), env, &[("epochs".into(), "11".into())]).unwrap();
        assert_eq!(cfg.train.epochs, 11);
        assert_eq!(cfg.train.learning_rate, 0.01);
        assert_eq!(cfg.sampler.mode, NegativeMode::Unconstrained);
        assert_eq!(cfg.checkpoint_dir.as_deref(), Some("/tmp/ck"));
    }

    #[test]
    fn unknown_and_invalid_keys_fail() {
        assert!(RunConfig::default().set("epoch", "3").is_err());
        assert!(RunConfig::default().apply_toml("bogus = 1").is_err());
        assert!(RunConfig::default().apply_toml("[section]\nepochs = 1").is_err());
        assert!(RunConfig::default().set("epochs", "many").is_err());
        let r = RunConfig::resolve(None, vec![], &[("mix_gg".into(), "0.9".into())]);
        assert!(matches!(r, Err(Error::InvalidMixingWeights(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.set("seed", "5").unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), RunConfig::default().content_hash());
    }

    #[test]
    fn descriptor_text_round_trip() {
        let mut d = Descriptor::new();
        d.set("b", 2);
        d.set("a", "x y");
        assert_eq!(d.to_text(), "a = x y\nb = 2\n");
        assert_eq!(Descriptor::parse_text(&d.to_text()).unwrap(), d);
        assert_eq!(d.prefixed("p").section("p"), d);
    }
}
