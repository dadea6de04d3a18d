//! Run configuration: model dimensions, graph sparsification, training
//! hyperparameters, and ablation variants.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Graph construction settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Minimum cosine similarity for a tweet-tweet edge.
    pub sim_threshold: f64,
    /// Per-tweet cap on similarity neighbors (an edge survives if either
    /// endpoint keeps it).
    pub topk: usize,
    /// Disable sparsification entirely: every same-family pair gets an edge
    /// regardless of similarity, reproducing the all-pairs construction.
    pub exact_paper_mode: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            sim_threshold: 0.5,
            topk: 10,
            exact_paper_mode: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserNodeInit {
    /// User nodes start from the trainable user embedding row.
    Uf,
    /// User nodes start from the mean of the user-guided representations of
    /// the user's training posts.
    MeanUga,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Softmax,
    Sigmoid,
}

/// Which attention mechanisms the model keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttnVariant {
    /// No attention anywhere: guided pooling and the word-level tweet-node
    /// pooling are all replaced by masked means.
    None,
    LgaOnly,
    UgaOnly,
    Full,
}

impl AttnVariant {
    pub fn has_lga(&self) -> bool {
        matches!(self, AttnVariant::LgaOnly | AttnVariant::Full)
    }

    pub fn has_uga(&self) -> bool {
        matches!(self, AttnVariant::UgaOnly | AttnVariant::Full)
    }
}

/// Which of the two big components the model keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentVariant {
    /// Feature interaction only: refinement (guided attention) removed.
    FiOnly,
    /// Feature refinement only: the graph is removed and the fused tweet
    /// representation uses the word-pooled feature in place of the graph
    /// embedding.
    FrOnly,
    Full,
}

impl ComponentVariant {
    pub fn has_graph(&self) -> bool {
        matches!(self, ComponentVariant::FiOnly | ComponentVariant::Full)
    }

    pub fn has_refinement(&self) -> bool {
        matches!(self, ComponentVariant::FrOnly | ComponentVariant::Full)
    }
}

/// One model variant: the full system or one ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub attention: AttnVariant,
    pub component: ComponentVariant,
}

impl Variant {
    pub fn full() -> Self {
        Variant {
            attention: AttnVariant::Full,
            component: ComponentVariant::Full,
        }
    }

    /// The seven standard ablation rows, attention table first. The full
    /// model appears twice: closing the attention rows as UGA+LGA and the
    /// component rows as FR+FI.
    pub fn standard_ablations() -> Vec<(String, Variant)> {
        ["NA", "LGA", "UGA", "UGA+LGA", "FI", "FR", "FR+FI"]
            .iter()
            .map(|label| (label.to_string(), Variant::parse(label).unwrap()))
            .collect()
    }

    pub fn label(&self) -> String {
        match (self.attention, self.component) {
            (AttnVariant::Full, ComponentVariant::Full) => "UGA+LGA".to_string(),
            (AttnVariant::None, ComponentVariant::Full) => "NA".to_string(),
            (AttnVariant::LgaOnly, ComponentVariant::Full) => "LGA".to_string(),
            (AttnVariant::UgaOnly, ComponentVariant::Full) => "UGA".to_string(),
            (AttnVariant::Full, ComponentVariant::FiOnly) => "FI".to_string(),
            (AttnVariant::Full, ComponentVariant::FrOnly) => "FR".to_string(),
            (a, c) => format!("{a:?}/{c:?}"),
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        let v = match s.trim().to_uppercase().as_str() {
            "NA" => Variant {
                attention: AttnVariant::None,
                component: ComponentVariant::Full,
            },
            "LGA" => Variant {
                attention: AttnVariant::LgaOnly,
                component: ComponentVariant::Full,
            },
            "UGA" => Variant {
                attention: AttnVariant::UgaOnly,
                component: ComponentVariant::Full,
            },
            "UGA+LGA" | "FULL" | "FR+FI" => Variant::full(),
            "FI" => Variant {
                attention: AttnVariant::Full,
                component: ComponentVariant::FiOnly,
            },
            "FR" => Variant {
                attention: AttnVariant::Full,
                component: ComponentVariant::FrOnly,
            },
            other => return Err(Error::config(format!("unknown ablation spec {other:?}"))),
        };
        Ok(v)
    }

}

/// Everything a training run needs. Serialized canonically into checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    /// Token embedding dimension D.
    pub dim: usize,
    /// Token sequence length S.
    pub seq_len: usize,
    /// Keep only the most frequent hashtags (0 = no cap).
    pub hashtag_cap: usize,
    /// Drop hashtags seen fewer times than this.
    pub min_tag_freq: usize,
    pub graph: GraphConfig,
    /// Number of graph encoder layers N_L.
    pub gae_layers: usize,
    /// Graph encoder output dimension.
    pub gae_dim: usize,
    pub optimizer: OptimizerKind,
    /// Sum the reconstruction loss over entries instead of averaging.
    pub gae_loss_sum: bool,
    /// Plain (unweighted) neighbor mean instead of edge-weighted.
    pub unweighted_mean: bool,
    /// L2-normalize node states between encoder layers.
    pub gae_l2norm: bool,
    /// Pool the language-projected rows inside user-guided attention
    /// instead of the user-projected rows.
    pub uga_pool_hl: bool,
    pub head: HeadKind,
    pub user_node_init: UserNodeInit,
    pub ratios: (f64, f64, f64),
    /// K used for per-epoch validation F1 and best-checkpoint selection.
    pub val_k: usize,
    pub embed_file: Option<String>,
    pub lang_profiles: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 42,
            epochs: 100,
            lr: 0.01,
            dim: 64,
            seq_len: 50,
            hashtag_cap: 0,
            min_tag_freq: 1,
            graph: GraphConfig::default(),
            gae_layers: 2,
            gae_dim: 64,
            optimizer: OptimizerKind::Adam,
            gae_loss_sum: false,
            unweighted_mean: false,
            gae_l2norm: false,
            uga_pool_hl: false,
            head: HeadKind::Softmax,
            user_node_init: UserNodeInit::Uf,
            ratios: (0.8, 0.1, 0.1),
            val_k: 3,
            embed_file: None,
            lang_profiles: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.seq_len < 3 || self.gae_dim == 0 {
            return Err(Error::config("dimensions must be positive, seq_len >= 3"));
        }
        if self.gae_layers == 0 {
            return Err(Error::config("gae_layers must be at least 1"));
        }
        if self.lr <= 0.0 {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.val_k == 0 {
            return Err(Error::config("val_k must be at least 1"));
        }
        if !self.graph.exact_paper_mode && self.graph.topk == 0 {
            return Err(Error::config("graph topk must be at least 1"));
        }
        Ok(())
    }

    /// Canonical JSON (sorted keys) for checkpoint headers and logging.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// Apply `key=value` overrides with keys matching the CLI flag names.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "embed-dim" | "dim" => self.dim = parse(key, value)?,
            "seq-len" => self.seq_len = parse(key, value)?,
            "hashtag-cap" => self.hashtag_cap = parse(key, value)?,
            "min-tag-freq" => self.min_tag_freq = parse(key, value)?,
            "sim-threshold" => self.graph.sim_threshold = parse(key, value)?,
            "topk" => self.graph.topk = parse(key, value)?,
            "exact-paper-graph" => self.graph.exact_paper_mode = parse(key, value)?,
            "gae-layers" => self.gae_layers = parse(key, value)?,
            "gae-dim" => self.gae_dim = parse(key, value)?,
            "optimizer" => {
                self.optimizer = match value {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => return Err(Error::config(format!("unknown optimizer {value:?}"))),
                }
            }
            "gae-loss" => {
                self.gae_loss_sum = match value {
                    "sum" => true,
                    "mean" => false,
                    _ => return Err(Error::config("gae-loss must be mean or sum")),
                }
            }
            "unweighted-mean" => self.unweighted_mean = parse(key, value)?,
            "gae-l2norm" => self.gae_l2norm = parse(key, value)?,
            "uga-pool-hl" => self.uga_pool_hl = parse(key, value)?,
            "head" => {
                self.head = match value {
                    "softmax" => HeadKind::Softmax,
                    "sigmoid" => HeadKind::Sigmoid,
                    _ => return Err(Error::config("head must be softmax or sigmoid")),
                }
            }
            "user-node-init" => {
                self.user_node_init = match value {
                    "uf" => UserNodeInit::Uf,
                    "mean-uga" => UserNodeInit::MeanUga,
                    _ => return Err(Error::config("user-node-init must be uf or mean-uga")),
                }
            }
            "ratios" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::config("ratios must be three comma-separated values"));
                }
                self.ratios = (
                    parse(key, parts[0])?,
                    parse(key, parts[1])?,
                    parse(key, parts[2])?,
                );
            }
            "val-k" => self.val_k = parse(key, value)?,
            "embed-file" => self.embed_file = Some(value.to_string()),
            "lang-profiles" => self.lang_profiles = Some(value.to_string()),
            other => return Err(Error::config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Read a flat `key=value` config file (blank lines and `#` comments
    /// allowed) over the current values.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("config line {}: expected key=value", lineno + 1))
            })?;
            self.apply_override(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Flat view for logging the resolved configuration.
    pub fn flat_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let value = serde_json::to_value(self).expect("config serializes");
        flatten("", &value, &mut m);
        m
    }
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}
