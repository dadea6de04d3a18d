//! The training loop: full-batch forward/backward, optimizer steps,
//! per-epoch validation, checkpoint assembly, and restoration.

use crate::checkpoint::{Checkpoint, ValMetrics};
use crate::config::{TrainConfig, Variant};
use crate::corpus::{split_digest, Corpus, RawPost, Splits};
use crate::encoder;
use crate::error::{Error, Result};
use crate::eval;
use crate::langid::LangIdentifier;
use crate::model::{backward_into_store, EvalPost, Model};
use crate::params::{Optimizer, ParamStore};
use std::path::Path;

/// Loss and validation trace of one epoch.
#[derive(Clone, Debug)]
pub struct EpochLog {
    pub epoch: usize,
    pub total: f64,
    pub gae: f64,
    pub hr: f64,
    /// Training hit rate at val_k, from the epoch's own forward pass.
    pub train_hit_rate: f64,
    pub val: Option<ValMetrics>,
}

/// A trained model: the retained parameters plus everything needed to
/// evaluate and serialize them.
pub struct TrainedModel {
    pub model: Model,
    /// Retained parameters (best validation F1; final when no validation
    /// data exists).
    pub store: ParamStore,
    pub history: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub val_metrics: Option<ValMetrics>,
    pub split_digest: u64,
}

impl TrainedModel {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.model.cfg.clone(),
            variant: self.model.variant,
            vocab: self.model.vocab.clone(),
            graph_digest: self.model.graph.as_ref().map(|b| b.graph.digest()),
            split_digest: self.split_digest,
            best_epoch: self.best_epoch,
            val_metrics: self.val_metrics,
            tensors: self.store.snapshot(),
        }
    }

    /// Metrics of the retained parameters on the validation split.
    pub fn validate(&self, val: &[crate::corpus::CleanPost], k: usize) -> Result<Option<ValMetrics>> {
        if val.is_empty() {
            return Ok(None);
        }
        let posts = self.model.unseen_eval_posts(val);
        let rows = eval::evaluate(&self.model, &self.store, &posts, &[k], "val")?;
        Ok(Some(ValMetrics {
            k,
            hit_rate: rows[0].hit_rate,
            precision: rows[0].precision,
            recall: rows[0].recall,
            f1: rows[0].f1,
        }))
    }
}

/// Language identifier from config: CSV profiles when set, built-in seed
/// profiles otherwise.
pub fn identifier_from_config(cfg: &TrainConfig) -> Result<LangIdentifier> {
    match &cfg.lang_profiles {
        Some(path) => LangIdentifier::from_csv(Path::new(path)),
        None => Ok(LangIdentifier::builtin()),
    }
}

/// Run the ingestion pipeline under a config.
pub fn ingest_with_config(
    raws: &[RawPost],
    report: crate::corpus::IngestReport,
    cfg: &TrainConfig,
) -> Result<Corpus> {
    let identifier = identifier_from_config(cfg)?;
    crate::corpus::ingest(raws, &identifier, cfg.min_tag_freq, cfg.hashtag_cap, report)
}

/// A model rebuilt from a checkpoint against a corpus file's contents.
pub struct RestoredModel {
    pub corpus: Corpus,
    pub splits: Splits,
    pub model: Model,
    pub store: ParamStore,
}

/// Rebuild the full pipeline a checkpoint was trained with and verify it
/// reproduces the recorded split and graph digests before restoring the
/// trained parameters.
pub fn restore(ckpt: &Checkpoint, raws: &[RawPost]) -> Result<RestoredModel> {
    let cfg = ckpt.config.clone();
    let corpus = ingest_with_config(raws, Default::default(), &cfg)?;

    if corpus.vocab.hashtags.strings() != ckpt.vocab.hashtags.strings()
        || corpus.vocab.users.strings() != ckpt.vocab.users.strings()
    {
        return Err(Error::data(
            "corpus vocabulary does not match the checkpoint (different corpus file?)",
        ));
    }

    let splits = crate::corpus::split(&corpus.posts, cfg.ratios, cfg.seed)?;
    if split_digest(&splits) != ckpt.split_digest {
        return Err(Error::data("split digest mismatch against the checkpoint"));
    }

    let provider = encoder::make_provider(cfg.dim, cfg.seed, cfg.embed_file.as_deref())?;
    let (model, _) = Model::build(
        &cfg,
        ckpt.variant,
        corpus.vocab.clone(),
        &splits.train,
        provider,
    )?;
    let rebuilt_digest = model.graph.as_ref().map(|b| b.graph.digest());
    if rebuilt_digest != ckpt.graph_digest {
        return Err(Error::data("graph digest mismatch against the checkpoint"));
    }

    let store = ckpt.to_store();
    Ok(RestoredModel {
        corpus,
        splits,
        model,
        store,
    })
}

/// Train one variant on the train split, validating per epoch on the val
/// split. Fully deterministic given (config, corpus, variant).
pub fn train(
    corpus: &Corpus,
    splits: &Splits,
    cfg: &TrainConfig,
    variant: Variant,
) -> Result<TrainedModel> {
    let provider = encoder::make_provider(cfg.dim, cfg.seed, cfg.embed_file.as_deref())?;
    let (model, mut store) =
        Model::build(cfg, variant, corpus.vocab.clone(), &splits.train, provider)?;
    let mut optimizer = Optimizer::from_kind(cfg.optimizer);

    let val_posts: Vec<EvalPost> = model.unseen_eval_posts(&splits.val);
    let gts: Vec<&std::collections::BTreeSet<usize>> = splits
        .val
        .iter()
        .map(|p| &p.tag_indices)
        .collect();

    // Retained parameters: best validation F1, latest among ties so flat
    // validation curves keep the most-trained weights. Epoch 0 is the
    // initialization, so zero-epoch runs checkpoint exactly that.
    let mut best_store = store.clone();
    let mut best_epoch: Option<usize> = None;
    let mut best_val: Option<ValMetrics> = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    let train_gts: Vec<&std::collections::BTreeSet<usize>> = model
        .train_posts
        .iter()
        .map(|p| &p.clean.tag_indices)
        .collect();

    for epoch in 1..=cfg.epochs {
        let outcome = backward_into_store(&model, &mut store)?;
        let (total, gae, hr) = (outcome.total, outcome.gae, outcome.hr);
        let (train_hit_rate, _, _, _) =
            eval::metrics_at_k(&outcome.predictions, &train_gts, cfg.val_k);

        optimizer.step(&mut store, cfg.lr);

        let mut log_line = format!(
            "epoch {epoch}: total {total:.6} gae {gae:.6} hr {hr:.6} trainHR@{} {train_hit_rate:.4}",
            cfg.val_k
        );
        let val = if val_posts.is_empty() {
            None
        } else {
            let predictions = model.evaluate_posts(&store, &val_posts);
            let (h, p, r, f) = eval::metrics_at_k(&predictions, &gts, cfg.val_k);
            let vm = ValMetrics {
                k: cfg.val_k,
                hit_rate: h,
                precision: p,
                recall: r,
                f1: f,
            };
            log_line.push_str(&format!(" | val F1@{} {:.4} HR {:.4}", cfg.val_k, f, h));
            if best_val.is_none_or(|b| vm.f1 >= b.f1) {
                best_store = store.clone();
                best_epoch = Some(epoch);
                best_val = Some(vm);
            }
            Some(vm)
        };
        log::info!("{log_line}");

        history.push(EpochLog {
            epoch,
            total,
            gae,
            hr,
            train_hit_rate,
            val,
        });
    }

    let (store, best_epoch, val_metrics) = if val_posts.is_empty() {
        (store, (cfg.epochs > 0).then_some(cfg.epochs), None)
    } else if cfg.epochs == 0 {
        (best_store, None, None)
    } else {
        (best_store, best_epoch, best_val)
    };

    Ok(TrainedModel {
        model,
        store,
        history,
        best_epoch,
        val_metrics,
        split_digest: split_digest(splits),
    })
}
