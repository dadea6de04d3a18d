//! Command-line driver: ingest, stats, split, gen-synth, train, evaluate,
//! recommend, ablate.
//!
//! Configuration precedence is CLI flag > config file > built-in default;
//! the resolved configuration is logged at startup. Exit codes: 0 success,
//! 1 usage/config error, 2 data error, 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tagalog_core::checkpoint::Checkpoint;
use tagalog_core::config::{TrainConfig, Variant};
use tagalog_core::corpus;
use tagalog_core::error::Error;
use tagalog_core::langid::LangCode;
use tagalog_core::model::EvalPost;
use tagalog_core::synth::{self, SynthSpec};
use tagalog_core::tensor::Tensor;
use tagalog_core::{encoder, eval, train};

#[derive(Parser)]
#[command(
    name = "tagalog",
    about = "Multilingual personalized hashtag recommender",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess a corpus and write the cleaned posts as JSONL.
    Ingest {
        /// Input corpus (JSONL, one post per line).
        #[arg(long)]
        corpus: PathBuf,
        /// Output path for cleaned posts; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Corpus statistics as CSV (metric,value).
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Deterministically split a corpus into train/val/test JSONL files.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        /// Output prefix; writes <prefix>.train.jsonl, .val.jsonl, .test.jsonl.
        #[arg(long)]
        out_prefix: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate a synthetic corpus with (user, language)-determined tags.
    GenSynth {
        /// Number of users [default: 6].
        #[arg(long, default_value_t = 6)]
        users: usize,
        /// Number of posts [default: 60].
        #[arg(long, default_value_t = 60)]
        posts: usize,
        /// Number of languages, drawn from bn,hi,mr,gu,kn,te,ta,en [default: 7].
        #[arg(long, default_value_t = 7)]
        langs: usize,
        /// Hashtag pool size [default: 12].
        #[arg(long, default_value_t = 12)]
        hashtags: usize,
        /// Generator seed [default: 42].
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Flat key=value config file, applied under any CLI flags.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Model variant: UGA+LGA, NA, LGA, UGA, FI, FR [default: UGA+LGA].
        #[arg(long, default_value = "UGA+LGA")]
        variant: String,
        /// Debug dump of the training graph edges as CSV.
        #[arg(long)]
        dump_graph: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a checkpoint: HR/P/R/F1 at each K.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// K values: a range like 1..9 or a comma list like 1,3,5 [default: 1..9].
        #[arg(long, default_value = "1..9")]
        ks: String,
        /// Which split to evaluate: train, val, or test [default: test].
        #[arg(long, default_value = "test")]
        split: String,
        /// Wide table output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write long-format curves (model,K,metric,value) here.
        #[arg(long)]
        curves: Option<PathBuf>,
        /// Also write un-averaged per-post metrics here, for audit.
        #[arg(long)]
        per_post: Option<PathBuf>,
    },
    /// Recommend hashtags for one post (by id or ad-hoc text).
    Recommend {
        #[arg(long)]
        ckpt: PathBuf,
        /// Corpus containing --post-id (required with --post-id; also used
        /// to rebuild the training graph for ad-hoc inference).
        #[arg(long)]
        corpus: PathBuf,
        /// Recommend for this post id from the corpus.
        #[arg(long)]
        post_id: Option<String>,
        /// Ad-hoc post text.
        #[arg(long)]
        text: Option<String>,
        /// Ad-hoc author id.
        #[arg(long)]
        user: Option<String>,
        /// Ad-hoc language code; detected from the text when omitted.
        #[arg(long)]
        lang: Option<String>,
        /// How many hashtags to recommend [default: 8].
        #[arg(long, default_value_t = 8)]
        k: usize,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate ablation variants, one table row per spec.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated variant list [default: the seven standard rows].
        #[arg(long, default_value = "NA,LGA,UGA,UGA+LGA,FI,FR,FR+FI")]
        specs: String,
        /// K for the emitted rows [default: 8].
        #[arg(long, default_value_t = 8)]
        k: usize,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Config overrides shared by corpus-consuming commands. Every key also
/// works in the config file; CLI values win.
#[derive(Args, Default)]
struct Overrides {
    /// Flat key=value config file.
    #[arg(long, global = false)]
    config_file: Option<PathBuf>,
    /// Run seed [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    /// Training epochs [default: 100].
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate [default: 0.01].
    #[arg(long)]
    lr: Option<f64>,
    /// Token embedding dimension D [default: 64].
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Token sequence length S [default: 50].
    #[arg(long)]
    seq_len: Option<usize>,
    /// Keep only the N most frequent hashtags (0 = no cap) [default: 0].
    #[arg(long)]
    hashtag_cap: Option<usize>,
    /// Drop hashtags seen fewer than N times [default: 1].
    #[arg(long)]
    min_tag_freq: Option<usize>,
    /// Tweet-tweet similarity threshold [default: 0.5].
    #[arg(long)]
    sim_threshold: Option<f64>,
    /// Per-tweet similarity neighbor cap [default: 10].
    #[arg(long)]
    topk: Option<usize>,
    /// All-pairs family-gated graph, no threshold or cap [default: false].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    exact_paper_graph: Option<bool>,
    /// Graph encoder layers [default: 2].
    #[arg(long)]
    gae_layers: Option<usize>,
    /// Graph encoder output dimension [default: 64].
    #[arg(long)]
    gae_dim: Option<usize>,
    /// Optimizer: adam or sgd [default: adam].
    #[arg(long)]
    optimizer: Option<String>,
    /// Reconstruction loss: mean or sum [default: mean].
    #[arg(long)]
    gae_loss: Option<String>,
    /// Plain neighbor mean instead of edge-weighted [default: false].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    unweighted_mean: Option<bool>,
    /// L2-normalize node states between encoder layers [default: false].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    gae_l2norm: Option<bool>,
    /// Pool language-projected rows inside user-guided attention
    /// [default: false].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    uga_pool_hl: Option<bool>,
    /// Ranking head: softmax or sigmoid [default: softmax].
    #[arg(long)]
    head: Option<String>,
    /// User node initialization: uf or mean-uga [default: uf].
    #[arg(long)]
    user_node_init: Option<String>,
    /// Split ratios as train,val,test [default: 0.8,0.1,0.1].
    #[arg(long)]
    ratios: Option<String>,
    /// K for validation F1 and checkpoint selection [default: 3].
    #[arg(long)]
    val_k: Option<usize>,
    /// Precomputed embedding file (dim=<D> header).
    #[arg(long)]
    embed_file: Option<String>,
    /// Language trigram profile CSV.
    #[arg(long)]
    lang_profiles: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut TrainConfig) -> tagalog_core::Result<()> {
        macro_rules! set {
            ($field:ident, $key:literal) => {
                if let Some(v) = &self.$field {
                    cfg.apply_override($key, &v.to_string())?;
                }
            };
        }
        set!(seed, "seed");
        set!(epochs, "epochs");
        set!(lr, "lr");
        set!(embed_dim, "embed-dim");
        set!(seq_len, "seq-len");
        set!(hashtag_cap, "hashtag-cap");
        set!(min_tag_freq, "min-tag-freq");
        set!(sim_threshold, "sim-threshold");
        set!(topk, "topk");
        set!(exact_paper_graph, "exact-paper-graph");
        set!(gae_layers, "gae-layers");
        set!(gae_dim, "gae-dim");
        set!(optimizer, "optimizer");
        set!(gae_loss, "gae-loss");
        set!(unweighted_mean, "unweighted-mean");
        set!(gae_l2norm, "gae-l2norm");
        set!(uga_pool_hl, "uga-pool-hl");
        set!(head, "head");
        set!(user_node_init, "user-node-init");
        set!(ratios, "ratios");
        set!(val_k, "val-k");
        set!(embed_file, "embed-file");
        set!(lang_profiles, "lang-profiles");
        Ok(())
    }
}

/// Defaults, then the config file, then CLI flags.
fn resolve_config(
    file: Option<&Path>,
    overrides: &Overrides,
) -> tagalog_core::Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = file.or(overrides.config_file.as_deref()) {
        cfg.apply_file(path)?;
    }
    overrides.apply(&mut cfg)?;
    cfg.validate()?;
    for (key, value) in cfg.flat_map() {
        log::info!("config {key} = {value}");
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("TAGALOG_LOG", "info")
            .write_style("TAGALOG_LOG_STYLE"),
    )
    .format_timestamp(None)
    .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 1,
                Error::Io(_) | Error::Data(_) | Error::UnknownLanguage(_) => 2,
                Error::Numeric(_) => 3,
            })
        }
    }
}

fn run(command: Command) -> tagalog_core::Result<()> {
    match command {
        Command::Ingest {
            corpus,
            out,
            overrides,
        } => cmd_ingest(&corpus, out.as_deref(), &overrides),
        Command::Stats {
            corpus,
            out,
            overrides,
        } => cmd_stats(&corpus, out.as_deref(), &overrides),
        Command::Split {
            corpus,
            out_prefix,
            overrides,
        } => cmd_split(&corpus, &out_prefix, &overrides),
        Command::GenSynth {
            users,
            posts,
            langs,
            hashtags,
            seed,
            out,
        } => {
            let spec = SynthSpec::with_lang_count(users, posts, langs, hashtags, seed);
            synth::gen_synth(&spec, &out)?;
            log::info!("wrote synthetic corpus to {}", out.display());
            Ok(())
        }
        Command::Train {
            corpus,
            config,
            out,
            variant,
            dump_graph,
            overrides,
        } => cmd_train(
            &corpus,
            config.as_deref(),
            &out,
            &variant,
            dump_graph.as_deref(),
            &overrides,
        ),
        Command::Evaluate {
            ckpt,
            corpus,
            ks,
            split,
            out,
            curves,
            per_post,
        } => cmd_evaluate(
            &ckpt,
            &corpus,
            &ks,
            &split,
            out.as_deref(),
            curves.as_deref(),
            per_post.as_deref(),
        ),
        Command::Recommend {
            ckpt,
            corpus,
            post_id,
            text,
            user,
            lang,
            k,
            out,
        } => cmd_recommend(
            &ckpt,
            &corpus,
            post_id.as_deref(),
            text.as_deref(),
            user.as_deref(),
            lang.as_deref(),
            k,
            out.as_deref(),
        ),
        Command::Ablate {
            corpus,
            config,
            specs,
            k,
            out,
            overrides,
        } => cmd_ablate(&corpus, config.as_deref(), &specs, k, out.as_deref(), &overrides),
    }
}

fn load_pipeline(
    corpus_path: &Path,
    cfg: &TrainConfig,
) -> tagalog_core::Result<corpus::Corpus> {
    let (raws, report) = corpus::load_corpus(corpus_path)?;
    let ingested = train::ingest_with_config(&raws, report, cfg)?;
    log::info!(
        "ingested {} posts ({} lines; skipped: {} malformed, {} short, {} untagged, {} duplicate, {} unknown-language, {} tag-filtered)",
        ingested.posts.len(),
        ingested.report.lines,
        ingested.report.malformed_lines,
        ingested.report.too_short,
        ingested.report.no_tags,
        ingested.report.duplicates,
        ingested.report.unknown_language,
        ingested.report.pruned_by_tag_filter,
    );
    Ok(ingested)
}

fn write_or_stdout(out: Option<&Path>, content: &[u8]) -> tagalog_core::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content)?;
            log::info!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(content)?,
    }
    Ok(())
}

/// One cleaned post, as emitted by `ingest`.
#[derive(serde::Serialize)]
struct CleanLine<'a> {
    id: &'a str,
    user_id: &'a str,
    token_text: &'a str,
    lang: &'a str,
    hashtags: Vec<&'a str>,
}

fn cmd_ingest(
    corpus_path: &Path,
    out: Option<&Path>,
    overrides: &Overrides,
) -> tagalog_core::Result<()> {
    let cfg = resolve_config(None, overrides)?;
    let ingested = load_pipeline(corpus_path, &cfg)?;
    let mut buf = Vec::new();
    for post in &ingested.posts {
        let line = CleanLine {
            id: &post.id,
            user_id: ingested.vocab.users.string(post.user_index),
            token_text: &post.token_text,
            lang: post.lang.as_str(),
            hashtags: post
                .tag_indices
                .iter()
                .map(|&t| ingested.vocab.hashtags.string(t))
                .collect(),
        };
        buf.extend_from_slice(
            serde_json::to_string(&line)
                .map_err(|e| Error::data(format!("serialize failed: {e}")))?
                .as_bytes(),
        );
        buf.push(b'\n');
    }
    write_or_stdout(out, &buf)
}

fn cmd_stats(
    corpus_path: &Path,
    out: Option<&Path>,
    overrides: &Overrides,
) -> tagalog_core::Result<()> {
    let cfg = resolve_config(None, overrides)?;
    let ingested = load_pipeline(corpus_path, &cfg)?;
    let stats = corpus::stats(&ingested.posts)?;
    let mut buf = Vec::new();
    stats.write_csv(&mut buf)?;
    write_or_stdout(out, &buf)
}

fn cmd_split(
    corpus_path: &Path,
    out_prefix: &str,
    overrides: &Overrides,
) -> tagalog_core::Result<()> {
    let cfg = resolve_config(None, overrides)?;
    let (raws, report) = corpus::load_corpus(corpus_path)?;
    let ingested = train::ingest_with_config(&raws, report, &cfg)?;
    let splits = corpus::split(&ingested.posts, cfg.ratios, cfg.seed)?;

    // Re-emit original raw lines per split so the outputs feed train
    // directly; posts dropped by preprocessing are not emitted.
    let by_id: std::collections::HashMap<&str, &corpus::RawPost> =
        raws.iter().map(|r| (r.id.as_str(), r)).collect();
    for (name, part) in [
        ("train", &splits.train),
        ("val", &splits.val),
        ("test", &splits.test),
    ] {
        let path = PathBuf::from(format!("{out_prefix}.{name}.jsonl"));
        let mut buf = String::new();
        for post in part {
            let raw = by_id
                .get(post.id.as_str())
                .ok_or_else(|| Error::data(format!("post id {} lost in split", post.id)))?;
            buf.push_str(&synth::to_jsonl(std::slice::from_ref(*raw)));
        }
        std::fs::write(&path, buf)?;
        log::info!("wrote {} posts to {}", part.len(), path.display());
    }
    Ok(())
}

fn cmd_train(
    corpus_path: &Path,
    config: Option<&Path>,
    out: &Path,
    variant: &str,
    dump_graph: Option<&Path>,
    overrides: &Overrides,
) -> tagalog_core::Result<()> {
    let cfg = resolve_config(config, overrides)?;
    let variant = Variant::parse(variant)?;
    let ingested = load_pipeline(corpus_path, &cfg)?;
    let splits = corpus::split(&ingested.posts, cfg.ratios, cfg.seed)?;
    log::info!(
        "split sizes: train {}, val {}, test {}",
        splits.train.len(),
        splits.val.len(),
        splits.test.len()
    );
    let trained = train::train(&ingested, &splits, &cfg, variant)?;
    if let Some(path) = dump_graph {
        match &trained.model.graph {
            Some(bundle) => {
                let mut buf = Vec::new();
                bundle.graph.write_edges_csv(&mut buf)?;
                std::fs::write(path, &buf)?;
                log::info!("wrote graph edges to {}", path.display());
            }
            None => log::warn!("variant has no graph; nothing to dump"),
        }
    }
    if let Some(vm) = trained.val_metrics {
        log::info!(
            "best epoch {:?}: val HR@{} {:.4} P {:.4} R {:.4} F1 {:.4}",
            trained.best_epoch,
            vm.k,
            vm.hit_rate,
            vm.precision,
            vm.recall,
            vm.f1
        );
    }
    trained.checkpoint().save(out)?;
    log::info!("wrote checkpoint to {}", out.display());
    Ok(())
}

fn parse_ks(s: &str) -> tagalog_core::Result<Vec<usize>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let lo: usize = a
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad K range start {a:?}")))?;
        let hi: usize = b
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad K range end {b:?}")))?;
        if lo == 0 || hi < lo {
            return Err(Error::config(format!("bad K range {s:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::config(format!("bad K value {part:?}")))
        })
        .collect()
}

fn log_checkpoint_config(ckpt: &Checkpoint) {
    for (key, value) in ckpt.config.flat_map() {
        log::info!("config (from checkpoint) {key} = {value}");
    }
    log::info!("variant (from checkpoint) = {:?}", ckpt.variant);
}

fn cmd_evaluate(
    ckpt_path: &Path,
    corpus_path: &Path,
    ks: &str,
    split_name: &str,
    out: Option<&Path>,
    curves: Option<&Path>,
    per_post: Option<&Path>,
) -> tagalog_core::Result<()> {
    let ks = parse_ks(ks)?;
    let ckpt = Checkpoint::load(ckpt_path)?;
    log_checkpoint_config(&ckpt);
    let (raws, _) = corpus::load_corpus(corpus_path)?;
    let restored = train::restore(&ckpt, &raws)?;

    let posts: Vec<EvalPost> = match split_name {
        "train" => restored.model.train_eval_posts(),
        "val" => restored.model.unseen_eval_posts(&restored.splits.val),
        "test" => restored.model.unseen_eval_posts(&restored.splits.test),
        other => {
            return Err(Error::config(format!(
                "unknown split {other:?} (expected train, val, or test)"
            )))
        }
    };
    let label = ckpt.variant.label();
    let rows = eval::evaluate(&restored.model, &restored.store, &posts, &ks, &label)?;

    let mut buf = Vec::new();
    eval::write_rows_csv(&rows, &mut buf)?;
    write_or_stdout(out, &buf)?;
    if let Some(path) = curves {
        let mut buf = Vec::new();
        eval::write_curves_csv(&rows, &mut buf)?;
        std::fs::write(path, &buf)?;
        log::info!("wrote curves to {}", path.display());
    }
    if let Some(path) = per_post {
        let mut buf = Vec::new();
        eval::write_per_post_csv(&restored.model, &restored.store, &posts, &ks, &mut buf)?;
        std::fs::write(path, &buf)?;
        log::info!("wrote per-post metrics to {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_recommend(
    ckpt_path: &Path,
    corpus_path: &Path,
    post_id: Option<&str>,
    text: Option<&str>,
    user: Option<&str>,
    lang: Option<&str>,
    k: usize,
    out: Option<&Path>,
) -> tagalog_core::Result<()> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    log_checkpoint_config(&ckpt);
    let (raws, _) = corpus::load_corpus(corpus_path)?;
    let restored = train::restore(&ckpt, &raws)?;
    let model = &restored.model;
    let cfg = &model.cfg;

    let (eval_post, display_id) = match (post_id, text) {
        (Some(id), None) => {
            // Training posts keep their node; others attach inductively.
            if let Some(i) = model.train_posts.iter().position(|p| p.clean.id == id) {
                (
                    EvalPost {
                        input: model.train_posts[i].clone(),
                        node: model.graph.as_ref().map(|_| i),
                        user_row_override: None,
                    },
                    id.to_string(),
                )
            } else {
                let post = restored
                    .corpus
                    .posts
                    .iter()
                    .find(|p| p.id == id)
                    .ok_or_else(|| Error::data(format!("post id {id:?} not in corpus")))?;
                (
                    EvalPost {
                        input: model.prepare(post),
                        node: None,
                        user_row_override: None,
                    },
                    id.to_string(),
                )
            }
        }
        (None, Some(text)) => {
            let user = user.ok_or_else(|| Error::config("--user is required with --text"))?;
            let (token_text, _) = corpus::clean_text(text);
            if token_text.split_whitespace().count() < 3 {
                return Err(Error::data(
                    "ad-hoc text has fewer than 3 words after cleaning",
                ));
            }
            let identifier = train::identifier_from_config(cfg)?;
            let lang_code = match lang {
                Some(code) => LangCode::parse(code)?,
                None => identifier.identify(&token_text)?,
            };
            let (user_index, user_row_override) = match model.vocab.users.lookup(user) {
                Some(i) => (i, None),
                None => {
                    // An author outside the vocabulary gets the same
                    // initialization rule a fresh table row would.
                    let row = encoder::hash_embed(user, cfg.dim, cfg.seed ^ 0x7573_6572_7461_626c);
                    (usize::MAX, Some(Tensor::row_vector(row)))
                }
            };
            let clean = corpus::CleanPost {
                id: "adhoc".to_string(),
                user_index: if user_index == usize::MAX { 0 } else { user_index },
                token_text,
                lang: lang_code,
                tag_indices: [0].into_iter().collect(), // placeholder, unused
            };
            let mut input = model.prepare(&clean);
            if user_row_override.is_some() {
                // Author lookup must miss so the attachment uses the
                // override row; point it past the vocabulary.
                input.clean.user_index = model.vocab.users.len();
            }
            (
                EvalPost {
                    input,
                    node: None,
                    user_row_override,
                },
                "adhoc".to_string(),
            )
        }
        _ => {
            return Err(Error::config(
                "recommend needs exactly one of --post-id or --text",
            ))
        }
    };

    let k = k.clamp(1, model.vocab.hashtags.len());
    let predictions = model.evaluate_posts(&restored.store, std::slice::from_ref(&eval_post));
    let prediction = &predictions[0];

    let mut buf = Vec::new();
    writeln!(buf, "post_id,rank,hashtag,probability")?;
    for (rank, &tag) in prediction.ranked.iter().take(k).enumerate() {
        writeln!(
            buf,
            "{},{},{},{}",
            display_id,
            rank + 1,
            model.vocab.hashtags.string(tag),
            prediction.probs[tag]
        )?;
    }
    write_or_stdout(out, &buf)
}

fn cmd_ablate(
    corpus_path: &Path,
    config: Option<&Path>,
    specs: &str,
    k: usize,
    out: Option<&Path>,
    overrides: &Overrides,
) -> tagalog_core::Result<()> {
    let cfg = resolve_config(config, overrides)?;
    let variants: Vec<(String, Variant)> = specs
        .split(',')
        .map(|s| Ok((s.trim().to_uppercase(), Variant::parse(s)?)))
        .collect::<tagalog_core::Result<_>>()?;
    let ingested = load_pipeline(corpus_path, &cfg)?;
    let splits = corpus::split(&ingested.posts, cfg.ratios, cfg.seed)?;
    let rows = eval::ablate(&ingested, &splits, &cfg, &variants, k)?;
    let mut buf = Vec::new();
    eval::write_rows_csv(&rows, &mut buf)?;
    write_or_stdout(out, &buf)
}
