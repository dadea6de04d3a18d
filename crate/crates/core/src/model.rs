//! Full model assembly: wiring per ablation variant, parameter
//! initialization, the training forward pass, and inductive evaluation.

use crate::attention;
use crate::autodiff::{concat_rows, Csr, Tape, Var};
use crate::config::{AttnVariant, TrainConfig, UserNodeInit, Variant};
use crate::corpus::{CleanPost, Vocab};
use crate::encoder::{self, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::gae::{self, SageLayerVars};
use crate::graph::{attach_post, build_graph, HeteroGraph, Neighbor};
use crate::head::{self, HeadVars, Prediction};
use crate::params::{init_weight, ParamStore};
use crate::tensor::Tensor;
use std::collections::BTreeMap;
use std::rc::Rc;

const LANG_TABLE_SALT: u64 = 0x6c61_6e67_7461_626c;
const USER_TABLE_SALT: u64 = 0x7573_6572_7461_626c;

/// A post with its precomputed constant inputs.
#[derive(Clone, Debug)]
pub struct PostInput {
    pub clean: CleanPost,
    /// Token embedding matrix, S x D, fixed for the run.
    pub tf: Tensor,
    pub mask: Rc<Vec<bool>>,
    pub lang_row: usize,
}

pub fn prepare_post(
    clean: &CleanPost,
    provider: &dyn EmbeddingProvider,
    cfg: &TrainConfig,
    vocab: &Vocab,
) -> PostInput {
    let seq = encoder::tokenize(&clean.token_text, cfg.seq_len);
    let tf = encoder::encode_tokens(&seq, provider);
    let mask = Rc::new(seq.mask());
    PostInput {
        clean: clean.clone(),
        tf,
        mask,
        lang_row: vocab.lang_index(clean.lang),
    }
}

/// What the variant and config actually wire up.
#[derive(Clone, Copy, Debug)]
pub struct Wiring {
    /// Language-guided attention produces the fused t_l.
    pub lga: bool,
    /// User-guided attention parameters exist.
    pub uga_registered: bool,
    /// User-guided attention output feeds user node initialization.
    pub uga_computed: bool,
    /// Word-level attention pooling (vs masked mean) for tweet features.
    pub pool: bool,
    /// The heterogeneous graph and its encoder exist.
    pub graph: bool,
}

impl Wiring {
    pub fn new(cfg: &TrainConfig, variant: Variant) -> Self {
        let refinement = variant.component.has_refinement();
        let graph = variant.component.has_graph();
        let uga_registered = variant.attention.has_uga() && refinement;
        Wiring {
            lga: variant.attention.has_lga() && refinement,
            uga_registered,
            uga_computed: uga_registered
                && graph
                && cfg.user_node_init == UserNodeInit::MeanUga,
            pool: variant.attention != AttnVariant::None,
            graph,
        }
    }
}

/// Frozen graph plus derived constants.
pub struct GraphBundle {
    pub graph: HeteroGraph,
    pub neighbor_mean: Rc<Csr>,
    pub a_target: Rc<Tensor>,
}

/// A buildable, trainable, evaluable model over a fixed training split.
pub struct Model {
    pub cfg: TrainConfig,
    pub variant: Variant,
    pub wiring: Wiring,
    pub vocab: Vocab,
    pub provider: Box<dyn EmbeddingProvider>,
    pub train_posts: Vec<PostInput>,
    pub graph: Option<GraphBundle>,
}

/// Register every parameter the variant needs, deterministically
/// initialized from the seed.
pub fn init_store(cfg: &TrainConfig, vocab: &Vocab, variant: Variant) -> ParamStore {
    let w = Wiring::new(cfg, variant);
    let d = cfg.dim;
    let seed = cfg.seed;
    let mut store = ParamStore::new();

    if w.lga || (w.uga_registered && cfg.uga_pool_hl) {
        store.register("attn.W_l", init_weight("attn.W_l", d, d, d, seed));
        store.register("attn.b_l", Tensor::zeros(1, d));
    }
    if w.uga_registered {
        store.register("attn.W_u", init_weight("attn.W_u", d, d, d, seed));
        store.register("attn.b_u", Tensor::zeros(1, d));
    }
    if w.pool {
        store.register("attn.W_w", init_weight("attn.W_w", d, d, d, seed));
        store.register("attn.b_w", Tensor::zeros(1, d));
        store.register("attn.c_w", init_weight("attn.c_w", 1, d, d, seed));
    }
    if w.lga {
        store.register(
            "embed.lang",
            encoder::embedding_table(vocab.languages.strings(), d, seed ^ LANG_TABLE_SALT),
        );
    }
    if w.graph {
        store.register(
            "embed.user",
            encoder::embedding_table(vocab.users.strings(), d, seed ^ USER_TABLE_SALT),
        );
        let mut d_in = d;
        for k in 1..=cfg.gae_layers {
            let name = format!("gae.W{k}");
            store.register(&name, init_weight(&name, cfg.gae_dim, 2 * d_in, 2 * d_in, seed));
            store.register(&format!("gae.b{k}"), Tensor::zeros(1, cfg.gae_dim));
            d_in = cfg.gae_dim;
        }
    }

    let d_graph = if w.graph { cfg.gae_dim } else { d };
    let n_tags = vocab.hashtags.len();
    store.register(
        "head.W",
        init_weight("head.W", n_tags, d_graph + d, d_graph + d, seed),
    );
    store.register("head.b", Tensor::zeros(1, n_tags));
    store
}

type LeafMap<'t> = BTreeMap<String, Var<'t>>;

fn leaf_map<'t>(tape: &'t Tape, store: &ParamStore) -> LeafMap<'t> {
    store
        .iter()
        .map(|(name, tensor)| (name.clone(), tape.leaf(tensor.clone())))
        .collect()
}

fn leaf<'t>(leaves: &LeafMap<'t>, name: &str) -> Var<'t> {
    *leaves
        .get(name)
        .unwrap_or_else(|| panic!("parameter {name} not registered for this variant"))
}

/// Per-post text-side representations.
pub struct TextReprs<'t> {
    /// Fused language part: LGA pooled output, or the masked token mean.
    pub t_l: Var<'t>,
    /// Tweet feature: word-attention pool, or the masked token mean.
    pub pool: Var<'t>,
    /// User-guided pooled output when user nodes initialize from it.
    pub t_u: Option<Var<'t>>,
}

impl Model {
    pub fn build(
        cfg: &TrainConfig,
        variant: Variant,
        vocab: Vocab,
        train_posts: &[CleanPost],
        provider: Box<dyn EmbeddingProvider>,
    ) -> Result<(Model, ParamStore)> {
        cfg.validate()?;
        if vocab.hashtags.len() < 2 {
            return Err(Error::data(format!(
                "need at least 2 hashtags in the vocabulary, got {}",
                vocab.hashtags.len()
            )));
        }
        if provider.dim() != cfg.dim {
            return Err(Error::config(format!(
                "embedding provider dimension {} does not match configured dimension {}",
                provider.dim(),
                cfg.dim
            )));
        }
        let wiring = Wiring::new(cfg, variant);
        let store = init_store(cfg, &vocab, variant);
        let posts: Vec<PostInput> = train_posts
            .iter()
            .map(|p| prepare_post(p, provider.as_ref(), cfg, &vocab))
            .collect();

        let mut model = Model {
            cfg: cfg.clone(),
            variant,
            wiring,
            vocab,
            provider,
            train_posts: posts,
            graph: None,
        };

        if wiring.graph {
            if model.train_posts.is_empty() {
                return Err(Error::data("cannot build a graph from zero training posts"));
            }
            let feats = model.pooled_tweet_features(&store);
            let user_feats = model.initial_user_features(&store);
            let cleans: Vec<CleanPost> =
                model.train_posts.iter().map(|p| p.clean.clone()).collect();
            let graph = build_graph(&cleans, &feats, &|u| user_feats[&u].clone(), &cfg.graph)?;
            let neighbor_mean = Rc::new(graph.neighbor_mean_matrix(cfg.unweighted_mean));
            let a_target = Rc::new(graph.target_adjacency());
            model.graph = Some(GraphBundle {
                graph,
                neighbor_mean,
                a_target,
            });
        }
        Ok((model, store))
    }

    /// Prepare a post against this model's provider and config.
    pub fn prepare(&self, clean: &CleanPost) -> PostInput {
        prepare_post(clean, self.provider.as_ref(), &self.cfg, &self.vocab)
    }

    /// The training posts as in-graph evaluation posts.
    pub fn train_eval_posts(&self) -> Vec<EvalPost> {
        self.train_posts
            .iter()
            .enumerate()
            .map(|(i, p)| EvalPost {
                input: p.clone(),
                node: self.graph.as_ref().map(|_| i),
                user_row_override: None,
            })
            .collect()
    }

    /// Unseen posts as inductive evaluation posts.
    pub fn unseen_eval_posts(&self, posts: &[CleanPost]) -> Vec<EvalPost> {
        posts
            .iter()
            .map(|p| EvalPost {
                input: self.prepare(p),
                node: None,
                user_row_override: None,
            })
            .collect()
    }

    /// Current-parameter pooled feature rows for every training post.
    pub fn pooled_tweet_features(&self, store: &ParamStore) -> Tensor {
        let tape = Tape::new();
        let leaves = leaf_map(&tape, store);
        let rows: Vec<Vec<f64>> = self
            .train_posts
            .iter()
            .map(|post| {
                self.text_reprs(&tape, &leaves, post, false)
                    .pool
                    .value()
                    .row(0)
                    .to_vec()
            })
            .collect();
        Tensor::from_rows(&rows)
    }

    /// Initial user node features per user vocabulary index.
    fn initial_user_features(&self, store: &ParamStore) -> BTreeMap<usize, Vec<f64>> {
        let mut users: Vec<usize> = self.train_posts.iter().map(|p| p.clean.user_index).collect();
        users.sort_unstable();
        users.dedup();

        if self.wiring.uga_computed {
            let tape = Tape::new();
            let leaves = leaf_map(&tape, store);
            let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
            for post in &self.train_posts {
                let t_u = self
                    .text_reprs(&tape, &leaves, post, true)
                    .t_u
                    .expect("uga_computed implies t_u");
                let v = t_u.value().row(0).to_vec();
                let entry = sums
                    .entry(post.clean.user_index)
                    .or_insert_with(|| (vec![0.0; self.cfg.dim], 0));
                for (a, b) in entry.0.iter_mut().zip(&v) {
                    *a += b;
                }
                entry.1 += 1;
            }
            sums.into_iter()
                .map(|(u, (mut sum, n))| {
                    for v in &mut sum {
                        *v /= n as f64;
                    }
                    (u, sum)
                })
                .collect()
        } else {
            let table = store.get("embed.user");
            users
                .into_iter()
                .map(|u| (u, table.row(u).to_vec()))
                .collect()
        }
    }

    /// Build the text-side representations of one post on the tape.
    fn text_reprs<'t>(
        &self,
        tape: &'t Tape,
        leaves: &LeafMap<'t>,
        post: &PostInput,
        need_t_u: bool,
    ) -> TextReprs<'t> {
        let tf = tape.constant(post.tf.clone());
        let t_l = if self.wiring.lga {
            let l_f = leaf(leaves, "embed.lang").gather_rows(Rc::new(vec![post.lang_row]));
            attention::lga(
                tf,
                l_f,
                leaf(leaves, "attn.W_l"),
                leaf(leaves, "attn.b_l"),
                &post.mask,
            )
            .pooled
        } else {
            attention::masked_mean(tf, &post.mask)
        };
        let pool = if self.wiring.pool {
            attention::word_attention_pool(
                tf,
                leaf(leaves, "attn.W_w"),
                leaf(leaves, "attn.b_w"),
                leaf(leaves, "attn.c_w"),
                &post.mask,
            )
        } else {
            attention::masked_mean(tf, &post.mask)
        };
        let t_u = (need_t_u && self.wiring.uga_computed).then(|| {
            let u_f =
                leaf(leaves, "embed.user").gather_rows(Rc::new(vec![post.clean.user_index]));
            let pool_hl = self
                .cfg
                .uga_pool_hl
                .then(|| (leaf(leaves, "attn.W_l"), leaf(leaves, "attn.b_l")));
            attention::uga(
                tf,
                u_f,
                leaf(leaves, "attn.W_u"),
                leaf(leaves, "attn.b_u"),
                pool_hl,
                &post.mask,
            )
            .pooled
        });
        TextReprs { t_l, pool, t_u }
    }

    /// Node feature matrix: tweet rows from the per-post pooled features,
    /// user rows from the embedding table or the mean user-guided
    /// representation.
    fn node_features<'t>(
        &self,
        tape: &'t Tape,
        leaves: &LeafMap<'t>,
        reprs: &[TextReprs<'t>],
    ) -> Var<'t> {
        let bundle = self.graph.as_ref().expect("graph present");
        let pools: Vec<Var<'t>> = reprs.iter().map(|r| r.pool).collect();
        let tweet_block = concat_rows(tape, &pools);

        let user_rows = bundle.graph.user_rows();
        let user_block = if self.wiring.uga_computed {
            let t_us: Vec<Var<'t>> = reprs
                .iter()
                .map(|r| r.t_u.expect("uga_computed implies t_u"))
                .collect();
            let stacked = concat_rows(tape, &t_us);
            let mut mix = Tensor::zeros(user_rows.len(), self.train_posts.len());
            for (ui, &user_index) in user_rows.iter().enumerate() {
                let authored: Vec<usize> = self
                    .train_posts
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.clean.user_index == user_index)
                    .map(|(i, _)| i)
                    .collect();
                for &p in &authored {
                    mix.set(ui, p, 1.0 / authored.len() as f64);
                }
            }
            tape.constant(mix).matmul(stacked)
        } else {
            leaf(leaves, "embed.user").gather_rows(Rc::new(user_rows.to_vec()))
        };
        concat_rows(tape, &[tweet_block, user_block])
    }

    fn head_vars<'t>(&self, leaves: &LeafMap<'t>) -> HeadVars<'t> {
        HeadVars {
            w: leaf(leaves, "head.W"),
            b: leaf(leaves, "head.b"),
        }
    }

    /// Encoder layer handles drawn from the shared leaf map, so gradients
    /// flow to the registered parameters.
    fn sage_layers<'t>(&self, leaves: &LeafMap<'t>) -> Vec<SageLayerVars<'t>> {
        (1..=self.cfg.gae_layers)
            .map(|k| SageLayerVars {
                w: leaf(leaves, &format!("gae.W{k}")),
                b: leaf(leaves, &format!("gae.b{k}")),
            })
            .collect()
    }

    /// The full training forward pass for one epoch.
    pub fn training_forward<'t>(&self, tape: &'t Tape, store: &ParamStore) -> EpochForward<'t> {
        assert!(!self.train_posts.is_empty(), "empty training split");
        let leaves = leaf_map(tape, store);
        let reprs: Vec<TextReprs<'t>> = self
            .train_posts
            .iter()
            .map(|p| self.text_reprs(tape, &leaves, p, true))
            .collect();

        let (gae_term, graph_parts): (Option<Var<'t>>, Vec<Var<'t>>) = match &self.graph {
            Some(bundle) => {
                let features = self.node_features(tape, &leaves, &reprs);
                let layers = self.sage_layers(&leaves);
                let z = gae::encode(
                    features,
                    &bundle.neighbor_mean,
                    &layers,
                    self.cfg.gae_l2norm,
                );
                let a_hat = gae::decode(z);
                let loss = gae::gae_loss(bundle.a_target.clone(), a_hat, self.cfg.gae_loss_sum);
                let parts = (0..self.train_posts.len())
                    .map(|i| z.gather_rows(Rc::new(vec![i])))
                    .collect();
                (Some(loss), parts)
            }
            None => (None, reprs.iter().map(|r| r.pool).collect()),
        };

        let head_vars = self.head_vars(&leaves);
        let mut scores = Vec::with_capacity(self.train_posts.len());
        let mut predictions = Vec::with_capacity(self.train_posts.len());
        for (i, repr) in reprs.iter().enumerate() {
            let t_f = head::fuse(graph_parts[i], repr.t_l);
            let (score, prediction) = head::predict(t_f, head_vars, self.cfg.head);
            scores.push(score);
            predictions.push(prediction);
        }
        let gts: Vec<&std::collections::BTreeSet<usize>> = self
            .train_posts
            .iter()
            .map(|p| &p.clean.tag_indices)
            .collect();
        let hr = head::hr_loss(&scores, &gts, self.cfg.head);
        let total = match gae_term {
            Some(g) => head::total_loss(g, hr),
            None => hr,
        };
        EpochForward {
            total,
            gae: gae_term,
            hr,
            predictions,
            leaves,
        }
    }

    /// Scalar training loss under the given parameters. Used by the
    /// finite-difference oracle.
    pub fn loss_value(&self, store: &ParamStore) -> f64 {
        let tape = Tape::new();
        self.training_forward(&tape, store).total.scalar()
    }

    /// Evaluate posts under the current parameters. In-graph posts use
    /// their own node embedding; unseen posts attach inductively.
    pub fn evaluate_posts(&self, store: &ParamStore, posts: &[EvalPost]) -> Vec<Prediction> {
        let tape = Tape::new();
        let leaves = leaf_map(&tape, store);

        let ctx = self.graph.as_ref().map(|bundle| {
            let reprs: Vec<TextReprs> = self
                .train_posts
                .iter()
                .map(|p| self.text_reprs(&tape, &leaves, p, true))
                .collect();
            let features = self.node_features(&tape, &leaves, &reprs);
            let layers = self.sage_layers(&leaves);
            let states = gae::encode_with_states(
                features,
                &bundle.neighbor_mean,
                &layers,
                self.cfg.gae_l2norm,
            );
            let refreshed: Vec<Vec<f64>> = reprs
                .iter()
                .map(|r| r.pool.value().row(0).to_vec())
                .collect();
            (states, layers, Tensor::from_rows(&refreshed))
        });

        let head_vars = self.head_vars(&leaves);
        posts
            .iter()
            .map(|ep| {
                let repr = self.text_reprs(&tape, &leaves, &ep.input, false);
                let graph_part = match (&ctx, ep.node) {
                    (Some((states, _, _)), Some(node)) => states
                        .last()
                        .unwrap()
                        .gather_rows(Rc::new(vec![node])),
                    (Some((states, layers, refreshed)), None) => self.attach_embedding(
                        &tape,
                        &leaves,
                        states,
                        layers,
                        refreshed,
                        ep,
                        repr.pool,
                    ),
                    (None, _) => repr.pool,
                };
                let t_f = head::fuse(graph_part, repr.t_l);
                let (_, prediction) = head::predict(t_f, head_vars, self.cfg.head);
                prediction
            })
            .collect()
    }

    /// Run the virtual node through the encoder layers against the frozen
    /// graph's layer states.
    #[allow(clippy::too_many_arguments)]
    fn attach_embedding<'t>(
        &self,
        tape: &'t Tape,
        leaves: &LeafMap<'t>,
        states: &[Var<'t>],
        layers: &[SageLayerVars<'t>],
        refreshed: &Tensor,
        ep: &EvalPost,
        feat: Var<'t>,
    ) -> Var<'t> {
        let bundle = self.graph.as_ref().expect("graph present");
        let feat_row = feat.value().row(0).to_vec();
        let attachment = attach_post(
            &bundle.graph,
            &ep.input.clean,
            &feat_row,
            refreshed,
            &self.cfg.graph,
        );

        // An author absent from the graph behaves as an isolated user node:
        // precompute its state chain (zero neighborhood every layer).
        let needs_unseen = attachment
            .entries
            .iter()
            .any(|(n, _)| matches!(n, Neighbor::UnseenUser(_)));
        let unseen_chain: Vec<Var<'t>> = if needs_unseen {
            let mut chain = Vec::with_capacity(layers.len() + 1);
            let first: Var<'t> = match &ep.user_row_override {
                Some(row) => tape.constant(row.clone()),
                None => {
                    let u = ep.input.clean.user_index;
                    leaf(leaves, "embed.user").gather_rows(Rc::new(vec![u]))
                }
            };
            chain.push(first);
            for layer in layers {
                let prev = *chain.last().unwrap();
                let (_, d_prev) = prev.shape();
                let zero = tape.constant(Tensor::zeros(1, d_prev));
                let mut h = prev.concat_cols(zero).matmul_nt(layer.w).add_row(layer.b).tanh();
                if self.cfg.gae_l2norm {
                    h = h.l2_normalize_rows();
                }
                chain.push(h);
            }
            chain
        } else {
            Vec::new()
        };

        let weights: Vec<f64> = attachment.entries.iter().map(|&(_, w)| w).collect();
        let total: f64 = weights.iter().sum();

        let mut h = feat;
        for (k, layer) in layers.iter().enumerate() {
            let (_, d_prev) = h.shape();
            let m = if attachment.entries.is_empty() || total.abs() < 1e-12 {
                tape.constant(Tensor::zeros(1, d_prev))
            } else {
                let parts: Vec<Var<'t>> = attachment
                    .entries
                    .iter()
                    .map(|&(n, _)| match n {
                        Neighbor::Node(node) => states[k].gather_rows(Rc::new(vec![node])),
                        Neighbor::UnseenUser(_) => unseen_chain[k],
                    })
                    .collect();
                let stacked = concat_rows(tape, &parts);
                let mix: Vec<f64> = weights.iter().map(|w| w / total).collect();
                tape.constant(Tensor::row_vector(mix)).matmul(stacked)
            };
            let mut next = h.concat_cols(m).matmul_nt(layer.w).add_row(layer.b).tanh();
            if self.cfg.gae_l2norm {
                next = next.l2_normalize_rows();
            }
            h = next;
        }
        h
    }
}

/// One forward pass over the training split.
pub struct EpochForward<'t> {
    pub total: Var<'t>,
    pub gae: Option<Var<'t>>,
    pub hr: Var<'t>,
    /// Per training post, in split order.
    pub predictions: Vec<Prediction>,
    /// Parameter leaves, for gradient extraction.
    pub leaves: BTreeMap<String, Var<'t>>,
}

/// A post to evaluate: its inputs plus its training-graph node when it was
/// part of the training split.
pub struct EvalPost {
    pub input: PostInput,
    pub node: Option<usize>,
    /// Feature row for an author outside the checkpoint vocabulary
    /// (ad-hoc inference).
    pub user_row_override: Option<Tensor>,
}

/// Losses and training-split predictions of one gradient step's forward.
pub struct StepOutcome {
    pub total: f64,
    pub gae: f64,
    pub hr: f64,
    pub predictions: Vec<Prediction>,
}

/// Run one training forward/backward and load gradients into the store.
pub fn backward_into_store(model: &Model, store: &mut ParamStore) -> Result<StepOutcome> {
    let tape = Tape::new();
    let fwd = model.training_forward(&tape, store);
    let total = fwd.total.scalar();
    if !total.is_finite() {
        return Err(Error::numeric(format!("training loss is {total}")));
    }
    let grads = tape.backward(fwd.total);
    let incoming: BTreeMap<String, Tensor> = fwd
        .leaves
        .iter()
        .map(|(name, var)| (name.clone(), grads.get_or_zeros(*var)))
        .collect();
    store.set_grads(incoming)?;
    Ok(StepOutcome {
        total,
        gae: fwd.gae.map(|g| g.scalar()).unwrap_or(0.0),
        hr: fwd.hr.scalar(),
        predictions: fwd.predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ComponentVariant, GraphConfig, HeadKind, OptimizerKind};
    use crate::encoder::HashEmbedder;
    use crate::langid::LangCode;
    use crate::synth;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            seed: 11,
            epochs: 5,
            lr: 0.05,
            dim: 6,
            seq_len: 8,
            hashtag_cap: 0,
            min_tag_freq: 1,
            graph: GraphConfig {
                sim_threshold: -1.0,
                topk: 4,
                exact_paper_mode: false,
            },
            gae_layers: 2,
            gae_dim: 5,
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

    fn tiny_corpus() -> (Vec<CleanPost>, Vocab) {
        let spec = synth::SynthSpec {
            n_users: 3,
            n_posts: 8,
            languages: vec![LangCode::Hi, LangCode::Ta, LangCode::En],
            n_hashtags: 5,
            seed: 3,
        };
        let raws = synth::generate(&spec).unwrap();
        let corpus = crate::corpus::ingest(
            &raws,
            &crate::langid::LangIdentifier::builtin(),
            1,
            0,
            Default::default(),
        )
        .unwrap();
        (corpus.posts, corpus.vocab)
    }

    #[test]
    fn variant_wiring_controls_registration() {
        let cfg = tiny_config();
        let (posts, vocab) = tiny_corpus();
        let _ = posts;

        let full = init_store(&cfg, &vocab, Variant::full());
        for name in [
            "attn.W_l", "attn.b_l", "attn.W_u", "attn.b_u", "attn.W_w", "attn.b_w", "attn.c_w",
            "embed.lang", "embed.user", "gae.W1", "gae.b1", "gae.W2", "gae.b2", "head.W", "head.b",
        ] {
            assert!(full.contains(name), "{name} missing from full model");
        }

        let na = init_store(
            &cfg,
            &vocab,
            Variant {
                attention: AttnVariant::None,
                component: ComponentVariant::Full,
            },
        );
        assert!(!na.names().iter().any(|n| n.starts_with("attn.")));
        assert!(na.contains("gae.W1"));
        assert!(na.contains("embed.user"));

        let fr = init_store(
            &cfg,
            &vocab,
            Variant {
                attention: AttnVariant::Full,
                component: ComponentVariant::FrOnly,
            },
        );
        assert!(!fr.names().iter().any(|n| n.starts_with("gae.")));
        assert!(!fr.contains("embed.user"));
        // Head input is pool (dim) + t_l (dim).
        assert_eq!(fr.get("head.W").shape().1, 2 * cfg.dim);
    }

    #[test]
    fn training_forward_losses_are_finite_and_composed() {
        let cfg = tiny_config();
        let (posts, vocab) = tiny_corpus();
        let provider = HashEmbedder::new(cfg.dim, cfg.seed);
        let (model, store) = Model::build(&cfg, Variant::full(), vocab, &posts, Box::new(provider.clone())).unwrap();
        let tape = Tape::new();
        let fwd = model.training_forward(&tape, &store);
        let total = fwd.total.scalar();
        let gae = fwd.gae.unwrap().scalar();
        let hr = fwd.hr.scalar();
        assert!(total.is_finite() && gae > 0.0 && hr > 0.0);
        assert!((total - (gae + hr)).abs() < 1e-12);
        assert_eq!(fwd.predictions.len(), model.train_posts.len());
        for p in &fwd.predictions {
            let s: f64 = p.probs.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fr_only_total_is_hr_alone() {
        let cfg = tiny_config();
        let (posts, vocab) = tiny_corpus();
        let provider = HashEmbedder::new(cfg.dim, cfg.seed);
        let variant = Variant {
            attention: AttnVariant::Full,
            component: ComponentVariant::FrOnly,
        };
        let (model, store) = Model::build(&cfg, variant, vocab, &posts, Box::new(provider.clone())).unwrap();
        let tape = Tape::new();
        let fwd = model.training_forward(&tape, &store);
        assert!(fwd.gae.is_none());
        assert_eq!(fwd.total.scalar(), fwd.hr.scalar());
    }

    #[test]
    fn na_variant_gradients_exclude_attention() {
        let mut cfg = tiny_config();
        cfg.user_node_init = UserNodeInit::MeanUga;
        let (posts, vocab) = tiny_corpus();
        let provider = HashEmbedder::new(cfg.dim, cfg.seed);
        let variant = Variant {
            attention: AttnVariant::None,
            component: ComponentVariant::Full,
        };
        let (model, mut store) = Model::build(&cfg, variant, vocab, &posts, Box::new(provider.clone())).unwrap();
        backward_into_store(&model, &mut store).unwrap();
        for name in store.names() {
            assert!(!name.starts_with("attn."), "attention param {name} present");
        }
    }

    #[test]
    fn evaluate_matches_training_predictions_for_train_posts() {
        let cfg = tiny_config();
        let (posts, vocab) = tiny_corpus();
        let provider = HashEmbedder::new(cfg.dim, cfg.seed);
        let (model, store) = Model::build(&cfg, Variant::full(), vocab, &posts, Box::new(provider.clone())).unwrap();
        let tape = Tape::new();
        let fwd = model.training_forward(&tape, &store);

        let eval_posts: Vec<EvalPost> = model
            .train_posts
            .iter()
            .enumerate()
            .map(|(i, p)| EvalPost {
                input: p.clone(),
                node: Some(i),
                user_row_override: None,
            })
            .collect();
        let preds = model.evaluate_posts(&store, &eval_posts);
        for (a, b) in fwd.predictions.iter().zip(&preds) {
            for (x, y) in a.probs.iter().zip(&b.probs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unseen_post_evaluation_is_deterministic() {
        let cfg = tiny_config();
        let (posts, vocab) = tiny_corpus();
        let provider = HashEmbedder::new(cfg.dim, cfg.seed);
        let (train, held) = posts.split_at(posts.len() - 2);
        let (model, store) = Model::build(&cfg, Variant::full(), vocab.clone(), train, Box::new(provider.clone())).unwrap();
        let eval_posts: Vec<EvalPost> = held
            .iter()
            .map(|p| EvalPost {
                input: prepare_post(p, &provider, &cfg, &vocab),
                node: None,
                user_row_override: None,
            })
            .collect();
        let a = model.evaluate_posts(&store, &eval_posts);
        let b = model.evaluate_posts(&store, &eval_posts);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.probs, y.probs);
            assert_eq!(x.ranked, y.ranked);
        }
    }
}
