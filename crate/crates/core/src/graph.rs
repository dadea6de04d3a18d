//! The heterogeneous user-tweet graph: family-gated tweet-tweet similarity
//! edges, weight-1 authorship edges, and inductive attachment of unseen
//! posts.

use crate::autodiff::Csr;
use crate::config::GraphConfig;
use crate::corpus::CleanPost;
use crate::error::{Error, Result};
use crate::langid::Family;
use crate::rng::fnv1a64;
use crate::tensor::Tensor;
use std::collections::BTreeMap;
use std::io::Write;

/// Tagged node identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeId {
    Tweet(usize),
    User(usize),
}

/// Immutable heterogeneous graph. Node order is tweets (input post order)
/// followed by users (ascending user vocabulary index).
#[derive(Clone, Debug)]
pub struct HeteroGraph {
    n_tweets: usize,
    /// User vocabulary index per user node, ascending.
    user_rows: Vec<usize>,
    /// user vocabulary index -> node index.
    user_node: BTreeMap<usize, usize>,
    /// Per-node sorted (neighbor, weight) lists; symmetric.
    adj: Vec<Vec<(usize, f64)>>,
    /// Initial node features, one D-row per node.
    features: Tensor,
    /// Family tag per tweet node.
    families: Vec<Family>,
    /// Author user node per tweet node.
    authors: Vec<usize>,
}

impl HeteroGraph {
    pub fn n_tweets(&self) -> usize {
        self.n_tweets
    }

    pub fn n_users(&self) -> usize {
        self.user_rows.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_tweets + self.user_rows.len()
    }

    pub fn node_id(&self, node: usize) -> NodeId {
        if node < self.n_tweets {
            NodeId::Tweet(node)
        } else {
            NodeId::User(self.user_rows[node - self.n_tweets])
        }
    }

    /// Node index of a user vocabulary index, if the user is in the graph.
    pub fn user_node(&self, user_index: usize) -> Option<usize> {
        self.user_node.get(&user_index).copied()
    }

    /// User vocabulary indices in node order.
    pub fn user_rows(&self) -> &[usize] {
        &self.user_rows
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adj[node]
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn family(&self, tweet: usize) -> Family {
        self.families[tweet]
    }

    pub fn author_node(&self, tweet: usize) -> usize {
        self.authors[tweet]
    }

    /// Edge weight between two nodes, if present.
    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adj[a]
            .binary_search_by(|(n, _)| n.cmp(&b))
            .ok()
            .map(|i| self.adj[a][i].1)
    }

    /// All edges as (src, dst, weight) with src < dst.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (a, nbrs) in self.adj.iter().enumerate() {
            for &(b, w) in nbrs {
                if a < b {
                    out.push((a, b, w));
                }
            }
        }
        out
    }

    /// Dense target adjacency with edge weights off-diagonal and ones on the
    /// diagonal.
    pub fn target_adjacency(&self) -> Tensor {
        let n = self.n_nodes();
        let mut a = Tensor::zeros(n, n);
        for i in 0..n {
            a.set(i, i, 1.0);
            for &(j, w) in &self.adj[i] {
                a.set(i, j, w);
            }
        }
        a
    }

    /// Row-normalized neighbor-averaging matrix: row v holds w_vu / sum(w)
    /// over the neighbors of v (or 1/deg with `unweighted`). Isolated nodes
    /// get an empty row, which aggregates to zero.
    pub fn neighbor_mean_matrix(&self, unweighted: bool) -> Csr {
        let n = self.n_nodes();
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|v| {
                let nbrs = &self.adj[v];
                if nbrs.is_empty() {
                    return Vec::new();
                }
                if unweighted {
                    let inv = 1.0 / nbrs.len() as f64;
                    nbrs.iter().map(|&(u, _)| (u, inv)).collect()
                } else {
                    let total: f64 = nbrs.iter().map(|&(_, w)| w).sum();
                    if total == 0.0 {
                        return Vec::new();
                    }
                    nbrs.iter().map(|&(u, w)| (u, w / total)).collect()
                }
            })
            .collect();
        Csr::from_rows(n, &rows)
    }

    /// FNV-1a digest over node counts and the canonical edge list.
    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(self.n_tweets as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.n_users() as u64).to_le_bytes());
        for &u in &self.user_rows {
            bytes.extend_from_slice(&(u as u64).to_le_bytes());
        }
        for (a, b, w) in self.edges() {
            bytes.extend_from_slice(&(a as u64).to_le_bytes());
            bytes.extend_from_slice(&(b as u64).to_le_bytes());
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        fnv1a64(&bytes)
    }

    /// Debug CSV dump: src_kind,src_idx,dst_kind,dst_idx,weight.
    pub fn write_edges_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "src_kind,src_idx,dst_kind,dst_idx,weight")?;
        for (a, b, weight) in self.edges() {
            let (ak, ai) = kind_idx(self.node_id(a));
            let (bk, bi) = kind_idx(self.node_id(b));
            writeln!(w, "{ak},{ai},{bk},{bi},{weight}")?;
        }
        Ok(())
    }

    /// Panic if any structural invariant is violated. Test support.
    pub fn assert_invariants(&self) {
        for (a, nbrs) in self.adj.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(b, w) in nbrs {
                assert_ne!(a, b, "self loop at node {a}");
                assert!(prev.is_none_or(|p| p < b), "unsorted adjacency");
                prev = Some(b);
                assert_eq!(
                    self.weight(b, a),
                    Some(w),
                    "asymmetric edge {a}-{b}"
                );
                match (self.node_id(a), self.node_id(b)) {
                    (NodeId::Tweet(i), NodeId::Tweet(j)) => {
                        assert_eq!(
                            self.family(i),
                            self.family(j),
                            "cross-family edge {i}-{j}"
                        );
                        assert!((-1.0..=1.0).contains(&w), "tweet-tweet weight {w}");
                    }
                    (NodeId::User(_), NodeId::User(_)) => panic!("user-user edge {a}-{b}"),
                    _ => assert_eq!(w, 1.0, "user-tweet weight {w}"),
                }
            }
        }
        for tweet in 0..self.n_tweets {
            let user_edges: Vec<usize> = self.adj[tweet]
                .iter()
                .filter(|&&(n, _)| n >= self.n_tweets)
                .map(|&(n, _)| n)
                .collect();
            assert_eq!(user_edges.len(), 1, "tweet {tweet} author degree");
            assert_eq!(user_edges[0], self.authors[tweet], "author mismatch");
        }
    }
}

fn kind_idx(id: NodeId) -> (&'static str, usize) {
    match id {
        NodeId::Tweet(i) => ("tweet", i),
        NodeId::User(j) => ("user", j),
    }
}

/// Cosine similarity. Zero-norm inputs are a caller bug.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = crate::tensor::norm(a);
    let nb = crate::tensor::norm(b);
    assert!(na > 0.0 && nb > 0.0, "cosine of zero vector");
    (crate::tensor::dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Build the graph over training posts.
///
/// `tweet_feats` holds one feature row per post (word-pooled tweet features);
/// `user_feats` maps user vocabulary index to that user's node feature.
pub fn build_graph(
    posts: &[CleanPost],
    tweet_feats: &Tensor,
    user_feats: &dyn Fn(usize) -> Vec<f64>,
    cfg: &GraphConfig,
) -> Result<HeteroGraph> {
    assert_eq!(posts.len(), tweet_feats.rows(), "one feature row per post");
    let n_tweets = posts.len();
    let dim = tweet_feats.cols();

    let mut user_rows: Vec<usize> = posts.iter().map(|p| p.user_index).collect();
    user_rows.sort_unstable();
    user_rows.dedup();
    let user_node: BTreeMap<usize, usize> = user_rows
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, n_tweets + i))
        .collect();

    let n_nodes = n_tweets + user_rows.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];

    // Candidate similarity edges, family-gated.
    let mut candidates: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_tweets];
    for i in 0..n_tweets {
        for j in i + 1..n_tweets {
            if posts[i].lang.family() != posts[j].lang.family() {
                continue;
            }
            let sim = cosine(tweet_feats.row(i), tweet_feats.row(j));
            if cfg.exact_paper_mode || sim >= cfg.sim_threshold {
                candidates[i].push((j, sim));
                candidates[j].push((i, sim));
            }
        }
    }

    // Per-endpoint top-k cap; an edge survives if either endpoint keeps it.
    let mut keep: Vec<(usize, usize, f64)> = Vec::new();
    if cfg.exact_paper_mode {
        for (i, cands) in candidates.iter().enumerate() {
            for &(j, w) in cands {
                if i < j {
                    keep.push((i, j, w));
                }
            }
        }
    } else {
        let mut kept_pairs: std::collections::BTreeSet<(usize, usize)> =
            std::collections::BTreeSet::new();
        for (i, cands) in candidates.iter().enumerate() {
            let mut ranked = cands.clone();
            // Higher weight first, then lower tweet index.
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for &(j, _) in ranked.iter().take(cfg.topk) {
                kept_pairs.insert((i.min(j), i.max(j)));
            }
        }
        for (i, j) in kept_pairs {
            let w = candidates[i]
                .iter()
                .find(|&&(n, _)| n == j)
                .map(|&(_, w)| w)
                .unwrap();
            keep.push((i, j, w));
        }
    }
    for (i, j, w) in keep {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }

    // Authorship edges, weight 1.
    let mut authors = Vec::with_capacity(n_tweets);
    for (i, post) in posts.iter().enumerate() {
        let &unode = user_node.get(&post.user_index).ok_or_else(|| {
            Error::data(format!("post {} author missing from vocabulary", post.id))
        })?;
        adj[i].push((unode, 1.0));
        adj[unode].push((i, 1.0));
        authors.push(unode);
    }

    for nbrs in &mut adj {
        nbrs.sort_by_key(|&(n, _)| n);
    }

    // Node features: tweets first, then users.
    let mut features = Tensor::zeros(n_nodes, dim);
    for i in 0..n_tweets {
        features.row_mut(i).copy_from_slice(tweet_feats.row(i));
    }
    for (offset, &u) in user_rows.iter().enumerate() {
        let f = user_feats(u);
        assert_eq!(f.len(), dim, "user feature dimension");
        features.row_mut(n_tweets + offset).copy_from_slice(&f);
    }

    Ok(HeteroGraph {
        n_tweets,
        user_rows,
        user_node,
        adj,
        features,
        families: posts.iter().map(|p| p.lang.family()).collect(),
        authors,
    })
}

/// A neighbor of a virtually attached post.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Neighbor {
    /// An existing graph node.
    Node(usize),
    /// The post's author when absent from the graph: behaves as an isolated
    /// user node carrying this user vocabulary index.
    UnseenUser(usize),
}

/// Neighborhood view of a post attached to a frozen graph.
#[derive(Clone, Debug)]
pub struct Attachment {
    pub entries: Vec<(Neighbor, f64)>,
}

/// Attach an unseen post: a weight-1 edge to its author plus up to `topk`
/// same-family training tweets with cosine at or above the threshold,
/// measured against `tweet_feats` (one row per graph tweet). The graph
/// itself is not modified.
pub fn attach_post(
    graph: &HeteroGraph,
    post: &CleanPost,
    feat: &[f64],
    tweet_feats: &Tensor,
    cfg: &GraphConfig,
) -> Attachment {
    assert_eq!(tweet_feats.rows(), graph.n_tweets());
    let mut entries = Vec::new();
    match graph.user_node(post.user_index) {
        Some(node) => entries.push((Neighbor::Node(node), 1.0)),
        None => entries.push((Neighbor::UnseenUser(post.user_index), 1.0)),
    }

    let family = post.lang.family();
    let mut sims: Vec<(usize, f64)> = (0..graph.n_tweets())
        .filter(|&t| graph.family(t) == family)
        .map(|t| (t, cosine(feat, tweet_feats.row(t))))
        .filter(|&(_, s)| cfg.exact_paper_mode || s >= cfg.sim_threshold)
        .collect();
    sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    if !cfg.exact_paper_mode {
        sims.truncate(cfg.topk);
    }
    for (t, s) in sims {
        entries.push((Neighbor::Node(t), s));
    }
    Attachment { entries }
}

/// Quadratic reference builder used to validate the production path: all
/// same-family pairs, no threshold, no top-k. Mirrors the all-pairs
/// construction directly.
pub fn brute_force_reference(
    posts: &[CleanPost],
    tweet_feats: &Tensor,
) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    for i in 0..posts.len() {
        for j in 0..posts.len() {
            if i >= j {
                continue;
            }
            if posts[i].lang.family() == posts[j].lang.family() {
                edges.push((i, j, cosine(tweet_feats.row(i), tweet_feats.row(j))));
            }
        }
    }
    edges
}
