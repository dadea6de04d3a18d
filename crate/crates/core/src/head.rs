//! Hashtag ranking head: fuse the graph-updated tweet embedding with the
//! language-guided representation, score every hashtag, rank, and compute
//! the recommendation and joint losses.

use crate::autodiff::Var;
use crate::config::HeadKind;
use std::collections::BTreeSet;
use std::rc::Rc;

/// Probability floor inside the log of the recommendation loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tape handles for the head parameters: W of shape |H| x (D_gnn + D) and a
/// 1 x |H| bias.
#[derive(Clone, Copy)]
pub struct HeadVars<'t> {
    pub w: Var<'t>,
    pub b: Var<'t>,
}

/// Scores over the hashtag vocabulary plus the derived ranking.
#[derive(Clone, Debug)]
pub struct Prediction {
    /// Per-hashtag scores; a probability distribution under the softmax
    /// head, independent sigmoid activations otherwise.
    pub probs: Vec<f64>,
    /// Hashtag indices by descending score, ties broken by ascending index.
    pub ranked: Vec<usize>,
}

impl Prediction {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let ranked = rank_desc(&probs);
        Prediction { probs, ranked }
    }

    /// Top-k recommended set RH.
    pub fn top_k(&self, k: usize) -> BTreeSet<usize> {
        self.ranked.iter().take(k).copied().collect()
    }
}

/// Argsort by descending value with deterministic tie-breaking by ascending
/// index.
pub fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("non-finite score")
            .then(a.cmp(&b))
    });
    idx
}

/// Concatenate the graph part and the language-guided part, graph first.
pub fn fuse<'t>(t_graph: Var<'t>, t_l: Var<'t>) -> Var<'t> {
    t_graph.concat_cols(t_l)
}

/// Raw hashtag scores: W . t_f + b as a 1 x |H| row.
pub fn logits<'t>(t_f: Var<'t>, params: HeadVars<'t>) -> Var<'t> {
    t_f.matmul_nt(params.w).add(params.b)
}

/// Score all hashtags for one fused representation.
///
/// Returns the score node the loss consumes (softmax probabilities, or raw
/// logits for the sigmoid head) along with the derived ranking.
pub fn predict<'t>(t_f: Var<'t>, params: HeadVars<'t>, head: HeadKind) -> (Var<'t>, Prediction) {
    let raw = logits(t_f, params);
    match head {
        HeadKind::Softmax => {
            let sm = raw.softmax();
            let probs = sm.value().data().to_vec();
            (sm, Prediction::from_probs(probs))
        }
        HeadKind::Sigmoid => {
            let probs = raw.sigmoid().value().data().to_vec();
            (raw, Prediction::from_probs(probs))
        }
    }
}

/// Recommendation loss over a batch: mean over posts of the summed negative
/// log probability of every ground-truth hashtag.
///
/// For the sigmoid head the per-post term is binary cross entropy over the
/// full vocabulary computed on the raw logits, which the caller passes in
/// place of probabilities.
pub fn hr_loss<'t>(
    per_post_scores: &[Var<'t>],
    ground_truth: &[&BTreeSet<usize>],
    head: HeadKind,
) -> Var<'t> {
    assert_eq!(per_post_scores.len(), ground_truth.len());
    assert!(!per_post_scores.is_empty(), "loss over an empty batch");
    let mut total: Option<Var<'t>> = None;
    for (scores, gt) in per_post_scores.iter().zip(ground_truth) {
        assert!(!gt.is_empty(), "empty ground-truth hashtag set");
        let idx = Rc::new(gt.iter().copied().collect::<Vec<usize>>());
        let term = match head {
            HeadKind::Softmax => scores.neg_log_gather(idx, PROB_FLOOR),
            HeadKind::Sigmoid => scores.bce_with_logits(idx),
        };
        total = Some(match total {
            Some(acc) => acc.add(term),
            None => term,
        });
    }
    total.unwrap().scale(1.0 / per_post_scores.len() as f64)
}

/// Joint objective: unweighted sum of the reconstruction and recommendation
/// losses.
pub fn total_loss<'t>(l_gae: Var<'t>, l_hr: Var<'t>) -> Var<'t> {
    l_gae.add(l_hr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::gradcheck::{check_scalar_fn, GradCheck};
    use crate::rng::SplitMix64;
    use crate::tensor::Tensor;

    fn rand_tensor(rows: usize, cols: usize, rng: &mut SplitMix64) -> Tensor {
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.next_unit()).collect())
    }

    #[test]
    fn fuse_orders_graph_part_first() {
        let tape = Tape::new();
        let g = tape.leaf(Tensor::row_vector(vec![1.0, 2.0, 3.0, 4.0]));
        let l = tape.leaf(Tensor::row_vector(vec![5.0, 6.0, 7.0, 8.0]));
        let f = fuse(g, l).value();
        assert_eq!(f.shape(), (1, 8));
        assert_eq!(&f.data()[..4], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(&f.data()[4..], &[5.0, 6.0, 7.0, 8.0]);

        let z = tape.leaf(Tensor::zeros(1, 4));
        let f2 = fuse(g, z).value();
        assert!(f2.data()[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_prediction_under_zero_parameters() {
        let tape = Tape::new();
        let t_f = tape.leaf(Tensor::row_vector(vec![0.4, -0.2, 0.9]));
        let params = HeadVars {
            w: tape.leaf(Tensor::zeros(5, 3)),
            b: tape.leaf(Tensor::zeros(1, 5)),
        };
        let (_, pred) = predict(t_f, params, HeadKind::Softmax);
        for p in &pred.probs {
            assert!((p - 0.2).abs() < 1e-12);
        }
        assert_eq!(pred.ranked, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn softmax_hand_example() {
        // Logits (1,2,3) -> (0.09003, 0.24473, 0.66524), ranked (2,1,0).
        let tape = Tape::new();
        let t_f = tape.leaf(Tensor::row_vector(vec![1.0]));
        let params = HeadVars {
            w: tape.leaf(Tensor::from_vec(3, 1, vec![1.0, 2.0, 3.0])),
            b: tape.leaf(Tensor::zeros(1, 3)),
        };
        let (_, pred) = predict(t_f, params, HeadKind::Softmax);
        assert!((pred.probs[0] - 0.09003).abs() < 1e-5);
        assert!((pred.probs[1] - 0.24473).abs() < 1e-5);
        assert!((pred.probs[2] - 0.66524).abs() < 1e-5);
        assert_eq!(pred.ranked, vec![2, 1, 0]);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::row_vector(vec![0.1, -0.5, 2.0, 0.7]));
        let y = x.softmax().value();
        let shifted = tape.leaf(Tensor::row_vector(vec![100.1, 99.5, 102.0, 100.7]));
        let y2 = shifted.softmax().value();
        for i in 0..4 {
            assert!((y.data()[i] - y2.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn hr_loss_examples() {
        let tape = Tape::new();

        // Probability 1 on the single ground-truth tag: zero loss.
        let sure = tape.leaf(Tensor::row_vector(vec![1.0, 0.0, 0.0]));
        let gt: BTreeSet<usize> = [0].into_iter().collect();
        let loss = hr_loss(&[sure], &[&gt], HeadKind::Softmax).scalar();
        assert!(loss.abs() < 1e-12);

        // Uniform over 4 tags, two ground-truth tags: 2 ln 4.
        let uniform = tape.leaf(Tensor::row_vector(vec![0.25; 4]));
        let gt2: BTreeSet<usize> = [0, 1].into_iter().collect();
        let loss = hr_loss(&[uniform], &[&gt2], HeadKind::Softmax).scalar();
        assert!((loss - 2.0 * 4f64.ln()).abs() < 1e-12);
        assert!((loss - 2.77259).abs() < 1e-5);

        // Nonnegative for arbitrary distributions.
        let mut rng = SplitMix64::new(3);
        for _ in 0..50 {
            let logits = tape.leaf(rand_tensor(1, 6, &mut rng));
            let y = logits.softmax();
            let gt: BTreeSet<usize> = [rng.next_below(6)].into_iter().collect();
            assert!(hr_loss(&[y], &[&gt], HeadKind::Softmax).scalar() >= 0.0);
        }
    }

    #[test]
    fn batch_mean_over_posts() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::row_vector(vec![0.5, 0.5]));
        let b = tape.leaf(Tensor::row_vector(vec![0.25, 0.75]));
        let gt_a: BTreeSet<usize> = [0].into_iter().collect();
        let gt_b: BTreeSet<usize> = [1].into_iter().collect();
        let loss = hr_loss(&[a, b], &[&gt_a, &gt_b], HeadKind::Softmax).scalar();
        let expect = (-(0.5f64.ln()) + -(0.75f64.ln())) / 2.0;
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn total_loss_is_commutative_addition() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::from_vec(1, 1, vec![0.25]));
        let b = tape.leaf(Tensor::from_vec(1, 1, vec![2.77259]));
        let z = tape.leaf(Tensor::from_vec(1, 1, vec![0.0]));
        assert_eq!(total_loss(z, z).scalar(), 0.0);
        assert!((total_loss(a, b).scalar() - 3.02259).abs() < 1e-10);
        assert_eq!(total_loss(a, b).scalar(), total_loss(b, a).scalar());
    }

    #[test]
    fn hits_monotone_in_k() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..100 {
            let n = 4 + rng.next_below(8);
            let probs: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let pred = Prediction::from_probs(probs);
            let gt: BTreeSet<usize> = (0..n).filter(|_| rng.next_f64() < 0.3).collect();
            let mut prev = 0;
            for k in 1..=n {
                let hits = pred.top_k(k).intersection(&gt).count();
                assert!(hits >= prev);
                prev = hits;
            }
        }
    }

    #[test]
    fn ranking_invariant_under_positive_rescaling() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..50 {
            let probs: Vec<f64> = (0..8).map(|_| rng.next_f64()).collect();
            let scale = 0.01 + 10.0 * rng.next_f64();
            let scaled: Vec<f64> = probs.iter().map(|p| p * scale).collect();
            assert_eq!(rank_desc(&probs), rank_desc(&scaled));
        }
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        let mut rng = SplitMix64::new(13);
        let check = GradCheck::default();
        for head in [HeadKind::Softmax, HeadKind::Sigmoid] {
            let t_g = rand_tensor(1, 3, &mut rng);
            let t_l = rand_tensor(1, 3, &mut rng);
            let w = rand_tensor(5, 6, &mut rng);
            let b = rand_tensor(1, 5, &mut rng);
            let gt: BTreeSet<usize> = [1, 4].into_iter().collect();

            check_scalar_fn(
                &[t_g, t_l, w, b],
                |_, leaves| {
                    let t_f = fuse(leaves[0], leaves[1]);
                    let params = HeadVars {
                        w: leaves[2],
                        b: leaves[3],
                    };
                    let raw = logits(t_f, params);
                    let scores = match head {
                        HeadKind::Softmax => raw.softmax(),
                        HeadKind::Sigmoid => raw,
                    };
                    hr_loss(&[scores], &[&gt], head)
                },
                &check,
            );
        }
    }
}
