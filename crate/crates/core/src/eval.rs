//! Ranking metrics, K-sweeps, and the ablation runner.

use crate::config::{TrainConfig, Variant};
use crate::corpus::{Corpus, Splits};
use crate::error::{Error, Result};
use crate::head::Prediction;
use crate::model::{EvalPost, Model};
use crate::params::ParamStore;
use std::collections::BTreeSet;
use std::io::Write;

/// 1 when the recommended set shares at least one hashtag with the ground
/// truth.
pub fn hit_rate(gh: &BTreeSet<usize>, rh: &BTreeSet<usize>) -> f64 {
    assert!(!gh.is_empty(), "empty ground-truth set");
    if gh.intersection(rh).next().is_some() {
        1.0
    } else {
        0.0
    }
}

/// |GH intersect RH| / |RH|.
pub fn precision(gh: &BTreeSet<usize>, rh: &BTreeSet<usize>) -> f64 {
    assert!(!rh.is_empty(), "empty recommended set");
    gh.intersection(rh).count() as f64 / rh.len() as f64
}

/// |GH intersect RH| / |GH|.
pub fn recall(gh: &BTreeSet<usize>, rh: &BTreeSet<usize>) -> f64 {
    assert!(!gh.is_empty(), "empty ground-truth set");
    gh.intersection(rh).count() as f64 / gh.len() as f64
}

/// Harmonic mean with the 0/0 -> 0 rule.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// One table row: metrics at one K for one variant.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub variant: String,
    pub k: usize,
    pub hit_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Arithmetic mean of the four metrics over (prediction, ground truth)
/// pairs at one K.
pub fn metrics_at_k(
    predictions: &[Prediction],
    ground_truth: &[&BTreeSet<usize>],
    k: usize,
) -> (f64, f64, f64, f64) {
    assert_eq!(predictions.len(), ground_truth.len());
    assert!(!predictions.is_empty(), "metrics over an empty set");
    assert!(k >= 1, "K must be at least 1");
    let n = predictions.len() as f64;
    let (mut h, mut p, mut r, mut f) = (0.0, 0.0, 0.0, 0.0);
    for (pred, gh) in predictions.iter().zip(ground_truth) {
        let rh = pred.top_k(k);
        let pi = precision(gh, &rh);
        let ri = recall(gh, &rh);
        h += hit_rate(gh, &rh);
        p += pi;
        r += ri;
        f += f1(pi, ri);
    }
    (h / n, p / n, r / n, f / n)
}

/// Evaluate a model on posts for each K, one row per K.
pub fn evaluate(
    model: &Model,
    store: &ParamStore,
    posts: &[EvalPost],
    ks: &[usize],
    variant_label: &str,
) -> Result<Vec<MetricRow>> {
    if posts.is_empty() {
        return Err(Error::data("evaluation over an empty split"));
    }
    let n_tags = model.vocab.hashtags.len();
    for &k in ks {
        if k < 1 || k > n_tags {
            return Err(Error::config(format!(
                "K={k} outside [1, {n_tags}]"
            )));
        }
    }
    let predictions = model.evaluate_posts(store, posts);
    let gts: Vec<&BTreeSet<usize>> = posts.iter().map(|p| &p.input.clean.tag_indices).collect();
    Ok(ks
        .iter()
        .map(|&k| {
            let (h, p, r, f) = metrics_at_k(&predictions, &gts, k);
            MetricRow {
                variant: variant_label.to_string(),
                k,
                hit_rate: h,
                precision: p,
                recall: r,
                f1: f,
            }
        })
        .collect())
}

/// Wide table: variant,K,hit_rate,precision,recall,f1.
pub fn write_rows_csv(rows: &[MetricRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "variant,K,hit_rate,precision,recall,f1")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.variant, row.k, row.hit_rate, row.precision, row.recall, row.f1
        )?;
    }
    Ok(())
}

/// Long-format curves: model,K,metric,value.
pub fn write_curves_csv(rows: &[MetricRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "model,K,metric,value")?;
    for row in rows {
        for (metric, value) in [
            ("hit_rate", row.hit_rate),
            ("precision", row.precision),
            ("recall", row.recall),
            ("f1", row.f1),
        ] {
            writeln!(w, "{},{},{},{}", row.variant, row.k, metric, value)?;
        }
    }
    Ok(())
}

/// Audit dump: un-averaged per-post metrics at each K.
pub fn write_per_post_csv(
    model: &Model,
    store: &ParamStore,
    posts: &[EvalPost],
    ks: &[usize],
    w: &mut impl Write,
) -> Result<()> {
    let predictions = model.evaluate_posts(store, posts);
    writeln!(w, "post_id,K,hit,precision,recall,f1")?;
    for (post, pred) in posts.iter().zip(&predictions) {
        let gh = &post.input.clean.tag_indices;
        for &k in ks {
            let rh = pred.top_k(k);
            let p = precision(gh, &rh);
            let r = recall(gh, &rh);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                post.input.clean.id,
                k,
                hit_rate(gh, &rh),
                p,
                r,
                f1(p, r)
            )?;
        }
    }
    Ok(())
}

/// Train one model per ablation spec under an otherwise identical config and
/// evaluate each on the test split at K, labeling rows as requested.
/// Identical variants (the full model appears in both tables) are trained
/// once.
pub fn ablate(
    corpus: &Corpus,
    splits: &Splits,
    cfg: &TrainConfig,
    specs: &[(String, Variant)],
    k: usize,
) -> Result<Vec<MetricRow>> {
    if specs.is_empty() {
        return Err(Error::config("no ablation specs given"));
    }
    let mut cache: Vec<(Variant, crate::train::TrainedModel)> = Vec::new();
    let mut rows = Vec::new();
    for (label, variant) in specs {
        if !cache.iter().any(|(v, _)| v == variant) {
            log::info!("ablation: training variant {label}");
            let trained = crate::train::train(corpus, splits, cfg, *variant)?;
            cache.push((*variant, trained));
        }
        let trained = &cache.iter().find(|(v, _)| v == variant).unwrap().1;
        let eval_posts = trained.model.unseen_eval_posts(&splits.test);
        let mut r = evaluate(&trained.model, &trained.store, &eval_posts, &[k], label)?;
        rows.append(&mut r);
    }
    Ok(rows)
}

/// Brute-force oracle counterparts, kept deliberately separate from the
/// production metric implementations: explicit loops over membership tests.
pub mod oracle {
    use std::collections::BTreeSet;

    pub fn intersection_size(gh: &BTreeSet<usize>, rh: &BTreeSet<usize>) -> usize {
        let mut n = 0;
        for g in gh {
            for r in rh {
                if g == r {
                    n += 1;
                }
            }
        }
        n
    }

    pub fn hit_rate(gh: &BTreeSet<usize>, rh: &BTreeSet<usize>) -> f64 {
        std::cmp::min(intersection_size(gh, rh), 1) as f64
    }

    pub fn precision(gh: &BTreeSet<usize>, rh: &BTreeSet<usize>) -> f64 {
        intersection_size(gh, rh) as f64 / rh.len() as f64
    }

    pub fn recall(gh: &BTreeSet<usize>, rh: &BTreeSet<usize>) -> f64 {
        intersection_size(gh, rh) as f64 / gh.len() as f64
    }

    pub fn f1(p: f64, r: f64) -> f64 {
        if p == 0.0 && r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn set(items: &[usize]) -> BTreeSet<usize> {
        items.iter().copied().collect()
    }

    #[test]
    fn hand_examples() {
        let gh = set(&[0, 1, 2]);
        let rh = set(&[1, 3]);
        assert_eq!(hit_rate(&gh, &rh), 1.0);
        assert_eq!(precision(&gh, &rh), 0.5);
        assert!((recall(&gh, &rh) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f1(0.5, 1.0 / 3.0) - 0.4).abs() < 1e-12);

        assert_eq!(hit_rate(&gh, &set(&[5, 6])), 0.0);
        assert_eq!(hit_rate(&gh, &set(&[0, 1, 2, 9])), 1.0);

        // GH == RH.
        assert_eq!(precision(&gh, &gh), 1.0);
        assert_eq!(recall(&gh, &gh), 1.0);
        assert_eq!(f1(1.0, 1.0), 1.0);

        // Disjoint with the 0/0 -> 0 rule.
        let rh = set(&[7]);
        assert_eq!(f1(precision(&gh, &rh), recall(&gh, &rh)), 0.0);
    }

    #[test]
    fn matches_brute_force_oracle_exactly() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..1000 {
            let universe = 1 + rng.next_below(20);
            let gh: BTreeSet<usize> = (0..universe).filter(|_| rng.next_f64() < 0.4).collect();
            let rh: BTreeSet<usize> = (0..universe).filter(|_| rng.next_f64() < 0.4).collect();
            let gh = if gh.is_empty() { set(&[0]) } else { gh };
            let rh = if rh.is_empty() { set(&[1.min(universe - 1)]) } else { rh };

            assert_eq!(hit_rate(&gh, &rh), oracle::hit_rate(&gh, &rh));
            assert_eq!(precision(&gh, &rh), oracle::precision(&gh, &rh));
            assert_eq!(recall(&gh, &rh), oracle::recall(&gh, &rh));
            let (p, r) = (precision(&gh, &rh), recall(&gh, &rh));
            assert_eq!(f1(p, r), oracle::f1(oracle::precision(&gh, &rh), oracle::recall(&gh, &rh)));
        }
    }

    #[test]
    fn metrics_are_order_independent_and_monotone() {
        let mut rng = SplitMix64::new(9);
        let n_tags = 10;
        let predictions: Vec<Prediction> = (0..40)
            .map(|_| Prediction::from_probs((0..n_tags).map(|_| rng.next_f64()).collect()))
            .collect();
        let gts_owned: Vec<BTreeSet<usize>> = (0..40)
            .map(|_| {
                let mut s: BTreeSet<usize> =
                    (0..n_tags).filter(|_| rng.next_f64() < 0.3).collect();
                if s.is_empty() {
                    s.insert(rng.next_below(n_tags));
                }
                s
            })
            .collect();
        let gts: Vec<&BTreeSet<usize>> = gts_owned.iter().collect();

        // K = |H| makes recall 1 for every post.
        let (_, _, r, _) = metrics_at_k(&predictions, &gts, n_tags);
        assert!((r - 1.0).abs() < 1e-12);

        // Monotone in K: HR, R, and K*P.
        let mut prev = (0.0, 0.0, 0.0);
        for k in 1..=n_tags {
            let (h, p, r, _) = metrics_at_k(&predictions, &gts, k);
            assert!(h + 1e-12 >= prev.0);
            assert!(r + 1e-12 >= prev.1);
            assert!(k as f64 * p + 1e-12 >= prev.2);
            prev = (h, r, k as f64 * p);
        }

        // Permuting the posts changes no average.
        let (h1, p1, r1, f1_) = metrics_at_k(&predictions, &gts, 3);
        let mut order: Vec<usize> = (0..predictions.len()).collect();
        crate::rng::shuffle(&mut order, 77);
        let preds2: Vec<Prediction> = order.iter().map(|&i| predictions[i].clone()).collect();
        let gts2: Vec<&BTreeSet<usize>> = order.iter().map(|&i| gts[i]).collect();
        let (h2, p2, r2, f2) = metrics_at_k(&preds2, &gts2, 3);
        assert!((h1 - h2).abs() < 1e-12);
        assert!((p1 - p2).abs() < 1e-12);
        assert!((r1 - r2).abs() < 1e-12);
        assert!((f1_ - f2).abs() < 1e-12);
    }

    #[test]
    fn perfect_single_tag_model_scores_one_everywhere() {
        let predictions = vec![
            Prediction::from_probs(vec![0.9, 0.05, 0.05]),
            Prediction::from_probs(vec![0.1, 0.8, 0.1]),
        ];
        let gts_owned = [set(&[0]), set(&[1])];
        let gts: Vec<&BTreeSet<usize>> = gts_owned.iter().collect();
        let (h, p, r, f) = metrics_at_k(&predictions, &gts, 1);
        assert_eq!((h, p, r, f), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn csv_shapes() {
        let rows = vec![MetricRow {
            variant: "UGA+LGA".into(),
            k: 3,
            hit_rate: 1.0,
            precision: 0.5,
            recall: 0.75,
            f1: 0.6,
        }];
        let mut wide = Vec::new();
        write_rows_csv(&rows, &mut wide).unwrap();
        let text = String::from_utf8(wide).unwrap();
        assert!(text.starts_with("variant,K,hit_rate"));
        assert!(text.contains("UGA+LGA,3,1,0.5,0.75,0.6"));

        let mut long = Vec::new();
        write_curves_csv(&rows, &mut long).unwrap();
        let text = String::from_utf8(long).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("UGA+LGA,3,recall,0.75"));
    }
}
