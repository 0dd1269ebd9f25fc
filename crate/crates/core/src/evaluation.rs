//! Score-based evaluation of a trained model.

use serde::{Deserialize, Serialize};

use crate::complexity::{sigma_inf, FeatureBatch};
use crate::datasets::{Dataset, LabeledTestSet, UniversumSet};
use crate::error::{Error, Result};
use crate::models::{decide, Model, Score};

fn check_scores(name: &str, s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::UndefinedAuc(format!("no {name} scores")));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{name} scores")));
    }
    Ok(())
}

/// Twice the Mann-Whitney count: `Σ_{p,n} 2·[p > n] + [p = n]`.
fn twice_u(pos: &[f64], neg: &[f64]) -> u128 {
    let mut sorted = neg.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pos.iter()
        .map(|&p| {
            let below = sorted.partition_point(|&n| n < p);
            let at_or_below = sorted.partition_point(|&n| n <= p);
            (below + at_or_below) as u128
        })
        .sum()
}

/// Probability that a random positive outscores a random negative, ties
/// counted half.
pub fn auc_roc(scores_pos: &[f64], scores_neg: &[f64]) -> Result<f64> {
    check_scores("positive", scores_pos)?;
    check_scores("negative", scores_neg)?;
    let pairs = 2 * scores_pos.len() as u128 * scores_neg.len() as u128;
    Ok(twice_u(scores_pos, scores_neg) as f64 / pairs as f64)
}

/// ROC curve as `(fpr, tpr)` pairs, one per distinct score, from `(0, 0)`.
pub fn roc_points(scores_pos: &[f64], scores_neg: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_scores("positive", scores_pos)?;
    check_scores("negative", scores_neg)?;
    let mut all: Vec<(f64, bool)> = scores_pos
        .iter()
        .map(|&s| (s, true))
        .chain(scores_neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
    let (p, n) = (scores_pos.len() as f64, scores_neg.len() as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, &(s, positive)) in all.iter().enumerate() {
        if positive {
            tp += 1;
        } else {
            fp += 1;
        }
        if all.get(i + 1).is_none_or(|next| next.0 != s) {
            points.push((fp as f64 / n, tp as f64 / p));
        }
    }
    Ok(points)
}

/// `ξᵢ = [1 - f(xᵢ)]₊` per row.
pub fn margin_slacks(model: &Model, data: &Dataset) -> Result<Vec<f64>> {
    let s = model.scores(&data.x().view())?;
    Ok(s.iter().map(|v| (1.0 - v).max(0.0)).collect())
}

/// Train/universum correlation `Σ(∞)` on raw inputs and on the model's
/// penultimate-layer features.
pub fn correlation_diagnostic(model: &Model, data: &Dataset, univ: &UniversumSet) -> Result<(f64, f64)> {
    let raw = sigma_inf(&FeatureBatch::new(data.x().clone(), univ.x().clone())?)?;
    let zf = model.features(&data.x().view())?;
    let uf = model.features(&univ.x().view())?;
    let features = sigma_inf(&FeatureBatch::new(zf, uf)?)?;
    Ok((raw, features))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub accuracy: f64,
    pub tp_rate: f64,
    pub tn_rate: f64,
    pub threshold: f64,
    /// Slacks on the training set, when one was given.
    pub xi: Vec<f64>,
    pub sigma_inf_raw: Option<f64>,
    pub sigma_inf_features: Option<f64>,
}

/// Test scores split by label.
pub fn split_scores(model: &Model, test: &LabeledTestSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = model.scores(&test.x().view())?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (v, &y) in s.iter().zip(test.y()) {
        if y > 0 {
            pos.push(*v);
        } else {
            neg.push(*v);
        }
    }
    Ok((pos, neg))
}

pub fn evaluate(
    model: &Model,
    test: &LabeledTestSet,
    univ: Option<&UniversumSet>,
    train: Option<&Dataset>,
) -> Result<EvalReport> {
    let (pos, neg) = split_scores(model, test)?;
    let auc = auc_roc(&pos, &neg)?;
    let t = model.threshold();
    let tp = pos.iter().filter(|&&s| decide(Score(s), t) == 1).count();
    let tn = neg.iter().filter(|&&s| decide(Score(s), t) == -1).count();
    let xi = match train {
        Some(d) => margin_slacks(model, d)?,
        None => Vec::new(),
    };
    let (sigma_inf_raw, sigma_inf_features) = match (univ, train) {
        (Some(u), Some(d)) => {
            let (r, f) = correlation_diagnostic(model, d, u)?;
            (Some(r), Some(f))
        }
        _ => (None, None),
    };
    Ok(EvalReport {
        auc,
        accuracy: (tp + tn) as f64 / (pos.len() + neg.len()) as f64,
        tp_rate: tp as f64 / pos.len() as f64,
        tn_rate: tn as f64 / neg.len() as f64,
        threshold: t,
        xi,
        sigma_inf_raw,
        sigma_inf_features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::seeded_rng;
    use crate::models::FeatureMapSpec;
    use ndarray::{array, Array1, Array2};
    use proptest::prelude::*;
    use rand::Rng;

    fn pairwise(pos: &[f64], neg: &[f64]) -> f64 {
        let mut acc = 0.0;
        for p in pos {
            for n in neg {
                acc += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        acc / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_roc(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[1.0; 5], &[1.0; 3]).unwrap(), 0.5);
        assert_eq!(auc_roc(&[0.9, 0.4], &[0.5, 0.1]).unwrap(), 0.75);
        assert!(matches!(auc_roc(&[], &[1.0]), Err(Error::UndefinedAuc(_))));
        assert!(matches!(auc_roc(&[1.0], &[]), Err(Error::UndefinedAuc(_))));
        assert!(auc_roc(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn auc_large_matches_pairwise() {
        let mut rng = seeded_rng(1);
        let pos: Vec<f64> = (0..1000).map(|_| (rng.random_range(0..200) as f64) * 0.1).collect();
        let neg: Vec<f64> = (0..1000).map(|_| (rng.random_range(0..150) as f64) * 0.1).collect();
        assert_eq!(auc_roc(&pos, &neg).unwrap(), pairwise(&pos, &neg));
    }

    #[test]
    fn roc_endpoints() {
        let pts = roc_points(&[0.9, 0.4, 0.4], &[0.5, 0.1]).unwrap();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        assert_eq!(pts.len(), 5);
        // Trapezoid area equals the rank AUC.
        let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        assert!((area - auc_roc(&[0.9, 0.4, 0.4], &[0.5, 0.1]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn slack_examples() {
        let m = Model::linear(array![1.0]).unwrap();
        let d = Dataset::new(array![[2.0], [0.0], [0.25]]).unwrap();
        assert_eq!(margin_slacks(&m, &d).unwrap(), vec![0.0, 1.0, 0.75]);
    }

    #[test]
    fn slacks_recompose_through_forward() {
        let m = Model::init(FeatureMapSpec::mlp(vec![4, 3], 2), 3).unwrap();
        let mut rng = seeded_rng(3);
        let d = Dataset::new(Array2::from_shape_fn((20, 3), |_| rng.random_range(-2.0..2.0))).unwrap();
        let xi = margin_slacks(&m, &d).unwrap();
        for (i, row) in d.x().rows().into_iter().enumerate() {
            let (s, _) = m.forward(&row).unwrap();
            assert!((xi[i] - (1.0 - s.0).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_identity_and_orthogonal() {
        let m = Model::linear(array![1.0, 1.0]).unwrap();
        let d = Dataset::new(array![[1.0, 0.0], [2.0, 0.0]]).unwrap();
        let u = UniversumSet::new(array![[0.0, 1.0], [0.0, -3.0]]).unwrap();
        let (raw, feat) = correlation_diagnostic(&m, &d, &u).unwrap();
        assert_eq!(raw, 0.0);
        assert_eq!(raw, feat);
        let u = UniversumSet::new(array![[1.0, 0.5], [0.3, -3.0]]).unwrap();
        let (raw, feat) = correlation_diagnostic(&m, &d, &u).unwrap();
        assert_eq!(raw, feat);
        assert!(raw > 0.0);
    }

    #[test]
    fn constant_model() {
        let m = Model::linear(Array1::zeros(2)).unwrap();
        let test = LabeledTestSet::new(array![[1.0, 2.0], [0.0, 1.0], [3.0, 1.0]], vec![1, -1, -1]).unwrap();
        let r = evaluate(&m, &test, None, None).unwrap();
        assert_eq!(r.auc, 0.5);
        // Score 0 is below the threshold 1, so everything is called negative.
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.tp_rate, 0.0);
        assert_eq!(r.tn_rate, 1.0);
        assert!(r.sigma_inf_raw.is_none());
    }

    #[test]
    fn perfect_model() {
        let m = Model::linear(array![1.0]).unwrap();
        let test = LabeledTestSet::new(array![[1.0], [3.0], [0.5], [-1.0]], vec![1, 1, -1, -1]).unwrap();
        let r = evaluate(&m, &test, None, None).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn report_recomposes() {
        let m = Model::init(FeatureMapSpec::mlp(vec![5], 4), 2).unwrap();
        let mut rng = seeded_rng(5);
        let mut g = |r: usize| Array2::from_shape_fn((r, 2), |_| rng.random_range(-1.0..1.0));
        let train = Dataset::new(g(10)).unwrap();
        let univ = UniversumSet::new(g(7)).unwrap();
        let test = LabeledTestSet::from_classes(&g(12), &g(9)).unwrap();
        let r = evaluate(&m, &test, Some(&univ), Some(&train)).unwrap();
        let (pos, neg) = split_scores(&m, &test).unwrap();
        assert_eq!(r.auc, auc_roc(&pos, &neg).unwrap());
        assert_eq!(r.xi, margin_slacks(&m, &train).unwrap());
        let (raw, feat) = correlation_diagnostic(&m, &train, &univ).unwrap();
        assert_eq!(r.sigma_inf_raw, Some(raw));
        assert_eq!(r.sigma_inf_features, Some(feat));
        // Positives with zero slack are accepted.
        let s = m.scores(&test.x().view()).unwrap();
        for (v, &y) in s.iter().zip(test.y()) {
            if y == 1 && (1.0 - v).max(0.0) == 0.0 {
                assert_eq!(decide(Score(*v), 1.0), 1);
            }
        }
    }

    proptest! {
        #[test]
        fn rank_auc_equals_pairwise(
            pos in prop::collection::vec(-20i32..20, 1..200),
            neg in prop::collection::vec(-20i32..20, 1..200),
        ) {
            let pos: Vec<f64> = pos.into_iter().map(|v| v as f64 * 0.5).collect();
            let neg: Vec<f64> = neg.into_iter().map(|v| v as f64 * 0.5).collect();
            prop_assert_eq!(auc_roc(&pos, &neg).unwrap(), pairwise(&pos, &neg));
        }

        #[test]
        fn auc_invariant_under_monotone_map(
            pos in prop::collection::vec(-5.0f64..5.0, 1..50),
            neg in prop::collection::vec(-5.0f64..5.0, 1..50),
        ) {
            let f = |v: &f64| (v * 0.7).exp() + 3.0;
            let a = auc_roc(&pos, &neg).unwrap();
            let pm: Vec<f64> = pos.iter().map(f).collect();
            let nm: Vec<f64> = neg.iter().map(f).collect();
            prop_assert_eq!(a, auc_roc(&pm, &nm).unwrap());
        }

        #[test]
        fn auc_swap_complements(
            pos in prop::collection::hash_set(-1000i32..1000, 1..40),
            neg in prop::collection::hash_set(1000i32..3000, 1..40),
            shift in -3000i32..3000,
        ) {
            // Disjoint value sets keep the inputs tie-free.
            let pos: Vec<f64> = pos.into_iter().map(|v| v as f64).collect();
            let neg: Vec<f64> = neg.into_iter().map(|v| (v + shift) as f64 + 0.5).collect();
            let a = auc_roc(&pos, &neg).unwrap();
            let b = auc_roc(&neg, &pos).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-15);
        }
    }
}
