mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simrag_core::baselines::{
    baseline_correlation, cosine_qgram_similarity, jaccard_similarity, levenshtein_distance,
    qgram_similarity, BaselineError, BaselineSpec, Metric, Tokenizer,
};
use simrag_core::dataset::{Dataset, SentencePair};
use simrag_core::stats::{pearson, pearson_slices, ScoreSeries, StatsError};
use simrag_core::{load_dataset, DatasetFormat, Executor};

/// Token-Jaccard r on the fixture test split, from the enumeration oracle.
const FIXTURE_JACCARD_R: f64 = 0.909197854033826;

#[test]
fn pearson_matches_exact_oracle_on_known_series() {
    let x = [1.0, 2.0, 3.0];
    let y = [1.0, 2.0, 4.0];
    let expected = common::pearson_oracle(&x, &y).unwrap();
    assert!((expected - 3.0 / (28.0f64 / 3.0).sqrt()).abs() < 1e-15);
    let got = pearson(&ScoreSeries::new("x", x.to_vec()), &ScoreSeries::new("y", y.to_vec())).unwrap();
    assert!((got.r - expected).abs() < 1e-12);
    assert_eq!(got.n, 3);
}

#[test]
fn pearson_matches_exact_oracle_on_fuzzed_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for _ in 0..200 {
        let n = rng.random_range(2..=100);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
        let expected = common::pearson_oracle(&x, &y).unwrap();
        let got = pearson_slices(&x, &y, "x", "y").unwrap().r;
        assert!((got - expected).abs() < 1e-12, "n={n}: {got} vs {expected}");
    }
}

#[test]
fn constant_series_is_degenerate() {
    assert_eq!(common::pearson_oracle(&[2.0, 2.0], &[1.0, 3.0]), None);
    assert!(matches!(
        pearson_slices(&[2.0, 2.0], &[1.0, 3.0], "model", "reference"),
        Err(StatsError::DegenerateVariance(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn levenshtein_equals_matrix(a in "[a-e]{0,64}", b in "[a-e]{0,64}") {
        prop_assert_eq!(levenshtein_distance(&a, &b), common::levenshtein_matrix(&a, &b));
    }

    #[test]
    fn levenshtein_equals_matrix_unicode(a in "\\PC{0,20}", b in "\\PC{0,20}") {
        prop_assert_eq!(levenshtein_distance(&a, &b), common::levenshtein_matrix(&a, &b));
    }

    #[test]
    fn gram_metrics_match_enumeration(a in "[a-c ]{0,16}", b in "[a-c ]{0,16}", q in 1usize..5) {
        prop_assert_eq!(qgram_similarity(&a, &b, q), common::qgram_oracle(&a, &b, q));
        prop_assert!((cosine_qgram_similarity(&a, &b, q) - common::cosine_oracle(&a, &b, q)).abs() < 1e-12);
    }

    #[test]
    fn token_jaccard_matches_enumeration(a in "[A-Ca-c,. ]{0,30}", b in "[A-Ca-c,. ]{0,30}") {
        prop_assert_eq!(
            jaccard_similarity(&a, &b, Tokenizer::LowercaseWhitespace),
            common::token_jaccard_oracle(&a, &b)
        );
    }
}

#[test]
fn fixture_jaccard_correlation_is_pinned() {
    let ds = load_dataset(&common::fixture_path(), DatasetFormat::SingleFile).unwrap();
    let spec = BaselineSpec::new(Metric::JaccardTokens);
    let first = baseline_correlation(&ds, &spec, &Executor::sequential()).unwrap();
    let second = baseline_correlation(&ds, &spec, &Executor::with_parallelism(4)).unwrap();
    assert_eq!(first.correlation.r.to_bits(), second.correlation.r.to_bits());
    assert!((first.correlation.r - FIXTURE_JACCARD_R).abs() < 1e-12);
    assert_eq!(first.correlation.n, 20);
}

#[test]
fn metric_equal_to_scaled_reference_is_perfect() {
    // Sentences built so that the token Jaccard equals reference / 4.
    let mk = |id: u64, shared: usize| {
        let a: Vec<String> = (0..4).map(|i| format!("t{i}")).collect();
        let mut b: Vec<String> = a[..shared].to_vec();
        b.extend((shared..4).map(|i| format!("u{i}")));
        let union = 8 - shared;
        SentencePair {
            id,
            sentence1: a.join(" "),
            sentence2: b.join(" "),
            reference_score: 4.0 * shared as f64 / union as f64,
        }
    };
    let test: Vec<SentencePair> = (0..5).map(|s| mk(s as u64, s)).collect();
    let ds = Dataset { train: test.clone(), validation: test.clone(), test };
    let r = baseline_correlation(&ds, &BaselineSpec::new(Metric::JaccardTokens), &Executor::sequential())
        .unwrap()
        .correlation
        .r;
    assert!((r - 1.0).abs() < 1e-12);
}

#[test]
fn constant_metric_is_degenerate() {
    let test: Vec<SentencePair> = (0..4)
        .map(|i| SentencePair {
            id: i,
            sentence1: "same words".into(),
            sentence2: "same words".into(),
            reference_score: i as f64,
        })
        .collect();
    let ds = Dataset { train: test.clone(), validation: test.clone(), test };
    let err = baseline_correlation(&ds, &BaselineSpec::new(Metric::Levenshtein), &Executor::sequential())
        .unwrap_err();
    assert!(matches!(err, BaselineError::Stats(StatsError::DegenerateVariance(_))));
}
