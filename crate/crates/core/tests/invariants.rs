//! Range and implication invariants of the quality and contamination metrics.

use std::time::Duration;

use llmloop::annotation::{AnnotationAttempt, OmissionReason, Outcome, TokenUsage};
use llmloop::contamination::{
    classify_completion, normalize_answer, overlap_similarity, MatchKind, NEAR_EXACT_THRESHOLD,
};
use llmloop::quality::{consistency, fleiss_kappa_from_counts, ReannotationSet};
use llmloop::{Sentence, Tag};
use proptest::prelude::*;

fn words() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..12)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn count_matrix() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2usize..12, 1usize..20).prop_flat_map(|(raters, items)| {
        prop::collection::vec(
            prop::collection::vec(0usize..9, raters).prop_map(|picks| {
                let mut row = vec![0; 9];
                for p in picks {
                    row[p] += 1;
                }
                row
            }),
            items,
        )
    })
}

fn outcome(len: usize) -> impl Strategy<Value = Outcome> {
    prop_oneof![
        prop::collection::vec(0usize..9, len)
            .prop_map(|ix| Outcome::Ok { labels: ix.into_iter().map(|i| Tag::from_index(i).unwrap()).collect() }),
        Just(Outcome::Empty),
        Just(Outcome::Omission { predicted_count: len + 1, reason: OmissionReason::LengthMismatch }),
    ]
}

fn reannotation_set() -> impl Strategy<Value = ReannotationSet> {
    (1usize..8).prop_flat_map(|len| {
        (
            prop::collection::vec(0usize..9, len),
            prop::collection::vec(outcome(len), 1..6),
        )
            .prop_map(move |(gold, outcomes)| {
                let tokens = (0..len).map(|i| format!("w{i}")).collect();
                let gold = gold.into_iter().map(|i| Tag::from_index(i).unwrap()).collect();
                let sentence = Sentence::new("s", tokens, Some(gold), "syn").unwrap();
                let attempts = outcomes
                    .into_iter()
                    .map(|outcome| AnnotationAttempt {
                        sentence_id: "s".into(),
                        outcome,
                        raw_response: String::new(),
                        transport_error: false,
                        latency: Duration::ZERO,
                        token_usage: TokenUsage::default(),
                    })
                    .collect();
                ReannotationSet::new(sentence, attempts).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn kappa_never_exceeds_one(counts in count_matrix()) {
        if let Ok(k) = fleiss_kappa_from_counts(&counts) {
            prop_assert!(k <= 1.0 + 1e-12, "kappa {k}");
            prop_assert!(k.is_finite());
        }
    }

    #[test]
    fn consistency_is_a_percentage(sets in prop::collection::vec(reannotation_set(), 1..5)) {
        let report = consistency(&sets).unwrap();
        prop_assert!((0.0..=100.0).contains(&report.overall));
        for v in report.per_sample.values() {
            prop_assert!((0.0..=100.0).contains(v));
        }
    }

    #[test]
    fn overlap_is_bounded_and_symmetric(a in words(), b in words()) {
        let s = overlap_similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, overlap_similarity(&b, &a));
    }

    #[test]
    fn match_classes_respect_the_threshold(completion in words(), suffix in words()) {
        let kind = classify_completion(&completion.join(" "), &suffix);
        let sim = overlap_similarity(&completion, &suffix);
        match kind {
            MatchKind::Exact => prop_assert_eq!(&completion, &suffix),
            MatchKind::NearExact => prop_assert!(sim >= NEAR_EXACT_THRESHOLD),
            MatchKind::NoMatch => prop_assert!(sim < NEAR_EXACT_THRESHOLD),
        }
        if kind == MatchKind::Exact {
            prop_assert!(sim >= NEAR_EXACT_THRESHOLD);
        }
    }

    #[test]
    fn normalization_is_idempotent(s in "[ \"'A-Za-z.]{0,20}") {
        let once = normalize_answer(&s);
        prop_assert_eq!(normalize_answer(&once), once);
    }
}
