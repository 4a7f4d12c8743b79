//! System and user prompt construction.
//!
//! Prompts are built byte-for-byte reproducibly: the same training rows,
//! example count and selection seed always produce the same system prompt.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SentencePair;

pub const PREAMBLE: &str =
    "You are a helpful assistant who helps retrieve similarity scores between two sentences.";
pub const EXAMPLES_INTRO: &str =
    "You will find below some examples to help you determine this similarity score with the best accuracy:";
/// Marker phrase present once per formatted example. The spelling is part of
/// the prompt contract and must not be corrected.
pub const EXAMPLE_MARKER: &str = "have a similarty score of";
/// Output directive the response parser keys on.
pub const OUTPUT_FORMAT: &str = "Similarity score : ...";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("requested {k} examples but the training split has only {available}")]
    KTooLarge { k: usize, available: usize },
}

/// How few-shot examples are picked from the training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleSelection {
    /// Seeded uniform sampling without replacement, in sampled order.
    #[default]
    Random,
    /// The first k rows in dataset order.
    FirstK,
}

impl fmt::Display for ExampleSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleSelection::Random => "random",
            ExampleSelection::FirstK => "first-k",
        })
    }
}

impl FromStr for ExampleSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(ExampleSelection::Random),
            "first-k" => Ok(ExampleSelection::FirstK),
            other => Err(format!("unknown example selection `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub user_prompt: String,
    pub example_ids: Vec<u64>,
    pub k: usize,
    pub selection_seed: u64,
}

/// Renders a score the way the reference table does: `2.2`, `4`, `0.25`.
pub fn render_score(score: f64) -> String {
    // f64 Display is the shortest round-tripping form and drops a `.0` suffix.
    format!("{score}")
}

pub fn format_example(pair: &SentencePair) -> String {
    format!(
        "The sentence \"{}\" and the sentence \"{}\" {EXAMPLE_MARKER} {}",
        pair.sentence1,
        pair.sentence2,
        render_score(pair.reference_score)
    )
}

/// Chooses `k` training rows (by position) for the system prompt.
pub fn select_examples(
    train: &[SentencePair],
    k: usize,
    selection: ExampleSelection,
    seed: u64,
) -> Result<Vec<usize>, PromptError> {
    if k > train.len() {
        return Err(PromptError::KTooLarge {
            k,
            available: train.len(),
        });
    }
    Ok(match selection {
        ExampleSelection::FirstK => (0..k).collect(),
        ExampleSelection::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index::sample(&mut rng, train.len(), k).into_vec()
        }
    })
}

/// Builds the system prompt and returns it with the ids of the embedded examples.
///
/// With `k = 0` only the first preamble sentence is emitted. Otherwise the
/// preamble and the examples introduction are followed by one example per line.
pub fn build_system_prompt(
    train: &[SentencePair],
    k: usize,
    selection: ExampleSelection,
    seed: u64,
) -> Result<(String, Vec<u64>), PromptError> {
    let chosen = select_examples(train, k, selection, seed)?;
    if chosen.is_empty() {
        return Ok((PREAMBLE.to_string(), Vec::new()));
    }
    let mut prompt = format!("{PREAMBLE}\n{EXAMPLES_INTRO}");
    let mut ids = Vec::with_capacity(k);
    for &i in &chosen {
        prompt.push('\n');
        prompt.push_str(&format_example(&train[i]));
        ids.push(train[i].id);
    }
    Ok((prompt, ids))
}

pub fn build_user_prompt(pair: &SentencePair) -> String {
    format!(
        "Please give me the similarity score from 0 to 4 between those sentences: \"{}\" and \"{}\". \
         Always respond using strictly and only the following format: {OUTPUT_FORMAT}",
        pair.sentence1, pair.sentence2
    )
}

/// Builds both prompts for one pair.
pub fn build_bundle(
    train: &[SentencePair],
    pair: &SentencePair,
    k: usize,
    selection: ExampleSelection,
    selection_seed: u64,
) -> Result<PromptBundle, PromptError> {
    let (system_prompt, example_ids) = build_system_prompt(train, k, selection, selection_seed)?;
    Ok(PromptBundle {
        system_prompt,
        user_prompt: build_user_prompt(pair),
        example_ids,
        k,
        selection_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(id: u64, s1: &str, s2: &str, score: f64) -> SentencePair {
        SentencePair {
            id,
            sentence1: s1.into(),
            sentence2: s2.into(),
            reference_score: score,
        }
    }

    fn train(n: usize) -> Vec<SentencePair> {
        (0..n)
            .map(|i| pair(i as u64, &format!("first {i}"), &format!("second {i}"), (i % 5) as f64))
            .collect()
    }

    #[test]
    fn example_matches_published_block() {
        // The published example drops the final period of the second sentence.
        let p = pair(
            0,
            "The oncogenic activity of mutant Kras appears dependent on functional Craf.",
            "Oncogenic KRAS mutations are common in cancer",
            2.2,
        );
        assert_eq!(
            format_example(&p),
            "The sentence \"The oncogenic activity of mutant Kras appears dependent on functional Craf.\" and the sentence \"Oncogenic KRAS mutations are common in cancer\" have a similarty score of 2.2"
        );
    }

    #[test]
    fn whole_scores_render_without_decimals() {
        assert!(format_example(&pair(0, "a", "b", 4.0)).ends_with("have a similarty score of 4"));
        assert_eq!(render_score(0.0), "0");
        assert_eq!(render_score(3.6), "3.6");
    }

    #[test]
    fn sentences_embedded_verbatim() {
        let p = pair(0, "  padded ", "with \"quote\"", 1.0);
        assert!(format_example(&p).contains("\"  padded \""));
        assert!(build_user_prompt(&p).contains("\"with \"quote\"\""));
    }

    #[test]
    fn zero_examples_is_first_sentence_only() {
        let (prompt, ids) = build_system_prompt(&train(5), 0, ExampleSelection::Random, 1).unwrap();
        assert_eq!(
            prompt,
            "You are a helpful assistant who helps retrieve similarity scores between two sentences."
        );
        assert!(ids.is_empty());
    }

    #[test]
    fn exhaustive_sampling_covers_train() {
        let t = train(64);
        let (prompt, mut ids) = build_system_prompt(&t, 64, ExampleSelection::Random, 3).unwrap();
        assert_eq!(prompt.matches(EXAMPLE_MARKER).count(), 64);
        ids.sort_unstable();
        assert_eq!(ids, (0..64).collect::<Vec<u64>>());
    }

    #[test]
    fn too_many_examples() {
        let err = build_system_prompt(&train(64), 70, ExampleSelection::Random, 0).unwrap_err();
        assert_eq!(err, PromptError::KTooLarge { k: 70, available: 64 });
    }

    #[test]
    fn user_prompt_template() {
        let p = pair(0, "a", "a", 1.0);
        assert_eq!(
            build_user_prompt(&p),
            "Please give me the similarity score from 0 to 4 between those sentences: \"a\" and \"a\". Always respond using strictly and only the following format: Similarity score : ..."
        );
    }

    #[test]
    fn seeded_selection_is_stable() {
        let t = train(64);
        let a = build_system_prompt(&t, 2, ExampleSelection::Random, 7).unwrap();
        let b = build_system_prompt(&t, 2, ExampleSelection::Random, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.lines().count(), 4);
    }

    proptest! {
        #[test]
        fn system_prompt_is_deterministic(n in 1usize..80, k_frac in 0.0f64..=1.0, seed: u64) {
            let t = train(n);
            let k = ((n as f64) * k_frac) as usize;
            let a = build_system_prompt(&t, k, ExampleSelection::Random, seed).unwrap();
            let b = build_system_prompt(&t, k, ExampleSelection::Random, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.0.matches(EXAMPLE_MARKER).count(), k);
            let mut ids = a.1.clone();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), k);
        }

        #[test]
        fn user_prompt_carries_format(s1 in "\\PC{1,40}", s2 in "\\PC{1,40}") {
            let p = pair(0, &s1, &s2, 1.0);
            prop_assert!(build_user_prompt(&p).contains("Similarity score :"));
        }
    }
}
