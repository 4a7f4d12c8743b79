use std::fs;
use std::path::PathBuf;

use simrag_core::dataset::SentencePair;
use simrag_core::prompt::{build_system_prompt, build_user_prompt, ExampleSelection, EXAMPLE_MARKER};

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    fs::read_to_string(path).unwrap()
}

fn kras_and_mir146a_rows() -> Vec<SentencePair> {
    vec![
        SentencePair::new(
            0,
            "The oncogenic activity of mutant Kras appears dependent on functional Craf.",
            "Oncogenic KRAS mutations are common in cancer.",
            2.2,
        )
        .unwrap(),
        SentencePair::new(
            1,
            "The up-regulation of miR-146a was also detected in cervical cancer tissues.",
            "The expression of miR-146a has been found to be up-regulated in cervical cancer.",
            4.0,
        )
        .unwrap(),
    ]
}

#[test]
fn system_prompt_without_examples() {
    let (prompt, ids) = build_system_prompt(&kras_and_mir146a_rows(), 0, ExampleSelection::FirstK, 0).unwrap();
    assert_eq!(prompt, golden("system_k0.golden.txt"));
    assert!(ids.is_empty());
}

#[test]
fn system_prompt_with_two_first_k_examples() {
    let (prompt, ids) = build_system_prompt(&kras_and_mir146a_rows(), 2, ExampleSelection::FirstK, 0).unwrap();
    assert_eq!(prompt, golden("system_k2_first.golden.txt"));
    assert_eq!(ids, vec![0, 1]);
    assert_eq!(prompt.matches(EXAMPLE_MARKER).count(), 2);
}

#[test]
fn user_prompt_for_mir146a_pair() {
    assert_eq!(build_user_prompt(&kras_and_mir146a_rows()[1]), golden("user_mir146a.golden.txt"));
}
