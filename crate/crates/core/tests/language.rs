use std::collections::BTreeSet;

use spatialqa_core::grammar::Grammar;
use spatialqa_core::model::RelationKind;
use spatialqa_core::parser::{normalized_facts, parse_story, solve};

fn g() -> Grammar {
    Grammar::default_grammar()
}

fn facts(text: &str) -> BTreeSet<(String, RelationKind, String)> {
    let p = parse_story(text, &g(), None).unwrap_or_else(|e| panic!("{text}: {e}"));
    normalized_facts(&p.facts, &p.entities)
        .into_iter()
        .collect()
}

fn answer(story: &str, question: &str) -> Vec<String> {
    solve(story, question, &g(), None)
        .unwrap_or_else(|e| panic!("{question}: {e}"))
        .labels
}

const UNRELATED_SQUARE: &str =
    "A blue circle is above a big triangle. To the left of the big triangle, there is a square.";

#[test]
fn unrelated_objects_are_unknown() {
    assert_eq!(
        answer(UNRELATED_SQUARE, "Is the square to the left of the blue circle?"),
        ["DK"]
    );
    assert_eq!(
        answer(
            UNRELATED_SQUARE,
            "What is the relation between the square and the blue circle?"
        ),
        ["DK"]
    );
    assert_eq!(
        answer(
            UNRELATED_SQUARE,
            "What is the relation between the blue circle and the square?"
        ),
        ["DK"]
    );
    assert_eq!(
        answer(
            UNRELATED_SQUARE,
            "What is the relation between the square and the big triangle?"
        ),
        ["Left"]
    );
    assert_eq!(
        answer(
            UNRELATED_SQUARE,
            "What is the relation between the big triangle and the blue circle?"
        ),
        ["Below"]
    );
}

#[test]
fn block_conjunction_states_both_relations() {
    let one = facts("Block A is above block C and B. Block A has a small circle. Block B has a square. Block C has a triangle.");
    let two = facts(
        "Block A is above block C. Block A is above block B. Block A has a small circle. Block B has a square. Block C has a triangle.",
    );
    assert_eq!(one, two);
    assert_eq!(
        answer(
            "Block A is above block C and B. Block A has a small circle. Block B has a square.",
            "Is the small circle above the square?",
        ),
        ["Yes"]
    );
}

#[test]
fn pronoun_takes_the_previous_object() {
    let story =
        "A small blue circle is near to a big circle. It is to the left of a medium yellow square.";
    assert_eq!(
        answer(
            story,
            "Is the small blue circle to the left of the medium yellow square?"
        ),
        ["Yes"]
    );
    assert_eq!(
        answer(
            story,
            "Is the big circle to the left of the medium yellow square?"
        ),
        ["DK"]
    );
}

#[test]
fn relation_conjunction_and_nesting() {
    let story = "Block A has a big square and a small circle. The small circle is to the right of and above the big square. \
                 A yellow triangle is below the object which is to the right of the big square.";
    assert_eq!(
        answer(
            story,
            "What is the relation between the small circle and the big square?"
        ),
        ["Right", "Above"]
    );
    assert_eq!(
        answer(story, "Is the yellow triangle above the small circle?"),
        ["No"]
    );
}

#[test]
fn groups_are_numbered() {
    let story = "Block B has two medium yellow squares and two blue circles. \
                 The medium yellow square number one is above the blue circle number two. \
                 The blue circle number two is above the blue circle number one.";
    assert_eq!(
        answer(
            story,
            "Is the medium yellow square number one above the blue circle number one?"
        ),
        ["Yes"]
    );
    assert_eq!(
        answer(
            story,
            "Is the medium yellow square number two above the blue circle number one?"
        ),
        ["DK"]
    );
    assert_eq!(
        answer(
            story,
            "Are all blue circles below the medium yellow square number one?"
        ),
        ["Yes"]
    );
}

#[test]
fn out_of_grammar_text_is_rejected() {
    let err = parse_story("The cat sat.", &g(), None).unwrap_err();
    assert_eq!(err.sentence, 1);
    assert!(err.residual.contains("cat"), "{err}");
    let err = parse_story(
        "A circle is above a square. A square is beside a circle.",
        &g(),
        None,
    )
    .unwrap_err();
    assert_eq!(err.sentence, 2);
}
