use std::collections::BTreeMap;

use dialog_engine::training_data::{
    parse_nlu_markdown, parse_responses, parse_stories_markdown, write_nlu_markdown, write_responses,
    write_stories_markdown, EntitySpan, NluDocument, RegexPatternDef, ResponseTemplate, Story, StoryStep, SynonymTable,
    TrainingExample,
};
use proptest::collection::{btree_map, vec};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,7}"
}

fn word() -> impl Strategy<Value = String> {
    // Roman Urdu with the odd apostrophe and digits.
    "[a-z][a-z0-9']{0,6}"
}

/// Words, some of them annotated; spans cover whole words.
fn example(intent: String) -> impl Strategy<Value = TrainingExample> {
    vec((word(), proptest::option::weighted(0.3, label())), 1..6).prop_map(move |words| {
        let mut text = String::new();
        let mut entities = Vec::new();
        for (i, (w, entity)) in words.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let start = text.chars().count();
            text.push_str(w);
            if let Some(e) = entity {
                entities.push(EntitySpan::new(start, start + w.chars().count(), w.clone(), e.clone()));
            }
        }
        TrainingExample {
            text,
            intent: intent.clone(),
            entities,
        }
    })
}

fn nlu_document() -> impl Strategy<Value = NluDocument> {
    let examples = vec(label(), 1..5)
        .prop_flat_map(|intents| intents.into_iter().map(|i| vec(example(i), 1..4)).collect::<Vec<_>>())
        .prop_map(|groups| groups.into_iter().flatten().collect::<Vec<_>>());
    let synonyms = btree_map(word(), label(), 0..5);
    let patterns = vec((label(), "[a-z0-9]{1,4}(\\\\d\\{2\\})?"), 0..3);
    (examples, synonyms, patterns).prop_map(|(examples, syn, pats)| {
        let mut synonyms = SynonymTable::new();
        for (surface, canonical) in syn {
            // chains are rejected by design; skip them
            let _ = synonyms.insert(&surface, &canonical);
        }
        NluDocument {
            examples,
            synonyms,
            patterns: pats.into_iter().map(|(n, p)| RegexPatternDef::new(n, p)).collect(),
        }
    })
}

fn story() -> impl Strategy<Value = Story> {
    let step = (label(), proptest::option::of(vec(word(), 1..4)), vec(label(), 1..4)).prop_map(|(i, u, a)| StoryStep {
        intent: i,
        utterance: u.map(|w| w.join(" ")),
        actions: a,
    });
    ("[a-z][a-z0-9 ]{0,12}[a-z0-9]", vec(step, 1..5)).prop_map(|(n, steps)| Story::new(n, steps))
}

fn templates() -> impl Strategy<Value = BTreeMap<String, ResponseTemplate>> {
    btree_map(label(), vec("[ -~]{1,20}", 1..4), 0..6).prop_map(|m| {
        m.into_iter()
            .map(|(a, v)| (a.clone(), ResponseTemplate { action: a, variants: v }))
            .collect()
    })
}

proptest! {
    #[test]
    fn nlu_markdown_round_trip(doc in nlu_document()) {
        let text = write_nlu_markdown(&doc.examples, &doc.synonyms, &doc.patterns);
        let parsed = parse_nlu_markdown(&text).unwrap();
        prop_assert_eq!(parsed, doc.canonicalized());
    }

    #[test]
    fn stories_round_trip(stories in vec(story(), 0..5)) {
        let text = write_stories_markdown(&stories);
        prop_assert_eq!(parse_stories_markdown(&text).unwrap(), stories);
    }

    #[test]
    fn responses_round_trip(t in templates()) {
        prop_assert_eq!(parse_responses(&write_responses(&t)).unwrap(), t);
    }
}
