use std::collections::BTreeSet;

use splitbench::annotation::load_annotations;
use splitbench::patterns::{detect_patterns, pattern_report_for, PatternLabel};
use splitbench::rules::EngineConfig;

fn fixture(name: &str) -> Vec<splitbench::annotation::AnnotatedSentence> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/");
    let conllu = std::fs::read_to_string(format!("{dir}{name}.conllu")).unwrap();
    let srl = std::fs::read_to_string(format!("{dir}{name}.srl.jsonl")).unwrap();
    load_annotations(&conllu, Some(&srl)).unwrap()
}

#[test]
fn labels_on_example_sentences() {
    let config = EngineConfig::default();
    let all = fixture("pattern_examples");
    let get = |id: &str| {
        let s = all.iter().find(|s| s.sentence_id() == id).unwrap();
        detect_patterns(s, &config)
    };
    assert!(get("rc").contains(&PatternLabel::Rc));
    assert!(get("conj").contains(&PatternLabel::Conj));
    assert!(get("part").contains(&PatternLabel::Part));
    assert!(get("appos").contains(&PatternLabel::Appos));
    assert!(get("prep").contains(&PatternLabel::Prep));
    assert_eq!(get("none"), BTreeSet::new());
}

#[test]
fn report_is_deterministic() {
    let config = EngineConfig::default();
    let all = fixture("websplit_style");
    let a = pattern_report_for(&all, &config);
    let b = pattern_report_for(&all, &config);
    assert_eq!(a, b);
    assert_eq!(a.sentences, 10);
    assert!(a.patterns_per_sentence > 0.0);
}
