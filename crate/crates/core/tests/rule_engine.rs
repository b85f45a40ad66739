use std::collections::BTreeMap;

use splitbench::annotation::{load_annotations, AnnotatedSentence};
use splitbench::rules::{
    conjunction_handling, insertion_handling, realize, split_and_rephrase, wh_handling, EngineConfig, Handler,
};

fn fixtures(name: &str) -> BTreeMap<String, AnnotatedSentence> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/");
    let conllu = std::fs::read_to_string(format!("{dir}{name}.conllu")).unwrap();
    let srl = std::fs::read_to_string(format!("{dir}{name}.srl.jsonl")).unwrap();
    load_annotations(&conllu, Some(&srl))
        .unwrap()
        .into_iter()
        .map(|s| (s.sentence_id().to_string(), s))
        .collect()
}

fn realized(
    pair: (splitbench::rules::ClauseDraft, splitbench::rules::ClauseDraft),
    s: &AnnotatedSentence,
) -> [String; 2] {
    [realize(&pair.0, s).unwrap(), realize(&pair.1, s).unwrap()]
}

#[test]
fn wh_handling_relative_clause() {
    let all = fixtures("pattern_examples");
    let s = &all["rc"];
    let pair = wh_handling(s).expect("R-ARG present");
    assert_eq!(pair.0.token_indices, vec![1, 2, 3, 4, 11]);
    assert_eq!(pair.1.prefix_tokens, vec!["Baymax"]);
    assert_eq!(
        realized(pair, s),
        ["Scott Adsit voiced Baymax.", "Baymax was created by Duncan Rouleau."]
    );
}

#[test]
fn conjunction_handling_verb_case() {
    let all = fixtures("pattern_examples");
    let s = &all["conj"];
    assert_eq!(
        realized(conjunction_handling(s).unwrap(), s),
        [
            "Above the Veil is from Australia.",
            "Above the Veil was preceded by Aenir and Castle."
        ]
    );
}

#[test]
fn insertion_handling_participle_and_apposition() {
    let all = fixtures("pattern_examples");
    let s = &all["part"];
    assert_eq!(
        realized(insertion_handling(s).unwrap(), s),
        [
            "The 1st runway is serving the city of Alderney.",
            "The 1st runway is made from Poaceae."
        ]
    );
    let s = &all["appos"];
    assert_eq!(
        realized(insertion_handling(s).unwrap(), s),
        [
            "Leila married the movie director Ruy Guerra.",
            "Ruy Guerra is father of her only daughter."
        ]
    );
}

#[test]
fn full_engine_on_pattern_sentences() {
    let all = fixtures("pattern_examples");
    let config = EngineConfig::default();

    let rc = split_and_rephrase(&all["rc"], &config).unwrap();
    assert_eq!(
        rc.sentences,
        ["Scott Adsit voiced Baymax.", "Baymax was created by Duncan Rouleau."]
    );
    assert_eq!(rc.trace.len(), 1);
    assert_eq!(rc.trace[0].handler, Handler::WhHandling);
    assert_eq!(rc.trace[0].trigger, 5);

    let conj = split_and_rephrase(&all["conj"], &config).unwrap();
    assert_eq!(conj.sentences.len(), 2);
    assert_eq!(conj.trace.len(), 1);
    assert_eq!(conj.trace[0].handler, Handler::ConjunctionHandling);
    assert_eq!(conj.trace[0].trigger, 7);

    let part = split_and_rephrase(&all["part"], &config).unwrap();
    assert_eq!(
        part.sentences,
        [
            "The 1st runway is serving the city of Alderney.",
            "The 1st runway is made from Poaceae."
        ]
    );
    assert_eq!(part.trace[0].handler, Handler::InsertionHandling);
}

#[test]
fn identity_fallback() {
    let all = fixtures("pattern_examples");
    let result = split_and_rephrase(&all["none"], &EngineConfig::default()).unwrap();
    assert!(!result.changed);
    assert!(result.trace.is_empty());
    assert_eq!(result.sentences, ["Bob runs."]);
}

#[test]
fn fronted_participle_with_trailing_adjective() {
    let all = fixtures("pattern_examples");
    let result = split_and_rephrase(&all["kaguya"], &EngineConfig::default()).unwrap();
    assert_eq!(
        result.sentences,
        [
            "Kaguya is voiced by Aoi Koga.",
            "Kaguya is the series' titular character.",
            "Kaguya is popular among a wide audience."
        ]
    );
}

#[test]
fn websplit_style_outputs() {
    let all = fixtures("websplit_style");
    let config = EngineConfig::default();
    let expected: &[(&str, &[&str])] = &[
        (
            "w01",
            &["Alan Bean is a test pilot.", "Alan Bean was born in Wheeler, Texas."],
        ),
        (
            "w02",
            &[
                "Aarhus Airport serves the city of Aarhus.",
                "Aarhus Airport is operated by Aarhus Lufthavn.",
            ],
        ),
        (
            "w03",
            &["The runway is located in Alderney.", "The runway is 497 metres long."],
        ),
        (
            "w04",
            &[
                "The Acharya Institute of Technology is in Bangalore.",
                "Its director is Jagadeesh.",
            ],
        ),
        ("w05", &["Ajoblanco is from Spain.", "Spain is led by Felipe VI."]),
        ("w06", &["Amdavad ni Gufa is located in Ahmedabad, India."]),
        (
            "w07",
            &[
                "Alfred Garth Jones was born in Manchester.",
                "Alfred Garth Jones died in Sidmouth.",
            ],
        ),
        (
            "w08",
            &["Ajoblanco is originating in Spain.", "Ajoblanco is a cold soup."],
        ),
        (
            "w09",
            &[
                "The AWH Engineering College is in Kerala.",
                "Kerala has Kochi as its largest city.",
            ],
        ),
        ("w10", &["Asam pedas is a food.", "Asam pedas is found in Malaysia."]),
    ];
    for (id, want) in expected {
        let got = split_and_rephrase(&all[*id], &config).unwrap();
        assert_eq!(&got.sentences, want, "{id}");
    }
}
