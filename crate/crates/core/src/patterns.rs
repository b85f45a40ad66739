//! Heuristic detection of the seven split-trigger patterns. The detector is
//! an approximation of manual annotation: it reads only tokens, dependency
//! labels and SRL frames.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{label_matches, AnnotatedSentence};
use crate::datasets::Benchmark;
use crate::rules::{has_clause_level_and, is_participle, EngineConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternLabel {
    Rc,
    Conj,
    Part,
    Prep,
    Adv,
    Appos,
    Inf,
}

impl PatternLabel {
    pub const ALL: [PatternLabel; 7] = [
        PatternLabel::Rc,
        PatternLabel::Conj,
        PatternLabel::Part,
        PatternLabel::Prep,
        PatternLabel::Adv,
        PatternLabel::Appos,
        PatternLabel::Inf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternLabel::Rc => "rc",
            PatternLabel::Conj => "conj",
            PatternLabel::Part => "part",
            PatternLabel::Prep => "prep",
            PatternLabel::Adv => "adv",
            PatternLabel::Appos => "appos",
            PatternLabel::Inf => "inf",
        }
    }
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const ADVERBIAL_CLAUSE: [&str; 1] = ["advcl"];
const INFINITIVAL_HEADS: [&str; 4] = ["xcomp", "ccomp", "advcl", "acl"];
const ADVERBIAL_ARGS: [&str; 4] = ["ARGM-ADV", "ARGM-TMP", "ARGM-CAU", "ARGM-PRP"];

pub fn detect_patterns(sentence: &AnnotatedSentence, config: &EngineConfig) -> BTreeSet<PatternLabel> {
    let labels = &config.labels;
    let mut found = BTreeSet::new();
    if sentence
        .frames()
        .iter()
        .any(|f| f.arguments.iter().any(|a| a.is_relational()))
    {
        found.insert(PatternLabel::Rc);
    }
    if has_clause_level_and(sentence) {
        found.insert(PatternLabel::Conj);
    }
    for token in sentence.tokens() {
        let deprel = token.deprel.as_str();
        if labels.is_relative(deprel) {
            found.insert(PatternLabel::Rc);
        } else if labels.is_clausal(deprel) {
            if is_participle(token) {
                found.insert(PatternLabel::Part);
            } else if label_matches(deprel, &ADVERBIAL_CLAUSE) {
                found.insert(PatternLabel::Adv);
            }
        }
        if labels.is_appositional(deprel) {
            found.insert(PatternLabel::Appos);
        }
        if labels.is_prepositional(deprel) {
            let span = sentence
                .subtree(token.index)
                .into_iter()
                .filter(|&i| !sentence.token(i).is_punct())
                .count();
            if span >= config.minimum_span {
                found.insert(PatternLabel::Prep);
            }
        }
        if token.surface.eq_ignore_ascii_case("to") && token.head != 0 {
            let head = sentence.token(token.head);
            let verbal = head.is_verbal() || head.pos.is_empty();
            if verbal && head.index > token.index && label_matches(&head.deprel, &INFINITIVAL_HEADS) {
                found.insert(PatternLabel::Inf);
            }
        }
    }
    for frame in sentence.frames() {
        let Some(verb) = frame.verb() else { continue };
        let first = frame.arguments.iter().min_by_key(|a| a.start);
        if let Some(arg) = first {
            if arg.end < verb.start && ADVERBIAL_ARGS.iter().any(|l| arg.label.eq_ignore_ascii_case(l)) {
                found.insert(PatternLabel::Adv);
            }
        }
    }
    found
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("no annotations for pairs: {}", .0.join(", "))]
    MissingAnnotations(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub sentences: usize,
    /// Sentences containing each label (all seven present, possibly zero).
    pub counts: BTreeMap<PatternLabel, usize>,
    pub patterns_per_sentence: f64,
}

impl PatternReport {
    pub fn from_label_sets<'a, I>(sets: I) -> Self
    where
        I: IntoIterator<Item = &'a BTreeSet<PatternLabel>>,
    {
        let mut counts: BTreeMap<PatternLabel, usize> = PatternLabel::ALL.iter().map(|&l| (l, 0)).collect();
        let mut sentences = 0;
        let mut total = 0;
        for set in sets {
            sentences += 1;
            total += set.len();
            for label in set {
                *counts.entry(*label).or_insert(0) += 1;
            }
        }
        let patterns_per_sentence = if sentences == 0 {
            0.0
        } else {
            total as f64 / sentences as f64
        };
        PatternReport {
            sentences,
            counts,
            patterns_per_sentence,
        }
    }

    pub fn render(&self, title: &str) -> String {
        let mut out = format!("{title}\n");
        for (label, count) in &self.counts {
            out.push_str(&format!("{:<8}{count:>6}\n", label.as_str()));
        }
        out.push_str(&format!("{:<8}{:>6}\n", "n", self.sentences));
        out.push_str(&format!("patterns/sent {:.2}\n", self.patterns_per_sentence));
        out
    }
}

/// Report over annotated sentences directly.
pub fn pattern_report_for(sentences: &[AnnotatedSentence], config: &EngineConfig) -> PatternReport {
    let sets: Vec<_> = sentences.iter().map(|s| detect_patterns(s, config)).collect();
    PatternReport::from_label_sets(&sets)
}

/// Report over the complex sentences of a benchmark, looked up by pair_id in
/// `annotations` (keyed by sentence id).
pub fn pattern_report(
    benchmark: &Benchmark,
    annotations: &BTreeMap<String, AnnotatedSentence>,
    config: &EngineConfig,
) -> Result<PatternReport, PatternError> {
    let missing: Vec<String> = benchmark
        .pairs
        .iter()
        .filter(|p| !annotations.contains_key(&p.pair_id))
        .map(|p| p.pair_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(PatternError::MissingAnnotations(missing));
    }
    let sets: Vec<_> = benchmark
        .pairs
        .iter()
        .map(|p| detect_patterns(&annotations[&p.pair_id], config))
        .collect();
    Ok(PatternReport::from_label_sets(&sets))
}
