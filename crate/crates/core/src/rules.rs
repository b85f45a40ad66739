//! The three-handler rule-based split-and-rephrase model.
//!
//! A sentence passes through wh handling, conjunction handling and insertion
//! handling, each at most once. After a handler splits, the next handler works
//! on the longest clause produced so far. Clauses are carried as
//! [`ClauseDraft`]s (source token indices plus inserted words) and turned into
//! strings by [`realize`] at the end.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{label_matches, AnnotatedSentence, Token};

/// Forms a copula prefix may take.
pub const COPULAS: [&str; 4] = ["is", "are", "was", "were"];
const COORDINATORS: [&str; 4] = ["and", "or", "but", "nor"];
const SUBJECT_LABELS: [&str; 3] = ["nsubj", "nsubj:pass", "nsubjpass"];
const AUXILIARY_LABELS: [&str; 4] = ["aux", "auxpass", "aux:pass", "cop"];
const NAME_PART_LABELS: [&str; 3] = ["flat", "compound", "name"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RealizeError {
    #[error("sentence {0}: clause draft has no tokens to realize")]
    EmptyDraft(String),
    #[error("sentence {sentence_id}: token index {index} out of range")]
    BadIndex { sentence_id: String, index: usize },
}

/// Dependency labels accepted for each modifier class used by insertion handling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifierLabels {
    pub clausal: Vec<String>,
    pub relative: Vec<String>,
    pub prepositional: Vec<String>,
    pub adjectival: Vec<String>,
    pub appositional: Vec<String>,
}

impl Default for ModifierLabels {
    fn default() -> Self {
        let owned = |labels: &[&str]| labels.iter().map(|s| s.to_string()).collect();
        ModifierLabels {
            clausal: owned(&["acl", "partmod", "vmod", "advcl"]),
            relative: owned(&["acl:relcl", "rcmod", "relcl"]),
            prepositional: owned(&["nmod", "prep", "obl"]),
            adjectival: owned(&["amod"]),
            appositional: owned(&["appos"]),
        }
    }
}

fn matches_any(deprel: &str, labels: &[String]) -> bool {
    let borrowed: Vec<&str> = labels.iter().map(String::as_str).collect();
    label_matches(deprel, &borrowed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ModifierClass {
    Clausal,
    Relative,
    Prepositional,
    Adjectival,
    Appositional,
}

impl ModifierLabels {
    fn classify(&self, deprel: &str) -> Option<ModifierClass> {
        // Relative labels are checked first: `acl:relcl` would also match `acl`.
        if matches_any(deprel, &self.relative) {
            Some(ModifierClass::Relative)
        } else if matches_any(deprel, &self.appositional) {
            Some(ModifierClass::Appositional)
        } else if matches_any(deprel, &self.clausal) {
            Some(ModifierClass::Clausal)
        } else if matches_any(deprel, &self.adjectival) {
            Some(ModifierClass::Adjectival)
        } else if matches_any(deprel, &self.prepositional) {
            Some(ModifierClass::Prepositional)
        } else {
            None
        }
    }

    pub fn is_relative(&self, deprel: &str) -> bool {
        matches_any(deprel, &self.relative)
    }

    pub fn is_clausal(&self, deprel: &str) -> bool {
        matches_any(deprel, &self.clausal) && !self.is_relative(deprel)
    }

    pub fn is_prepositional(&self, deprel: &str) -> bool {
        matches_any(deprel, &self.prepositional)
    }

    pub fn is_appositional(&self, deprel: &str) -> bool {
        matches_any(deprel, &self.appositional)
    }
}

/// Every tunable of the engine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Smallest number of non-punctuation tokens an extracted modifier may have.
    pub minimum_span: usize,
    pub copula_insertion: bool,
    /// Insertion handling extracts every qualifying, non-nested modifier in
    /// its single pass instead of only the leftmost one.
    pub exhaustive_insertion: bool,
    pub labels: ModifierLabels,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            minimum_span: 3,
            copula_insertion: true,
            exhaustive_insertion: true,
            labels: ModifierLabels::default(),
        }
    }
}

/// A clause under construction: words to prepend plus source tokens in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseDraft {
    pub token_indices: Vec<usize>,
    pub prefix_tokens: Vec<String>,
    pub source_id: String,
}

impl ClauseDraft {
    /// The whole sentence as a single draft.
    pub fn whole(sentence: &AnnotatedSentence) -> Self {
        ClauseDraft {
            token_indices: (1..=sentence.len()).collect(),
            prefix_tokens: Vec::new(),
            source_id: sentence.sentence_id().to_string(),
        }
    }

    fn new(source: &AnnotatedSentence, token_indices: Vec<usize>, prefix_tokens: Vec<String>) -> Self {
        ClauseDraft {
            token_indices,
            prefix_tokens,
            source_id: source.sentence_id().to_string(),
        }
    }

    pub fn token_count(&self) -> usize {
        self.token_indices.len() + self.prefix_tokens.len()
    }

    fn first_index(&self) -> usize {
        self.token_indices.first().copied().unwrap_or(usize::MAX)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Handler {
    WhHandling,
    ConjunctionHandling,
    InsertionHandling,
}

impl Handler {
    pub fn name(self) -> &'static str {
        match self {
            Handler::WhHandling => "wh_handling",
            Handler::ConjunctionHandling => "conjunction_handling",
            Handler::InsertionHandling => "insertion_handling",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub handler: Handler,
    pub trigger: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub sentences: Vec<String>,
    pub trace: Vec<TraceEntry>,
    pub changed: bool,
}

/// The outcome of one handler on one clause.
struct Split {
    drafts: Vec<ClauseDraft>,
    trigger: usize,
}

/// Membership mask over 1-based indices for the clause being processed.
struct Active {
    mask: Vec<bool>,
}

impl Active {
    fn of(sentence: &AnnotatedSentence, draft: &ClauseDraft) -> Self {
        let mut mask = vec![false; sentence.len() + 1];
        for &i in &draft.token_indices {
            mask[i] = true;
        }
        Active { mask }
    }

    fn contains(&self, index: usize) -> bool {
        self.mask.get(index).copied().unwrap_or(false)
    }
}

fn is_coordinator(token: &Token) -> bool {
    COORDINATORS.contains(&token.surface.to_lowercase().as_str())
}

fn has_content(sentence: &AnnotatedSentence, indices: &[usize]) -> bool {
    indices.iter().any(|&i| {
        let t = sentence.token(i);
        !t.is_punct() && !is_coordinator(t)
    })
}

pub(crate) fn is_participle(token: &Token) -> bool {
    let lower = token.surface.to_lowercase();
    let verbal = token.is_verbal() || token.pos.is_empty();
    verbal && lower.len() > 3 && (lower.ends_with("ing") || lower.ends_with("ed") || lower.ends_with("en"))
}

/// Finds the leftmost relational argument and splits off its relative clause,
/// replacing the relational argument with a copy of the subject argument.
pub fn wh_handling(sentence: &AnnotatedSentence) -> Option<(ClauseDraft, ClauseDraft)> {
    let split = wh_split(sentence, &ClauseDraft::whole(sentence))?;
    into_pair(split)
}

fn wh_split(sentence: &AnnotatedSentence, draft: &ClauseDraft) -> Option<Split> {
    let active = Active::of(sentence, draft);
    let relational = sentence
        .frames()
        .iter()
        .enumerate()
        .flat_map(|(f, frame)| frame.arguments.iter().map(move |a| (f, a)))
        .filter(|(_, a)| a.is_relational() && a.indices().all(|i| active.contains(i)))
        .min_by_key(|(_, a)| a.start)?;
    let (frame_idx, rarg) = relational;

    // Subject argument: nearest core argument ending before the R-ARG.
    let subject = sentence
        .frames()
        .iter()
        .flat_map(|frame| frame.arguments.iter())
        .filter(|a| a.is_core() && a.end < rarg.start)
        .max_by_key(|a| (a.end, a.start))?;

    let clause_root = relative_clause_root(sentence, &active, rarg.start, frame_idx)?;
    let root_head = sentence.token(clause_root).head;
    if !active.contains(root_head) {
        return None;
    }
    let clause: Vec<usize> = sentence
        .subtree(clause_root)
        .into_iter()
        .filter(|&i| active.contains(i))
        .collect();
    if subject.indices().any(|i| clause.contains(&i)) || !rarg.indices().all(|i| clause.contains(&i)) {
        return None;
    }
    let main: Vec<usize> = draft
        .token_indices
        .iter()
        .copied()
        .filter(|i| !clause.contains(i))
        .collect();
    let relative: Vec<usize> = clause.into_iter().filter(|&i| !rarg.contains(i)).collect();
    if !has_content(sentence, &main) || !has_content(sentence, &relative) {
        return None;
    }
    let subject_words = sentence.surfaces(&subject.indices().collect::<Vec<_>>());
    Some(Split {
        drafts: vec![
            ClauseDraft::new(sentence, main, draft.prefix_tokens.clone()),
            ClauseDraft::new(sentence, relative, subject_words),
        ],
        trigger: rarg.start,
    })
}

/// Nearest ancestor of the R-ARG token carrying a relative-clause label,
/// falling back to the R-ARG frame's predicate when it dominates the R-ARG.
fn relative_clause_root(
    sentence: &AnnotatedSentence,
    active: &Active,
    rarg_token: usize,
    frame_idx: usize,
) -> Option<usize> {
    let labels = ModifierLabels::default();
    let mut current = rarg_token;
    while current != 0 && active.contains(current) {
        let token = sentence.token(current);
        if labels.is_relative(&token.deprel) {
            return Some(current);
        }
        current = token.head;
    }
    let predicate = sentence.frames()[frame_idx].predicate_index;
    (active.contains(predicate) && sentence.dominates(predicate, rarg_token)).then_some(predicate)
}

/// Splits at the first clause-level "and": one followed by the start of a core
/// argument, or by a verb (or an auxiliary of a verb) of some frame.
pub fn conjunction_handling(sentence: &AnnotatedSentence) -> Option<(ClauseDraft, ClauseDraft)> {
    let split = conjunction_split(sentence, &ClauseDraft::whole(sentence))?;
    into_pair(split)
}

/// What follows a clause-level "and".
enum AndCase {
    /// A new argument starts: the rest is a full sentence.
    Argument,
    /// A verb follows; its subject must be copied in.
    Verb { subject: Vec<usize> },
}

/// Classifies an "and" token given the next token of the clause.
fn classify_and(sentence: &AnnotatedSentence, and_index: usize, next: usize) -> Option<AndCase> {
    let frames = sentence.frames();
    let starts_argument = frames
        .iter()
        .flat_map(|f| f.arguments.iter())
        .any(|a| a.is_core() && a.start == next);
    if starts_argument {
        return Some(AndCase::Argument);
    }

    let next_token = sentence.token(next);
    let verb_frame = frames.iter().find(|f| {
        f.verb().is_some_and(|v| {
            v.start == next || (label_matches(&next_token.deprel, &AUXILIARY_LABELS) && v.contains(next_token.head))
        })
    })?;
    let in_frame = verb_frame
        .arguments
        .iter()
        .filter(|a| a.is_core() && a.end < and_index)
        .max_by_key(|a| (a.end, a.start));
    let across = || {
        frames
            .iter()
            .flat_map(|f| f.arguments.iter())
            .filter(|a| a.is_core() && a.end < and_index)
            .max_by_key(|a| (a.end, a.start))
    };
    let subject = in_frame.or_else(across)?;
    Some(AndCase::Verb {
        subject: subject.indices().collect(),
    })
}

/// True if some "and" in the sentence would trigger conjunction handling.
pub fn has_clause_level_and(sentence: &AnnotatedSentence) -> bool {
    conjunction_split(sentence, &ClauseDraft::whole(sentence)).is_some()
}

fn conjunction_split(sentence: &AnnotatedSentence, draft: &ClauseDraft) -> Option<Split> {
    let indices = &draft.token_indices;
    for (pos, &i) in indices.iter().enumerate() {
        if sentence.token(i).surface.to_lowercase() != "and" {
            continue;
        }
        let Some(&next) = indices.get(pos + 1) else {
            continue;
        };
        let Some(case) = classify_and(sentence, i, next) else {
            continue;
        };
        let before = indices[..pos].to_vec();
        let after = indices[pos + 1..].to_vec();
        if !has_content(sentence, &before) || !has_content(sentence, &after) {
            continue;
        }
        let prefix = match case {
            AndCase::Argument => Vec::new(),
            AndCase::Verb { subject } => sentence.surfaces(&subject),
        };
        return Some(Split {
            drafts: vec![
                ClauseDraft::new(sentence, before, draft.prefix_tokens.clone()),
                ClauseDraft::new(sentence, after, prefix),
            ],
            trigger: i,
        });
    }
    None
}

/// Extracts the leftmost qualifying modifier subtree as its own sentence,
/// prefixed with the subject (and a copula where needed).
pub fn insertion_handling(sentence: &AnnotatedSentence) -> Option<(ClauseDraft, ClauseDraft)> {
    insertion_handling_with(sentence, &EngineConfig::default())
}

pub fn insertion_handling_with(
    sentence: &AnnotatedSentence,
    config: &EngineConfig,
) -> Option<(ClauseDraft, ClauseDraft)> {
    let single = EngineConfig {
        exhaustive_insertion: false,
        ..config.clone()
    };
    let split = insertion_split(sentence, &ClauseDraft::whole(sentence), &single)?;
    into_pair(split)
}

/// The non-punctuation root of the clause, i.e. the first active token whose
/// head lies outside the clause.
fn clause_root(sentence: &AnnotatedSentence, active: &Active, draft: &ClauseDraft) -> Option<usize> {
    let roots: Vec<usize> = draft
        .token_indices
        .iter()
        .copied()
        .filter(|&i| !active.contains(sentence.token(i).head))
        .collect();
    roots
        .iter()
        .copied()
        .find(|&i| !sentence.token(i).is_punct())
        .or_else(|| roots.first().copied())
}

fn restricted_subtree(sentence: &AnnotatedSentence, active: &Active, node: usize) -> Vec<usize> {
    sentence
        .subtree(node)
        .into_iter()
        .filter(|&i| active.contains(i))
        .collect()
}

enum Subject {
    Tokens(Vec<usize>),
    Words(Vec<String>),
}

impl Subject {
    fn words(&self, sentence: &AnnotatedSentence) -> Vec<String> {
        match self {
            Subject::Tokens(indices) => sentence.surfaces(indices),
            Subject::Words(words) => words.clone(),
        }
    }

    fn overlaps(&self, indices: &[usize]) -> bool {
        match self {
            Subject::Tokens(own) => own.iter().any(|i| indices.contains(i)),
            Subject::Words(_) => false,
        }
    }
}

fn trim_punct(sentence: &AnnotatedSentence, mut indices: Vec<usize>) -> Vec<usize> {
    while indices.first().is_some_and(|&i| sentence.token(i).is_punct()) {
        indices.remove(0);
    }
    while indices.last().is_some_and(|&i| sentence.token(i).is_punct()) {
        indices.pop();
    }
    indices
}

/// Subject-relation dependent of the clause root, or the clause's own copied
/// subject when the root has none in range.
fn clause_subject(sentence: &AnnotatedSentence, active: &Active, draft: &ClauseDraft, root: usize) -> Option<Subject> {
    let dependent = sentence
        .children(root)
        .find(|t| active.contains(t.index) && label_matches(&t.deprel, &SUBJECT_LABELS))
        .map(|t| t.index);
    if let Some(subj) = dependent {
        let span = trim_punct(sentence, restricted_subtree(sentence, active, subj));
        if !span.is_empty() {
            return Some(Subject::Tokens(span));
        }
    }
    let mut words = draft.prefix_tokens.clone();
    while words
        .last()
        .is_some_and(|w| COPULAS.contains(&w.to_lowercase().as_str()))
    {
        words.pop();
    }
    (!words.is_empty()).then_some(Subject::Words(words))
}

/// Subject for an apposition: the proper-name span of its head nominal, or
/// the head's own subtree minus the apposition for common nouns.
fn appositive_subject(
    sentence: &AnnotatedSentence,
    active: &Active,
    head: usize,
    apposition: &[usize],
) -> Option<Vec<usize>> {
    if !active.contains(head) {
        return None;
    }
    let head_token = sentence.token(head);
    if head_token.pos.eq_ignore_ascii_case("PROPN") {
        let name_part = |i: usize| {
            let t = sentence.token(i);
            active.contains(i)
                && t.pos.eq_ignore_ascii_case("PROPN")
                && label_matches(&t.deprel, &NAME_PART_LABELS)
                && sentence.dominates(head, i)
        };
        let mut start = head;
        while start > 1 && name_part(start - 1) {
            start -= 1;
        }
        let mut end = head;
        while end < sentence.len() && name_part(end + 1) {
            end += 1;
        }
        return Some((start..=end).collect());
    }
    let span: Vec<usize> = restricted_subtree(sentence, active, head)
        .into_iter()
        .filter(|i| !apposition.contains(i))
        .collect();
    let span = trim_punct(sentence, span);
    (!span.is_empty()).then_some(span)
}

fn copula_for(sentence: &AnnotatedSentence, active: &Active, root: usize) -> String {
    sentence
        .children(root)
        .filter(|t| active.contains(t.index) && label_matches(&t.deprel, &AUXILIARY_LABELS))
        .map(|t| t.surface.to_lowercase())
        .find(|w| COPULAS.contains(&w.as_str()))
        .unwrap_or_else(|| "is".to_string())
}

/// A verbal head with no subject, auxiliary or marker of its own heads a
/// non-finite clause ("found in Malaysia", "serving the city").
fn is_nonfinite_head(sentence: &AnnotatedSentence, node: usize) -> bool {
    let token = sentence.token(node);
    token.is_verbal()
        && !sentence.children(node).any(|c| {
            label_matches(&c.deprel, &SUBJECT_LABELS)
                || label_matches(&c.deprel, &AUXILIARY_LABELS)
                || label_matches(&c.deprel, &["mark", "csubj", "expl"])
        })
}

fn needs_copula(sentence: &AnnotatedSentence, node: usize, extracted: &[usize]) -> bool {
    let has_verb = sentence
        .frames()
        .iter()
        .filter_map(|f| f.verb())
        .any(|v| extracted.contains(&v.start));
    let starts_nonfinite = extracted
        .iter()
        .map(|&i| sentence.token(i))
        .find(|t| !t.is_punct())
        .is_some_and(|t| {
            is_participle(t)
                || (t.index == node && is_nonfinite_head(sentence, node))
                || matches!(t.pos.to_ascii_uppercase().as_str(), "ADJ" | "ADP")
        });
    !has_verb || starts_nonfinite
}

fn insertion_split(sentence: &AnnotatedSentence, draft: &ClauseDraft, config: &EngineConfig) -> Option<Split> {
    let active = Active::of(sentence, draft);
    let root = clause_root(sentence, &active, draft)?;
    let main_subject = clause_subject(sentence, &active, draft, root);
    let copula = copula_for(sentence, &active, root);

    let mut taken = vec![false; sentence.len() + 1];
    let mut extracted: Vec<ClauseDraft> = Vec::new();
    let mut trigger = None;

    for &node in &draft.token_indices {
        if taken[node] {
            continue;
        }
        let token = sentence.token(node);
        if !active.contains(token.head) {
            continue;
        }
        let Some(class) = config.labels.classify(&token.deprel) else {
            continue;
        };
        if class == ModifierClass::Prepositional {
            // Only modifiers of nominals; obliques of verbs are arguments.
            let head = sentence.token(token.head);
            let nominal_head = if head.pos.is_empty() {
                !label_matches(&token.deprel, &["obl"])
            } else {
                head.is_nominal()
            };
            if !nominal_head {
                continue;
            }
        }
        let subtree = restricted_subtree(sentence, &active, node);
        if subtree.iter().any(|&i| taken[i]) {
            continue;
        }
        let content = subtree.iter().filter(|&&i| !sentence.token(i).is_punct()).count();
        if content < config.minimum_span {
            continue;
        }
        let subject = if class == ModifierClass::Appositional {
            appositive_subject(sentence, &active, token.head, &subtree).map(Subject::Tokens)
        } else {
            main_subject.as_ref().map(|s| match s {
                Subject::Tokens(t) => Subject::Tokens(t.clone()),
                Subject::Words(w) => Subject::Words(w.clone()),
            })
        };
        let Some(subject) = subject else {
            continue;
        };
        if subject.overlaps(&subtree) || !has_content(sentence, &subtree) {
            continue;
        }

        let mut prefix = subject.words(sentence);
        if config.copula_insertion && needs_copula(sentence, node, &subtree) {
            prefix.push(copula.clone());
        }
        for &i in &subtree {
            taken[i] = true;
        }
        trigger.get_or_insert(node);
        extracted.push(ClauseDraft::new(sentence, subtree, prefix));
        if !config.exhaustive_insertion {
            break;
        }
    }

    let trigger = trigger?;
    let remainder: Vec<usize> = draft.token_indices.iter().copied().filter(|&i| !taken[i]).collect();
    if !has_content(sentence, &remainder) {
        return None;
    }
    let mut drafts = extracted;
    drafts.push(ClauseDraft::new(sentence, remainder, draft.prefix_tokens.clone()));
    drafts.sort_by_key(ClauseDraft::first_index);
    Some(Split { drafts, trigger })
}

fn into_pair(split: Split) -> Option<(ClauseDraft, ClauseDraft)> {
    let mut drafts = split.drafts.into_iter();
    let first = drafts.next()?;
    let second = drafts.next()?;
    Some((first, second))
}

fn is_terminal(word: &str) -> bool {
    matches!(word, "." | "!" | "?")
}

fn attaches_left(word: &str) -> bool {
    word.starts_with([',', '.', ';', ':', '\'', '’', ')', ']', '}', '!', '?', '%']) || word.eq_ignore_ascii_case("n't")
}

fn attaches_right(word: &str) -> bool {
    matches!(word, "(" | "[" | "{")
}

/// Joins words with single spaces, without a space before closing punctuation.
pub fn detokenize<S: AsRef<str>>(words: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = true;
    for word in words {
        let word = word.as_ref();
        if !glue_next && !attaches_left(word) {
            out.push(' ');
        }
        out.push_str(word);
        glue_next = attaches_right(word);
    }
    out
}

fn uppercase_first_alpha(words: &mut [String]) {
    for word in words.iter_mut() {
        if let Some((pos, c)) = word.char_indices().find(|(_, c)| c.is_alphabetic()) {
            if !c.is_uppercase() {
                let upper: String = c.to_uppercase().collect();
                word.replace_range(pos..pos + c.len_utf8(), &upper);
            }
            return;
        }
    }
}

fn lowercase_first(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Surface realization of a draft.
pub fn realize(draft: &ClauseDraft, source: &AnnotatedSentence) -> Result<String, RealizeError> {
    if let Some(&bad) = draft.token_indices.iter().find(|&&i| i == 0 || i > source.len()) {
        return Err(RealizeError::BadIndex {
            sentence_id: source.sentence_id().to_string(),
            index: bad,
        });
    }
    let mut tokens: Vec<&Token> = draft.token_indices.iter().map(|&i| source.token(i)).collect();

    let is_comma = |t: &Token| t.surface == ",";
    while tokens.first().is_some_and(|t| is_comma(t) || is_coordinator(t)) {
        tokens.remove(0);
    }
    loop {
        let n = tokens.len();
        if n >= 1 && matches!(tokens[n - 1].surface.as_str(), "," | ";" | ":") {
            tokens.pop();
        } else if n >= 2 && is_terminal(&tokens[n - 1].surface) && is_comma(tokens[n - 2]) {
            tokens.remove(n - 2);
        } else {
            break;
        }
    }
    tokens.dedup_by(|b, a| is_comma(a) && is_comma(b));

    let mut words: Vec<String> = draft.prefix_tokens.clone();
    let leads = words.is_empty();
    for (pos, token) in tokens.iter().enumerate() {
        // The source's first word was capitalized only by position.
        let demote = token.index == 1
            && !(leads && pos == 0)
            && !token.pos.eq_ignore_ascii_case("PROPN")
            && token.surface != "I"
            && (token.surface.chars().count() == 1 || token.surface.chars().skip(1).any(|c| c.is_lowercase()));
        words.push(if demote {
            lowercase_first(&token.surface)
        } else {
            token.surface.clone()
        });
    }
    if words.is_empty() {
        return Err(RealizeError::EmptyDraft(source.sentence_id().to_string()));
    }
    if !words.last().is_some_and(|w| is_terminal(w)) {
        words.push(".".to_string());
    }
    uppercase_first_alpha(&mut words);
    Ok(detokenize(&words))
}

/// Runs the three handlers and returns the resulting drafts (in source order)
/// together with the firing trace.
pub fn split_drafts(sentence: &AnnotatedSentence, config: &EngineConfig) -> (Vec<ClauseDraft>, Vec<TraceEntry>) {
    let mut clauses = vec![ClauseDraft::whole(sentence)];
    let mut trace = Vec::new();
    for handler in [
        Handler::WhHandling,
        Handler::ConjunctionHandling,
        Handler::InsertionHandling,
    ] {
        let target = longest(&clauses);
        let split = match handler {
            Handler::WhHandling => wh_split(sentence, &clauses[target]),
            Handler::ConjunctionHandling => conjunction_split(sentence, &clauses[target]),
            Handler::InsertionHandling => insertion_split(sentence, &clauses[target], config),
        };
        if let Some(split) = split {
            clauses.splice(target..=target, split.drafts);
            clauses.sort_by_key(ClauseDraft::first_index);
            trace.push(TraceEntry {
                handler,
                trigger: split.trigger,
            });
        }
    }
    (clauses, trace)
}

/// Index of the longest clause; the earliest wins ties.
fn longest(clauses: &[ClauseDraft]) -> usize {
    let mut best = 0;
    for (i, c) in clauses.iter().enumerate() {
        if c.token_count() > clauses[best].token_count() {
            best = i;
        }
    }
    best
}

pub fn split_and_rephrase(sentence: &AnnotatedSentence, config: &EngineConfig) -> Result<SplitResult, RealizeError> {
    let (drafts, trace) = split_drafts(sentence, config);
    let sentences = drafts
        .iter()
        .map(|d| realize(d, sentence))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SplitResult {
        changed: !trace.is_empty(),
        sentences,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{SrlArgument, SrlFrame};

    fn sentence(words: &[(&str, usize, &str, &str)], frames: Vec<SrlFrame>) -> AnnotatedSentence {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, (w, h, d, p))| Token::new(i + 1, w, *h, d, p))
            .collect();
        AnnotatedSentence::new("t", tokens, frames).unwrap()
    }

    fn frame(pred: usize, args: &[(&str, usize, usize)]) -> SrlFrame {
        SrlFrame {
            predicate_index: pred,
            arguments: args.iter().map(|(l, s, e)| SrlArgument::new(l, *s, *e)).collect(),
        }
    }

    fn draft(indices: Vec<usize>, prefix: &[&str]) -> ClauseDraft {
        ClauseDraft {
            token_indices: indices,
            prefix_tokens: prefix.iter().map(|s| s.to_string()).collect(),
            source_id: "t".into(),
        }
    }

    fn alice() -> AnnotatedSentence {
        sentence(
            &[
                ("Alice", 2, "nsubj", "PROPN"),
                ("sings", 0, "root", "VERB"),
                ("and", 5, "cc", "CCONJ"),
                ("Bob", 5, "nsubj", "PROPN"),
                ("dances", 2, "conj", "VERB"),
                (".", 2, "punct", "PUNCT"),
            ],
            vec![
                frame(2, &[("ARG0", 1, 1), ("V", 2, 2)]),
                frame(5, &[("ARG0", 4, 4), ("V", 5, 5)]),
            ],
        )
    }

    #[test]
    fn conjunction_argument_case() {
        let s = alice();
        let (a, b) = conjunction_handling(&s).unwrap();
        assert_eq!(realize(&a, &s).unwrap(), "Alice sings.");
        assert_eq!(realize(&b, &s).unwrap(), "Bob dances.");
    }

    #[test]
    fn noun_phrase_and_is_skipped() {
        let s = sentence(
            &[
                ("bread", 0, "root", "NOUN"),
                ("and", 3, "cc", "CCONJ"),
                ("butter", 1, "conj", "NOUN"),
            ],
            vec![],
        );
        assert!(conjunction_handling(&s).is_none());
    }

    #[test]
    fn no_relational_argument() {
        assert!(wh_handling(&alice()).is_none());
    }

    #[test]
    fn relational_argument_without_preceding_subject() {
        // "Which was built ." - nothing precedes the R-ARG.
        let s = sentence(
            &[
                ("Which", 3, "nsubj:pass", "PRON"),
                ("was", 3, "aux:pass", "AUX"),
                ("built", 0, "root", "VERB"),
                (".", 3, "punct", "PUNCT"),
            ],
            vec![frame(3, &[("R-ARG1", 1, 1), ("V", 3, 3)])],
        );
        assert!(wh_handling(&s).is_none());
    }

    #[test]
    fn short_modifiers_are_ignored() {
        // "The big dog runs ." - amod of length 1.
        let s = sentence(
            &[
                ("The", 3, "det", "DET"),
                ("big", 3, "amod", "ADJ"),
                ("dog", 4, "nsubj", "NOUN"),
                ("runs", 0, "root", "VERB"),
                (".", 4, "punct", "PUNCT"),
            ],
            vec![frame(4, &[("ARG0", 1, 3), ("V", 4, 4)])],
        );
        assert!(insertion_handling(&s).is_none());
        let result = split_and_rephrase(&s, &EngineConfig::default()).unwrap();
        assert!(!result.changed);
        assert_eq!(result.sentences, vec!["The big dog runs."]);

        let loose = EngineConfig {
            minimum_span: 1,
            ..EngineConfig::default()
        };
        // The only modifier sits inside the subject, so nothing can be extracted.
        assert!(insertion_handling_with(&s, &loose).is_none());

        let met = sentence(
            &[
                ("Bob", 2, "nsubj", "PROPN"),
                ("met", 0, "root", "VERB"),
                ("the", 5, "det", "DET"),
                ("tall", 5, "amod", "ADJ"),
                ("woman", 2, "obj", "NOUN"),
                (".", 2, "punct", "PUNCT"),
            ],
            vec![frame(2, &[("ARG0", 1, 1), ("V", 2, 2), ("ARG1", 3, 5)])],
        );
        assert!(insertion_handling(&met).is_none());
        let (a, b) = insertion_handling_with(&met, &loose).unwrap();
        assert_eq!(realize(&a, &met).unwrap(), "Bob met the woman.");
        assert_eq!(realize(&b, &met).unwrap(), "Bob is tall.");
    }

    #[test]
    fn realize_plain_tokens() {
        let s = sentence(
            &[
                ("Baymax", 3, "nsubj:pass", "PROPN"),
                ("was", 3, "aux:pass", "AUX"),
                ("created", 0, "root", "VERB"),
                ("by", 5, "case", "ADP"),
                ("Duncan", 3, "obl", "PROPN"),
                ("Rouleau", 5, "flat", "PROPN"),
            ],
            vec![],
        );
        let d = draft((1..=6).collect(), &[]);
        assert_eq!(realize(&d, &s).unwrap(), "Baymax was created by Duncan Rouleau.");
    }

    #[test]
    fn realize_strips_leading_comma_after_prefix() {
        let s = sentence(
            &[
                (",", 2, "punct", "PUNCT"),
                ("father", 0, "root", "NOUN"),
                ("of", 6, "case", "ADP"),
                ("her", 6, "nmod:poss", "PRON"),
                ("only", 6, "amod", "ADJ"),
                ("daughter", 2, "nmod", "NOUN"),
            ],
            vec![],
        );
        let d = draft((1..=6).collect(), &["Ruy", "Guerra", "is"]);
        assert_eq!(realize(&d, &s).unwrap(), "Ruy Guerra is father of her only daughter.");
    }

    #[test]
    fn realize_empty_draft_is_an_error() {
        let s = alice();
        let d = draft(vec![], &[]);
        assert!(matches!(realize(&d, &s), Err(RealizeError::EmptyDraft(_))));
        let commas_only = sentence(&[(",", 0, "root", "PUNCT")], vec![]);
        assert!(realize(&draft(vec![1], &[]), &commas_only).is_err());
    }

    #[test]
    fn realize_drops_leading_coordinator_and_dangling_commas() {
        let s = sentence(
            &[
                ("and", 2, "cc", "CCONJ"),
                ("it", 3, "nsubj", "PRON"),
                ("rains", 0, "root", "VERB"),
                (",", 3, "punct", "PUNCT"),
                (".", 3, "punct", "PUNCT"),
            ],
            vec![],
        );
        assert_eq!(realize(&draft((1..=5).collect(), &[]), &s).unwrap(), "It rains.");
    }

    #[test]
    fn detokenize_attaches_punctuation() {
        assert_eq!(
            detokenize(&["the", "series", "'", "character", "(", "x", ")", ",", "y", "."]),
            "the series' character (x), y."
        );
    }

    #[test]
    fn handler_names() {
        assert_eq!(Handler::WhHandling.name(), "wh_handling");
        let json = serde_json::to_string(&Handler::ConjunctionHandling).unwrap();
        assert_eq!(json, "\"conjunction_handling\"");
    }
}
