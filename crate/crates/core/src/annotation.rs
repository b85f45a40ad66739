//! Dependency and semantic-role annotations for single sentences.
//!
//! Two interchange formats are read here: CoNLL-U for the dependency layer
//! and a line-delimited JSON format for SRL frames. The two are joined on
//! `sentence_id` with [`attach_frames`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("sentence {sentence}, line {line}: {message}")]
    Parse {
        sentence: String,
        line: usize,
        message: String,
    },
    #[error("sentence {sentence_id}: {message}")]
    Invalid { sentence_id: String, message: String },
    #[error("srl line {line}: {message}")]
    Json { line: usize, message: String },
}

fn invalid(sentence_id: &str, message: impl Into<String>) -> AnnotationError {
    AnnotationError::Invalid {
        sentence_id: sentence_id.to_string(),
        message: message.into(),
    }
}

/// One token of a dependency parse. Indices are 1-based; `head == 0` marks the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub head: usize,
    pub deprel: String,
    #[serde(default)]
    pub pos: String,
}

impl Token {
    pub fn new(index: usize, surface: &str, head: usize, deprel: &str, pos: &str) -> Self {
        Token {
            index,
            surface: surface.to_string(),
            head,
            deprel: deprel.to_string(),
            pos: pos.to_string(),
        }
    }

    pub fn is_punct(&self) -> bool {
        self.pos.eq_ignore_ascii_case("PUNCT")
            || label_matches(&self.deprel, &["punct"])
            || (!self.surface.is_empty() && self.surface.chars().all(|c| c.is_ascii_punctuation()))
    }

    pub fn is_nominal(&self) -> bool {
        matches!(
            self.pos.to_ascii_uppercase().as_str(),
            "NOUN" | "PROPN" | "PRON" | "NUM"
        )
    }

    pub fn is_verbal(&self) -> bool {
        matches!(self.pos.to_ascii_uppercase().as_str(), "VERB" | "AUX")
    }
}

/// Case-insensitive deprel match. A label also matches through its prefix
/// before `:`, so `acl:relcl` matches `acl`.
pub fn label_matches(deprel: &str, accepted: &[&str]) -> bool {
    let lower = deprel.to_ascii_lowercase();
    let prefix = lower.split(':').next().unwrap_or("");
    accepted
        .iter()
        .any(|a| a.eq_ignore_ascii_case(&lower) || a.eq_ignore_ascii_case(prefix))
}

/// Exact case-insensitive match only, without the prefix rule.
pub fn label_is(deprel: &str, accepted: &[&str]) -> bool {
    accepted.iter().any(|a| a.eq_ignore_ascii_case(deprel))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrlArgument {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl SrlArgument {
    pub fn new(label: &str, start: usize, end: usize) -> Self {
        SrlArgument {
            label: label.to_string(),
            start,
            end,
        }
    }

    pub fn is_verb(&self) -> bool {
        self.label == "V"
    }

    /// `R-ARG0`, `R-ARGM-LOC` and friends.
    pub fn is_relational(&self) -> bool {
        self.label.starts_with("R-ARG")
    }

    /// Numbered core arguments (`ARG0`..`ARG5`, `ARGA`), not modifiers or continuations.
    pub fn is_core(&self) -> bool {
        match self.label.strip_prefix("ARG") {
            Some(rest) => rest.chars().next().is_some_and(|c| c.is_ascii_digit() || c == 'A'),
            None => false,
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> {
        self.start..=self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrlFrame {
    pub predicate_index: usize,
    pub arguments: Vec<SrlArgument>,
}

impl SrlFrame {
    pub fn verb(&self) -> Option<&SrlArgument> {
        self.arguments.iter().find(|a| a.is_verb())
    }

    /// Checks the frame-local invariants: a single `V` containing the
    /// predicate and pairwise disjoint, well-ordered spans.
    fn validate_shape(&self, sentence_id: &str) -> Result<(), AnnotationError> {
        let verbs: Vec<_> = self.arguments.iter().filter(|a| a.is_verb()).collect();
        match verbs.as_slice() {
            [] => return Err(invalid(sentence_id, "frame has no V argument")),
            [v] if !v.contains(self.predicate_index) => {
                return Err(invalid(
                    sentence_id,
                    format!(
                        "V span [{}, {}] does not contain predicate {}",
                        v.start, v.end, self.predicate_index
                    ),
                ))
            }
            [_] => {}
            _ => return Err(invalid(sentence_id, "frame has more than one V argument")),
        }
        for arg in &self.arguments {
            if arg.start == 0 || arg.start > arg.end {
                return Err(invalid(
                    sentence_id,
                    format!("malformed span {} [{}, {}]", arg.label, arg.start, arg.end),
                ));
            }
        }
        let mut spans: Vec<_> = self.arguments.iter().collect();
        spans.sort_by_key(|a| (a.start, a.end));
        for pair in spans.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(invalid(
                    sentence_id,
                    format!(
                        "overlapping spans {} [{}, {}] and {} [{}, {}]",
                        pair[0].label, pair[0].start, pair[0].end, pair[1].label, pair[1].start, pair[1].end
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// A sentence with both annotation layers. Construction validates every
/// invariant, so holders of an `AnnotatedSentence` may index freely.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnnotatedSentence {
    sentence_id: String,
    tokens: Vec<Token>,
    frames: Vec<SrlFrame>,
}

impl AnnotatedSentence {
    pub fn new(
        sentence_id: impl Into<String>,
        tokens: Vec<Token>,
        frames: Vec<SrlFrame>,
    ) -> Result<Self, AnnotationError> {
        let sentence_id = sentence_id.into();
        validate_tokens(&sentence_id, &tokens)?;
        for frame in &frames {
            validate_frame(&sentence_id, frame, tokens.len())?;
        }
        Ok(AnnotatedSentence {
            sentence_id,
            tokens,
            frames,
        })
    }

    pub fn sentence_id(&self) -> &str {
        &self.sentence_id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn frames(&self) -> &[SrlFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    pub fn root(&self) -> usize {
        self.tokens
            .iter()
            .find(|t| t.head == 0)
            .map(|t| t.index)
            .expect("validated sentence has a root")
    }

    /// Direct dependents of `head`, ascending.
    pub fn children(&self, head: usize) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(move |t| t.head == head)
    }

    /// `root_index` together with all of its transitive dependents, ascending.
    pub fn subtree(&self, root_index: usize) -> Vec<usize> {
        assert!(
            (1..=self.len()).contains(&root_index),
            "token index {root_index} out of range"
        );
        let mut inside = vec![false; self.len() + 1];
        inside[root_index] = true;
        let mut stack = vec![root_index];
        while let Some(node) = stack.pop() {
            for child in self.children(node) {
                if !inside[child.index] {
                    inside[child.index] = true;
                    stack.push(child.index);
                }
            }
        }
        (1..=self.len()).filter(|&i| inside[i]).collect()
    }

    /// True when `ancestor` dominates `index` (reflexively).
    pub fn dominates(&self, ancestor: usize, index: usize) -> bool {
        let mut current = index;
        loop {
            if current == ancestor {
                return true;
            }
            if current == 0 {
                return false;
            }
            current = self.token(current).head;
        }
    }

    pub fn surfaces(&self, indices: &[usize]) -> Vec<String> {
        indices.iter().map(|&i| self.token(i).surface.clone()).collect()
    }

    /// The sentence text with tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn with_frames(self, frames: Vec<SrlFrame>) -> Result<Self, AnnotationError> {
        AnnotatedSentence::new(self.sentence_id, self.tokens, frames)
    }
}

fn validate_tokens(sentence_id: &str, tokens: &[Token]) -> Result<(), AnnotationError> {
    if tokens.is_empty() {
        return Err(invalid(sentence_id, "sentence has no tokens"));
    }
    let n = tokens.len();
    for (offset, token) in tokens.iter().enumerate() {
        if token.index != offset + 1 {
            return Err(invalid(
                sentence_id,
                format!("token {} found at position {}", token.index, offset + 1),
            ));
        }
        if token.surface.is_empty() {
            return Err(invalid(sentence_id, format!("token {} has empty surface", token.index)));
        }
        if token.head == token.index {
            return Err(invalid(sentence_id, format!("self-headed token {}", token.index)));
        }
        if token.head > n {
            return Err(invalid(
                sentence_id,
                format!("token {} has out-of-range head {}", token.index, token.head),
            ));
        }
    }
    let roots = tokens.iter().filter(|t| t.head == 0).count();
    if roots != 1 {
        return Err(invalid(sentence_id, format!("expected a single root, found {roots}")));
    }
    // Every chain must reach the root within n steps.
    for token in tokens {
        let mut current = token.index;
        let mut steps = 0;
        while current != 0 {
            current = tokens[current - 1].head;
            steps += 1;
            if steps > n {
                return Err(invalid(
                    sentence_id,
                    format!("cyclic head chain through token {}", token.index),
                ));
            }
        }
    }
    Ok(())
}

fn validate_frame(sentence_id: &str, frame: &SrlFrame, len: usize) -> Result<(), AnnotationError> {
    frame.validate_shape(sentence_id)?;
    if frame.predicate_index == 0 || frame.predicate_index > len {
        return Err(invalid(
            sentence_id,
            format!("predicate {} out of range", frame.predicate_index),
        ));
    }
    for arg in &frame.arguments {
        if arg.end > len {
            return Err(invalid(
                sentence_id,
                format!(
                    "span {} [{}, {}] out of range for {} tokens",
                    arg.label, arg.start, arg.end, len
                ),
            ));
        }
    }
    Ok(())
}

/// Reads CoNLL-U text. Frames are left empty; see [`attach_frames`].
pub fn parse_conllu(text: &str) -> Result<Vec<AnnotatedSentence>, AnnotationError> {
    let mut sentences = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    let mut sent_id: Option<String> = None;

    let flush = |block: &mut Vec<(usize, &str)>,
                 sent_id: &mut Option<String>,
                 sentences: &mut Vec<AnnotatedSentence>|
     -> Result<(), AnnotationError> {
        if block.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let id = sent_id.take().unwrap_or_else(|| sentences.len().to_string());
        let sentence = parse_block(&id, block)?;
        sentences.push(sentence);
        block.clear();
        Ok(())
    };

    for (lineno, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut block, &mut sent_id, &mut sentences)?;
        } else if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
        } else {
            block.push((lineno + 1, line));
        }
    }
    flush(&mut block, &mut sent_id, &mut sentences)?;
    Ok(sentences)
}

fn parse_block(sentence_id: &str, lines: &[(usize, &str)]) -> Result<AnnotatedSentence, AnnotationError> {
    let parse_err = |line: usize, message: String| AnnotationError::Parse {
        sentence: sentence_id.to_string(),
        line,
        message,
    };
    let mut tokens = Vec::with_capacity(lines.len());
    let mut first_line = lines[0].0;
    for &(lineno, line) in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(parse_err(lineno, format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        if tokens.is_empty() {
            first_line = lineno;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("non-numeric ID {:?}", cols[0])))?;
        let head: usize = cols[6]
            .parse()
            .map_err(|_| parse_err(lineno, format!("non-numeric HEAD {:?}", cols[6])))?;
        if head == index {
            return Err(parse_err(lineno, format!("self-headed token {index}")));
        }
        let pos = if cols[3] == "_" { "" } else { cols[3] };
        tokens.push(Token::new(index, cols[1], head, cols[7], pos));
    }
    AnnotatedSentence::new(sentence_id, tokens, Vec::new()).map_err(|e| match e {
        AnnotationError::Invalid { message, .. } => parse_err(first_line, message),
        other => other,
    })
}

/// Writes sentences back out as CoNLL-U, with a `# sent_id` comment per block.
pub fn write_conllu(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        let _ = writeln!(out, "# sent_id = {}", sentence.sentence_id);
        for t in &sentence.tokens {
            let pos = if t.pos.is_empty() { "_" } else { &t.pos };
            let _ = writeln!(
                out,
                "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_",
                t.index, t.surface, pos, t.head, t.deprel
            );
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Deserialize, Serialize)]
struct SrlRecord {
    sentence_id: String,
    frames: Vec<SrlFrame>,
}

/// Reads the SRL interchange format (one JSON object per line). Frame shape
/// is validated here; span ranges are checked once joined to tokens.
pub fn parse_srl(text: &str) -> Result<BTreeMap<String, Vec<SrlFrame>>, AnnotationError> {
    let mut out: BTreeMap<String, Vec<SrlFrame>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: SrlRecord = serde_json::from_str(line).map_err(|e| AnnotationError::Json {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        for frame in &record.frames {
            frame.validate_shape(&record.sentence_id)?;
        }
        out.entry(record.sentence_id).or_default().extend(record.frames);
    }
    Ok(out)
}

pub fn write_srl(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        let record = SrlRecord {
            sentence_id: sentence.sentence_id.clone(),
            frames: sentence.frames.clone(),
        };
        out.push_str(&serde_json::to_string(&record).expect("srl record serializes"));
        out.push('\n');
    }
    out
}

/// Joins SRL frames onto parsed sentences by `sentence_id`. Sentences without
/// an SRL record keep an empty frame list; frames for unknown ids are an error.
pub fn attach_frames(
    sentences: Vec<AnnotatedSentence>,
    mut frames: BTreeMap<String, Vec<SrlFrame>>,
) -> Result<Vec<AnnotatedSentence>, AnnotationError> {
    let mut out = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        let sentence_frames = frames.remove(&sentence.sentence_id).unwrap_or_default();
        out.push(sentence.with_frames(sentence_frames)?);
    }
    if let Some(orphan) = frames.keys().next() {
        return Err(invalid(orphan, "SRL record has no matching CoNLL-U sentence"));
    }
    Ok(out)
}

/// Parses both layers and joins them.
pub fn load_annotations(conllu: &str, srl: Option<&str>) -> Result<Vec<AnnotatedSentence>, AnnotationError> {
    let sentences = parse_conllu(conllu)?;
    match srl {
        Some(srl) => attach_frames(sentences, parse_srl(srl)?),
        None => Ok(sentences),
    }
}
