//! Corpus- and sentence-level BLEU-4 with multiple references.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BleuError {
    #[error("no hypotheses given")]
    Empty,
    #[error("{hypotheses} hypotheses but {references} reference sets")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("hypothesis {0} has no references")]
    NoReferences(usize),
}

/// Splits text into BLEU tokens.
pub trait Tokenizer {
    /// Identifier recorded in reports.
    fn name(&self) -> &str;
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Lowercases, splits on whitespace and detaches trailing punctuation
/// (`.`, `,`, `!`, `?`, `;`, `:`) from each word.
#[derive(Clone, Copy, Debug, Default)]
pub struct DefaultTokenizer;

impl Tokenizer for DefaultTokenizer {
    fn name(&self) -> &str {
        "lowercase-split-terminal-punct"
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        split_terminal_punct(&text.to_lowercase())
    }
}

/// Whitespace split with trailing punctuation detached, case preserved.
pub fn split_terminal_punct(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let body = word.trim_end_matches(['.', ',', '!', '?', ';', ':']);
        if body.is_empty() {
            out.push(word.to_string());
            continue;
        }
        out.push(body.to_string());
        out.extend(word[body.len()..].chars().map(String::from));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// Modified n-gram precisions p_1..p_4.
    pub precisions: [f64; MAX_ORDER],
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hypothesis_length: usize,
    pub reference_length: usize,
    /// 0-100.
    pub score: f64,
    pub tokenizer: String,
    pub smoothing: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceBleu {
    pub score: f64,
    /// Set when the hypothesis had no tokens; the score is then 0.
    pub empty_hypothesis: bool,
}

type Counts<'a> = HashMap<&'a [String], u64>;

fn ngram_counts(tokens: &[String], n: usize) -> Counts<'_> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and hypothesis n-gram totals for one segment.
#[derive(Clone, Copy, Debug, Default)]
struct SegmentStats {
    matches: [u64; MAX_ORDER],
    totals: [u64; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
}

fn segment_stats(hyp: &[String], refs: &[Vec<String>]) -> SegmentStats {
    let mut stats = SegmentStats {
        hyp_len: hyp.len(),
        ref_len: closest_reference_length(hyp.len(), refs),
        ..SegmentStats::default()
    };
    for n in 1..=MAX_ORDER {
        let hyp_counts = ngram_counts(hyp, n);
        let mut max_ref: Counts<'_> = HashMap::new();
        for r in refs {
            for (gram, count) in ngram_counts(r, n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(count);
            }
        }
        stats.totals[n - 1] = hyp_counts.values().sum();
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(gram, &count)| count.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

/// Reference length closest to `hyp_len`; the shorter one wins ties.
fn closest_reference_length(hyp_len: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(hyp_len), len))
        .unwrap_or(0)
}

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

fn geometric_score(precisions: &[f64; MAX_ORDER], bp: f64) -> f64 {
    if precisions.iter().any(|&p| p <= 0.0) {
        return 0.0;
    }
    let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
    100.0 * bp * log_mean.exp()
}

pub fn bleu_corpus<S: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[S],
    references: &[Vec<R>],
) -> Result<BleuReport, BleuError> {
    bleu_corpus_with(&DefaultTokenizer, hypotheses, references)
}

/// Standard corpus BLEU-4: clipped counts summed over all segments, one
/// brevity penalty from the summed closest reference lengths.
pub fn bleu_corpus_with<T: Tokenizer + ?Sized, S: AsRef<str>, R: AsRef<str>>(
    tokenizer: &T,
    hypotheses: &[S],
    references: &[Vec<R>],
) -> Result<BleuReport, BleuError> {
    if hypotheses.is_empty() {
        return Err(BleuError::Empty);
    }
    if hypotheses.len() != references.len() {
        return Err(BleuError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    let mut total = SegmentStats::default();
    for (i, (hyp, refs)) in hypotheses.iter().zip(references).enumerate() {
        if refs.is_empty() {
            return Err(BleuError::NoReferences(i));
        }
        let hyp = tokenizer.tokenize(hyp.as_ref());
        let refs: Vec<Vec<String>> = refs.iter().map(|r| tokenizer.tokenize(r.as_ref())).collect();
        let seg = segment_stats(&hyp, &refs);
        for n in 0..MAX_ORDER {
            total.matches[n] += seg.matches[n];
            total.totals[n] += seg.totals[n];
        }
        total.hyp_len += seg.hyp_len;
        total.ref_len += seg.ref_len;
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if total.totals[n] > 0 {
            precisions[n] = total.matches[n] as f64 / total.totals[n] as f64;
        }
    }
    let bp = brevity_penalty(total.hyp_len, total.ref_len);
    Ok(BleuReport {
        precisions,
        matches: total.matches,
        totals: total.totals,
        brevity_penalty: bp,
        hypothesis_length: total.hyp_len,
        reference_length: total.ref_len,
        score: geometric_score(&precisions, bp),
        tokenizer: tokenizer.name().to_string(),
        smoothing: "none".to_string(),
    })
}

pub fn bleu_sentence<S: AsRef<str>>(hypothesis: &str, references: &[S]) -> Result<SentenceBleu, BleuError> {
    bleu_sentence_with(&DefaultTokenizer, hypothesis, references)
}

/// Sentence BLEU with add-one smoothing on the n ≥ 2 precisions.
pub fn bleu_sentence_with<T: Tokenizer + ?Sized, S: AsRef<str>>(
    tokenizer: &T,
    hypothesis: &str,
    references: &[S],
) -> Result<SentenceBleu, BleuError> {
    if references.is_empty() {
        return Err(BleuError::NoReferences(0));
    }
    let hyp = tokenizer.tokenize(hypothesis);
    if hyp.is_empty() {
        return Ok(SentenceBleu {
            score: 0.0,
            empty_hypothesis: true,
        });
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenizer.tokenize(r.as_ref())).collect();
    let seg = segment_stats(&hyp, &refs);
    let mut precisions = [0.0; MAX_ORDER];
    precisions[0] = seg.matches[0] as f64 / seg.totals[0] as f64;
    for n in 1..MAX_ORDER {
        precisions[n] = (seg.matches[n] as f64 + 1.0) / (seg.totals[n] as f64 + 1.0);
    }
    Ok(SentenceBleu {
        score: geometric_score(&precisions, brevity_penalty(seg.hyp_len, seg.ref_len)),
        empty_hypothesis: false,
    })
}

/// Label recorded for sentence-level scores.
pub const SENTENCE_SMOOTHING: &str = "add-one (n>=2)";
