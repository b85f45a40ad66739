//! Report builders behind `evaluate` and `correlate`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use splitbench::datasets::{AuthorKind, Benchmark};
use splitbench::metrics::bleu::{
    bleu_corpus, bleu_sentence, BleuReport, DefaultTokenizer, Tokenizer, SENTENCE_SMOOTHING,
};
use splitbench::metrics::correlation::{format_cell, spearman_with, CorrelationError, CorrelationResult, PValueMethod};
use splitbench::metrics::ratings::{
    aggregate_ratings, is_correct, render_columns, render_summary_table, CriteriaSummary, RatingRecord, SummaryRow,
};

/// One system output to score.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypothesis {
    pub pair_id: String,
    pub rewrite_id: String,
    pub author: String,
    pub text: String,
}

#[derive(Deserialize)]
struct HypothesisLine {
    #[serde(alias = "sentence_id")]
    pair_id: String,
    rewrite_id: Option<String>,
    author: Option<String>,
    sentences: Vec<String>,
}

/// Reads hypotheses from canonical benchmark lines (every rewrite is a
/// hypothesis) or from `split` output lines.
pub fn parse_hypotheses(text: &str) -> Result<Vec<Hypothesis>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).with_context(|| format!("hypothesis line {}", i + 1))?;
        if value.get("rewrites").is_some() {
            let pair: splitbench::datasets::ComplexSimplePair =
                serde_json::from_value(value).with_context(|| format!("hypothesis line {}", i + 1))?;
            for rw in pair.rewrites {
                out.push(Hypothesis {
                    pair_id: pair.pair_id.clone(),
                    rewrite_id: rw.rewrite_id,
                    author: rw.author.to_string(),
                    text: rw.sentences.join(" "),
                });
            }
        } else {
            let h: HypothesisLine =
                serde_json::from_value(value).with_context(|| format!("hypothesis line {}", i + 1))?;
            out.push(Hypothesis {
                rewrite_id: h.rewrite_id.unwrap_or_else(|| h.pair_id.clone()),
                pair_id: h.pair_id,
                author: h.author.unwrap_or_else(|| "hypothesis".into()),
                text: h.sentences.join(" "),
            });
        }
    }
    Ok(out)
}

/// Human rewrites of each pair, joined into single reference strings.
pub fn human_references(benchmark: &Benchmark) -> BTreeMap<String, Vec<String>> {
    let mut refs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (pair, rw) in benchmark.rewrites() {
        if rw.author == AuthorKind::Human {
            refs.entry(pair.pair_id.clone())
                .or_default()
                .push(rw.sentences.join(" "));
        }
    }
    refs
}

#[derive(Clone, Debug, Serialize)]
pub struct SentenceScore {
    pub pair_id: String,
    pub rewrite_id: String,
    pub author: String,
    pub bleu: f64,
    pub empty_hypothesis: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupBleu {
    pub author: String,
    pub n: usize,
    pub corpus: BleuReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct BleuEvaluation {
    pub tokenizer: String,
    pub sentence_smoothing: String,
    pub groups: Vec<GroupBleu>,
    pub sentences: Vec<SentenceScore>,
}

pub fn evaluate_bleu(hypotheses: &[Hypothesis], references: &BTreeMap<String, Vec<String>>) -> Result<BleuEvaluation> {
    let orphans: BTreeSet<&str> = hypotheses
        .iter()
        .filter(|h| !references.contains_key(&h.pair_id))
        .map(|h| h.pair_id.as_str())
        .collect();
    if !orphans.is_empty() {
        bail!(
            "hypotheses without references: {}",
            orphans.into_iter().collect::<Vec<_>>().join(", ")
        );
    }
    if hypotheses.is_empty() {
        bail!("no hypotheses to evaluate");
    }
    let mut by_author: BTreeMap<&str, Vec<&Hypothesis>> = BTreeMap::new();
    for h in hypotheses {
        by_author.entry(h.author.as_str()).or_default().push(h);
    }
    let mut groups = Vec::new();
    for (author, hyps) in &by_author {
        let texts: Vec<&str> = hyps.iter().map(|h| h.text.as_str()).collect();
        let refs: Vec<Vec<String>> = hyps.iter().map(|h| references[&h.pair_id].clone()).collect();
        groups.push(GroupBleu {
            author: author.to_string(),
            n: hyps.len(),
            corpus: bleu_corpus(&texts, &refs)?,
        });
    }
    let mut sentences = Vec::new();
    for h in hypotheses {
        let s = bleu_sentence(&h.text, &references[&h.pair_id])?;
        sentences.push(SentenceScore {
            pair_id: h.pair_id.clone(),
            rewrite_id: h.rewrite_id.clone(),
            author: h.author.clone(),
            bleu: s.score,
            empty_hypothesis: s.empty_hypothesis,
        });
    }
    Ok(BleuEvaluation {
        tokenizer: DefaultTokenizer.name().to_string(),
        sentence_smoothing: SENTENCE_SMOOTHING.to_string(),
        groups,
        sentences,
    })
}

pub fn render_bleu(eval: &BleuEvaluation) -> String {
    let header: Vec<String> = ["author", "n", "BLEU", "BP", "p1", "p2", "p3", "p4"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = eval
        .groups
        .iter()
        .map(|g| {
            let mut row = vec![
                g.author.clone(),
                g.n.to_string(),
                format!("{:.2}", g.corpus.score),
                format!("{:.3}", g.corpus.brevity_penalty),
            ];
            row.extend(g.corpus.precisions.iter().map(|p| format!("{p:.3}")));
            row
        })
        .collect();
    let empty = eval.sentences.iter().filter(|s| s.empty_hypothesis).count();
    let mut text = render_columns(&header, &body);
    text.push_str(&format!("tokenizer: {}\n", eval.tokenizer));
    if empty > 0 {
        text.push_str(&format!("empty hypotheses scored 0: {empty}\n"));
    }
    text
}

/// Where each rated rewrite lives.
pub struct RewriteInfo {
    pub benchmark: String,
    pub author: AuthorKind,
}

pub fn rewrite_index(benchmarks: &[Benchmark]) -> HashMap<String, RewriteInfo> {
    let mut index = HashMap::new();
    for b in benchmarks {
        for (_, rw) in b.rewrites() {
            index.insert(
                rw.rewrite_id.clone(),
                RewriteInfo {
                    benchmark: b.name.clone(),
                    author: rw.author.clone(),
                },
            );
        }
    }
    index
}

fn check_orphans<'a>(ids: impl Iterator<Item = &'a str>, known: impl Fn(&str) -> bool, what: &str) -> Result<()> {
    let orphans: BTreeSet<&str> = ids.filter(|id| !known(id)).collect();
    if !orphans.is_empty() {
        bail!("{what}: {}", orphans.into_iter().collect::<Vec<_>>().join(", "));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct RatingsGroup {
    pub benchmark: String,
    pub author: String,
    pub summary: CriteriaSummary,
    /// Corpus BLEU of this author's rewrites against the human rewrites of
    /// the same pairs, when the benchmark has any.
    pub bleu: Option<f64>,
}

pub fn evaluate_ratings(ratings: &[RatingRecord], benchmarks: &[Benchmark]) -> Result<Vec<RatingsGroup>> {
    let index = rewrite_index(benchmarks);
    check_orphans(
        ratings.iter().map(|r| r.rewrite_id.as_str()),
        |id| index.contains_key(id),
        "ratings reference rewrites missing from the benchmarks",
    )?;
    let mut groups = Vec::new();
    for b in benchmarks {
        let mut by_author: BTreeMap<AuthorKind, Vec<RatingRecord>> = BTreeMap::new();
        for r in ratings {
            let info = &index[&r.rewrite_id];
            if info.benchmark == b.name {
                by_author.entry(info.author.clone()).or_default().push(r.clone());
            }
        }
        let refs = human_references(b);
        for (author, records) in by_author {
            let bleu = match author {
                AuthorKind::Human => None,
                AuthorKind::Model(_) => {
                    let (hyps, rs): (Vec<String>, Vec<Vec<String>>) = b
                        .rewrites()
                        .filter(|(p, rw)| rw.author == author && refs.contains_key(&p.pair_id))
                        .map(|(p, rw)| (rw.sentences.join(" "), refs[&p.pair_id].clone()))
                        .unzip();
                    if hyps.is_empty() {
                        None
                    } else {
                        Some(bleu_corpus(&hyps, &rs)?.score)
                    }
                }
            };
            groups.push(RatingsGroup {
                benchmark: b.name.clone(),
                author: author.to_string(),
                summary: aggregate_ratings(&records)?,
                bleu,
            });
        }
    }
    Ok(groups)
}

pub fn render_ratings(groups: &[RatingsGroup]) -> String {
    let mut names: Vec<&str> = Vec::new();
    for g in groups {
        if !names.contains(&g.benchmark.as_str()) {
            names.push(&g.benchmark);
        }
    }
    let mut out = String::new();
    for name in names {
        let rows: Vec<SummaryRow> = groups
            .iter()
            .filter(|g| g.benchmark == name)
            .map(|g| SummaryRow {
                label: g.author.clone(),
                summary: g.summary.clone(),
                bleu: g.bleu,
            })
            .collect();
        out.push_str(&render_summary_table(name, &rows));
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    All,
    Benchmark,
    Model,
}

/// How correlation p-values are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Auto,
    Exact,
    TApprox,
}

impl From<PMethod> for PValueMethod {
    fn from(m: PMethod) -> Self {
        match m {
            PMethod::Auto => PValueMethod::Auto,
            PMethod::Exact => PValueMethod::Exact,
            PMethod::TApprox => PValueMethod::TApprox,
        }
    }
}

pub const CRITERIA: [&str; 7] = [
    "sensical",
    "grammatical",
    "no miss fact",
    "no new fact",
    "correct split",
    "enough split",
    "correct",
];

fn criterion_values(r: &RatingRecord) -> [f64; 7] {
    let favorable = |answer: bool| if answer { 0.0 } else { 1.0 };
    [
        f64::from(r.sensical),
        f64::from(r.grammatical),
        favorable(r.miss_fact),
        favorable(r.new_fact),
        favorable(r.wrong_split),
        favorable(r.need_more_split),
        if is_correct(r) { 1.0 } else { 0.0 },
    ]
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Cell {
    Ok(CorrelationResult),
    /// Fewer than three pairs.
    Insufficient {
        n: usize,
    },
    /// One side is constant.
    Undefined {
        n: usize,
    },
}

impl Cell {
    pub fn text(&self) -> String {
        match self {
            Cell::Ok(r) => format_cell(r),
            Cell::Insufficient { .. } => "insufficient".into(),
            Cell::Undefined { .. } => "n/a".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationRow {
    pub group: String,
    pub n: usize,
    pub cells: Vec<Cell>,
}

#[derive(Deserialize)]
struct BleuLine {
    rewrite_id: String,
    bleu: f64,
}

/// Per-rewrite sentence BLEU, from an `evaluate bleu` JSON report or from
/// JSONL lines with `rewrite_id` and `bleu`.
pub fn parse_sentence_bleu(text: &str) -> Result<HashMap<String, f64>> {
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(text) {
        if let Some(sentences) = value.get("sentences") {
            let lines: Vec<BleuLine> = serde_json::from_value(sentences.clone()).context("bleu report sentences")?;
            return Ok(lines.into_iter().map(|l| (l.rewrite_id, l.bleu)).collect());
        }
    }
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: BleuLine = serde_json::from_str(line).with_context(|| format!("bleu line {}", i + 1))?;
        out.insert(l.rewrite_id, l.bleu);
    }
    Ok(out)
}

/// Spearman of sentence BLEU against each criterion, one row per group.
/// Each rating contributes one (BLEU, answer) pair.
pub fn correlate(
    ratings: &[RatingRecord],
    bleu: &HashMap<String, f64>,
    benchmarks: &[Benchmark],
    group_by: GroupBy,
    method: PValueMethod,
) -> Result<Vec<CorrelationRow>> {
    check_orphans(
        ratings.iter().map(|r| r.rewrite_id.as_str()),
        |id| bleu.contains_key(id),
        "rated rewrites without sentence BLEU",
    )?;
    let index = rewrite_index(benchmarks);
    if group_by != GroupBy::All {
        check_orphans(
            ratings.iter().map(|r| r.rewrite_id.as_str()),
            |id| index.contains_key(id),
            "rated rewrites missing from the benchmarks",
        )?;
    }
    let mut groups: BTreeMap<String, Vec<&RatingRecord>> = BTreeMap::new();
    for r in ratings {
        let key = match group_by {
            GroupBy::All => "all".to_string(),
            GroupBy::Benchmark => index[&r.rewrite_id].benchmark.clone(),
            GroupBy::Model => index[&r.rewrite_id].author.to_string(),
        };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(group, records)| {
            let x: Vec<f64> = records.iter().map(|r| bleu[&r.rewrite_id]).collect();
            let values: Vec<[f64; 7]> = records.iter().map(|r| criterion_values(r)).collect();
            let cells = (0..CRITERIA.len())
                .map(|c| {
                    let y: Vec<f64> = values.iter().map(|v| v[c]).collect();
                    let n = y.len();
                    if n < 3 {
                        return Ok(Cell::Insufficient { n });
                    }
                    match spearman_with(&x, &y, method) {
                        Ok(r) => Ok(Cell::Ok(r)),
                        Err(e @ CorrelationError::TooLargeForExact(_)) => Err(anyhow::anyhow!("group {group}: {e}")),
                        Err(_) => Ok(Cell::Undefined { n }),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CorrelationRow {
                group,
                n: records.len(),
                cells,
            })
        })
        .collect()
}

pub fn render_correlation(rows: &[CorrelationRow]) -> String {
    let mut header = vec!["group".to_string(), "n".to_string()];
    header.extend(CRITERIA.iter().map(|c| c.to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![r.group.clone(), r.n.to_string()];
            line.extend(r.cells.iter().map(Cell::text));
            line
        })
        .collect();
    let mut text = render_columns(&header, &body);
    text.push_str("\u{2020}: not significant at alpha = 0.05\n");
    text
}
