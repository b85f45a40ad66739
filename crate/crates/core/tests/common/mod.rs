//! Helpers shared by the acceptance and property targets: a random
//! annotation generator and brute-force oracles that do not reuse library
//! code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use splitbench::annotation::{load_annotations, AnnotatedSentence, SrlArgument, SrlFrame, Token};
use splitbench::rules::{realize, split_and_rephrase, split_drafts, wh_handling, ClauseDraft, EngineConfig, COPULAS};

pub fn fixtures(name: &str) -> BTreeMap<String, AnnotatedSentence> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/");
    let conllu = std::fs::read_to_string(format!("{dir}{name}.conllu")).unwrap();
    let srl = std::fs::read_to_string(format!("{dir}{name}.srl.jsonl")).unwrap();
    load_annotations(&conllu, Some(&srl))
        .unwrap()
        .into_iter()
        .map(|s| (s.sentence_id().to_string(), s))
        .collect()
}

// ---------------------------------------------------------------------------
// Random annotation graphs

const DEPRELS: [&str; 22] = [
    "nsubj",
    "nsubj:pass",
    "obj",
    "nmod",
    "obl",
    "appos",
    "conj",
    "flat",
    "compound",
    "acl",
    "acl:relcl",
    "advcl",
    "xcomp",
    "amod",
    "det",
    "case",
    "cc",
    "aux",
    "aux:pass",
    "cop",
    "mark",
    "punct",
];

fn pos_for(deprel: &str, rng: &mut StdRng) -> &'static str {
    let pick = |rng: &mut StdRng, options: &[&'static str]| *options.choose(rng).unwrap();
    match deprel {
        "root" | "acl" | "acl:relcl" | "advcl" | "xcomp" => "VERB",
        "amod" => "ADJ",
        "det" => "DET",
        "case" => "ADP",
        "cc" => "CCONJ",
        "aux" | "aux:pass" | "cop" => "AUX",
        "mark" => pick(rng, &["SCONJ", "PART"]),
        "punct" => "PUNCT",
        "conj" => pick(rng, &["NOUN", "PROPN", "VERB"]),
        _ => pick(rng, &["NOUN", "PROPN", "PRON"]),
    }
}

fn surface_for(pos: &str, rng: &mut StdRng) -> &'static str {
    let options: &[&'static str] = match pos {
        "NOUN" => &["city", "runway", "pilot", "series", "audience", "soup"],
        "PROPN" => &["Alan", "Bean", "Texas", "Kaguya", "Aarhus", "Spain"],
        "PRON" => &["which", "who", "it", "that"],
        "VERB" => &["serving", "made", "voiced", "born", "runs", "found", "located"],
        "ADJ" => &["tall", "popular", "long", "cold"],
        "DET" => &["the", "a", "its"],
        "ADP" => &["in", "by", "of", "from", "among"],
        "CCONJ" => &["and", "or", "and"],
        "AUX" => &["is", "was", "were", "has"],
        "SCONJ" => &["because", "while"],
        "PART" => &["to"],
        _ => &[",", ";"],
    };
    options.choose(rng).unwrap()
}

/// A random but valid sentence: a random tree over 3-15 tokens ending in a
/// period, with up to two SRL frames of disjoint spans.
pub fn random_sentence(rng: &mut StdRng, id: &str) -> AnnotatedSentence {
    let content = rng.gen_range(2..=14);
    let mut order: Vec<usize> = (1..=content).collect();
    order.shuffle(rng);
    let mut heads = vec![0usize; content + 1];
    let mut deprels = vec![String::new(); content + 1];
    deprels[order[0]] = "root".into();
    for (k, &node) in order.iter().enumerate().skip(1) {
        heads[node] = order[rng.gen_range(0..k)];
        deprels[node] = DEPRELS.choose(rng).unwrap().to_string();
    }
    let root = order[0];
    let mut tokens = Vec::new();
    for i in 1..=content {
        let pos = pos_for(&deprels[i], rng);
        tokens.push(Token::new(i, surface_for(pos, rng), heads[i], &deprels[i], pos));
    }
    tokens.push(Token::new(content + 1, ".", root, "punct", "PUNCT"));
    let n = content + 1;

    let verbs: Vec<usize> = tokens.iter().filter(|t| t.pos == "VERB").map(|t| t.index).collect();
    let mut frames = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let Some(&p) = verbs.choose(rng) else { break };
        let mut arguments = vec![SrlArgument::new("V", p, p)];
        let mut i = 1;
        while i <= n {
            if i != p && rng.gen_bool(0.3) {
                let mut end = i;
                let len = rng.gen_range(1..=3);
                while end + 1 <= n && end + 1 != p && end + 1 < i + len {
                    end += 1;
                }
                let label = *["ARG0", "ARG1", "ARG2", "R-ARG1", "ARGM-TMP"].choose(rng).unwrap();
                arguments.push(SrlArgument::new(label, i, end));
                i = end + 1;
            } else {
                i += 1;
            }
        }
        frames.push(SrlFrame {
            predicate_index: p,
            arguments,
        });
    }
    AnnotatedSentence::new(id, tokens, frames).expect("generator builds valid sentences")
}

// ---------------------------------------------------------------------------
// Rule engine invariants

fn is_coordinator(word: &str) -> bool {
    matches!(word.to_lowercase().as_str(), "and" | "or" | "but" | "nor")
}

fn normalize(word: &str) -> String {
    word.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn normalized_words<S: AsRef<str>>(words: &[S]) -> Vec<String> {
    let mut out: Vec<String> = words
        .iter()
        .map(|w| normalize(w.as_ref()))
        .filter(|w| !w.is_empty())
        .collect();
    out.sort();
    out
}

/// Removes `sub` from `all` as multisets; None if `sub` is not contained.
fn multiset_minus(all: &[String], sub: &[String]) -> Option<Vec<String>> {
    let mut rest = all.to_vec();
    for w in sub {
        let pos = rest.iter().position(|r| r == w)?;
        rest.remove(pos);
    }
    Some(rest)
}

/// Token conservation, trace bound, identity fallback, determinism and the
/// wh-coverage property for one sentence.
pub fn check_engine_invariants(s: &AnnotatedSentence, config: &EngineConfig) -> Result<(), String> {
    let id = s.sentence_id();
    let (drafts, trace) = split_drafts(s, config);
    let result = split_and_rephrase(s, config).map_err(|e| format!("{id}: {e}"))?;
    let again = split_and_rephrase(s, config).map_err(|e| format!("{id}: {e}"))?;
    if serde_json::to_string(&result).unwrap() != serde_json::to_string(&again).unwrap() {
        return Err(format!("{id}: two runs differ"));
    }
    if trace.len() > 3 {
        return Err(format!("{id}: trace length {}", trace.len()));
    }
    let mut handlers: Vec<_> = trace.iter().map(|t| t.handler.name()).collect();
    handlers.dedup();
    if handlers.len() != trace.len() {
        return Err(format!("{id}: a handler fired twice"));
    }
    if !result.changed {
        let whole = realize(&ClauseDraft::whole(s), s).map_err(|e| e.to_string())?;
        if result.sentences != [whole] || !trace.is_empty() {
            return Err(format!("{id}: unchanged output is not the realized input"));
        }
    }

    // Source indices: each used at most once; the unused are function words.
    let relational: Vec<usize> = s
        .frames()
        .iter()
        .flat_map(|f| {
            f.arguments
                .iter()
                .filter(|a| a.is_relational())
                .flat_map(|a| a.indices())
        })
        .collect();
    let mut seen = vec![false; s.len() + 1];
    for d in &drafts {
        for &i in &d.token_indices {
            if i == 0 || i > s.len() || seen[i] {
                return Err(format!("{id}: index {i} repeated or out of range"));
            }
            seen[i] = true;
        }
    }
    for i in 1..=s.len() {
        let t = s.token(i);
        if !seen[i] && !t.is_punct() && !is_coordinator(&t.surface) && !relational.contains(&i) {
            return Err(format!("{id}: token {i} {:?} dropped", t.surface));
        }
    }

    // Prefix words are copies of source words plus at most one copula.
    let source: Vec<String> = s.tokens().iter().map(|t| t.surface.clone()).collect();
    for d in &drafts {
        let mut extra: Vec<&String> = Vec::new();
        let mut pool = source.clone();
        for w in &d.prefix_tokens {
            match pool.iter().position(|p| p == w) {
                Some(pos) => {
                    pool.remove(pos);
                }
                None => extra.push(w),
            }
        }
        if extra.len() > 1 || extra.iter().any(|w| !COPULAS.contains(&w.as_str())) {
            return Err(format!("{id}: unexplained prefix words {extra:?}"));
        }
    }

    // Realized words are the draft words minus dropped coordinators.
    if drafts.len() != result.sentences.len() {
        return Err(format!(
            "{id}: {} drafts but {} sentences",
            drafts.len(),
            result.sentences.len()
        ));
    }
    for (d, sentence) in drafts.iter().zip(&result.sentences) {
        let mut words = d.prefix_tokens.clone();
        words.extend(s.surfaces(&d.token_indices));
        let expected = normalized_words(&words);
        let output: Vec<&str> = sentence.split_whitespace().collect();
        let got = normalized_words(&output);
        let Some(rest) = multiset_minus(&expected, &got) else {
            return Err(format!("{id}: {sentence:?} has words not in its draft {words:?}"));
        };
        if rest.iter().any(|w| !is_coordinator(w)) {
            return Err(format!("{id}: {sentence:?} lost words {rest:?}"));
        }
    }

    if let Some((a, b)) = wh_handling(s) {
        let mut covered: Vec<usize> = a.token_indices.iter().chain(&b.token_indices).copied().collect();
        covered.sort_unstable();
        let before = covered.len();
        covered.dedup();
        if covered.len() != before {
            return Err(format!("{id}: wh drafts overlap"));
        }
        let missing: Vec<usize> = (1..=s.len()).filter(|i| !covered.contains(i)).collect();
        let matches_span = s
            .frames()
            .iter()
            .flat_map(|f| &f.arguments)
            .any(|arg| arg.is_relational() && arg.indices().collect::<Vec<_>>() == missing);
        if !matches_span {
            return Err(format!("{id}: wh drafts miss {missing:?}, not an R-ARG span"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// BLEU oracle: plain loops over pre-tokenized, space-separated text.

fn grams(tokens: &[&str], n: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    if tokens.len() >= n {
        for start in 0..=tokens.len() - n {
            out.push(tokens[start..start + n].iter().map(|s| s.to_string()).collect());
        }
    }
    out
}

fn count_of(list: &[Vec<String>], gram: &[String]) -> u64 {
    list.iter().filter(|g| g.as_slice() == gram).count() as u64
}

/// Clipped matches, totals, hypothesis length and closest reference length.
fn oracle_segment(hyp: &str, refs: &[String]) -> ([u64; 4], [u64; 4], usize, usize) {
    let h: Vec<&str> = hyp.split_whitespace().collect();
    let rs: Vec<Vec<&str>> = refs.iter().map(|r| r.split_whitespace().collect()).collect();
    let mut matches = [0; 4];
    let mut totals = [0; 4];
    for n in 1..=4 {
        let hg = grams(&h, n);
        let rg: Vec<Vec<Vec<String>>> = rs.iter().map(|r| grams(r, n)).collect();
        let mut distinct: Vec<Vec<String>> = Vec::new();
        for g in &hg {
            if !distinct.contains(g) {
                distinct.push(g.clone());
            }
        }
        for g in &distinct {
            let in_hyp = count_of(&hg, g);
            let in_ref = rg.iter().map(|r| count_of(r, g)).max().unwrap_or(0);
            matches[n - 1] += in_hyp.min(in_ref);
        }
        totals[n - 1] = hg.len() as u64;
    }
    let mut best: Option<usize> = None;
    for r in &rs {
        let len = r.len();
        best = Some(match best {
            None => len,
            Some(b) => {
                let (db, dl) = (b.abs_diff(h.len()), len.abs_diff(h.len()));
                if dl < db || (dl == db && len < b) {
                    len
                } else {
                    b
                }
            }
        });
    }
    (matches, totals, h.len(), best.unwrap_or(0))
}

fn oracle_combine(p: [f64; 4], c: usize, r: usize) -> f64 {
    if c == 0 || p.iter().any(|&x| x == 0.0) {
        return 0.0;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * ((p[0].ln() + p[1].ln() + p[2].ln() + p[3].ln()) / 4.0).exp()
}

pub fn oracle_corpus_bleu(hyps: &[String], refs: &[Vec<String>]) -> f64 {
    let mut m = [0u64; 4];
    let mut t = [0u64; 4];
    let (mut c, mut r) = (0, 0);
    for (h, rs) in hyps.iter().zip(refs) {
        let (sm, st, sc, sr) = oracle_segment(h, rs);
        for n in 0..4 {
            m[n] += sm[n];
            t[n] += st[n];
        }
        c += sc;
        r += sr;
    }
    let mut p = [0.0; 4];
    for n in 0..4 {
        p[n] = if t[n] == 0 { 0.0 } else { m[n] as f64 / t[n] as f64 };
    }
    oracle_combine(p, c, r)
}

pub fn oracle_sentence_bleu(hyp: &str, refs: &[String]) -> f64 {
    let (m, t, c, r) = oracle_segment(hyp, refs);
    if c == 0 {
        return 0.0;
    }
    let mut p = [m[0] as f64 / t[0] as f64, 0.0, 0.0, 0.0];
    for n in 1..4 {
        p[n] = (m[n] as f64 + 1.0) / (t[n] as f64 + 1.0);
    }
    oracle_combine(p, c, r)
}

pub fn random_corpus(rng: &mut StdRng) -> (Vec<String>, Vec<Vec<String>>) {
    let vocab = ["the", "cat", "sat", "on", "mat", "a", "dog", "ran", "."];
    let sentence = |rng: &mut StdRng, min: usize| {
        let len = rng.gen_range(min..=12);
        (0..len)
            .map(|_| *vocab.choose(rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let segments = rng.gen_range(1..=5);
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..segments {
        hyps.push(sentence(rng, 1));
        let k = rng.gen_range(1..=3);
        refs.push((0..k).map(|_| sentence(rng, 1)).collect());
    }
    (hyps, refs)
}

// ---------------------------------------------------------------------------
// Spearman oracle: recursive enumeration of all orderings.

fn oracle_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn oracle_rho(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (oracle_ranks(x), oracle_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx).powi(2);
        syy += (ry[i] - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

fn permutations(items: &[f64]) -> Vec<Vec<f64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Two-sided exact p-value: share of y orderings with |rho| at least the
/// observed one.
pub fn oracle_permutation_p(x: &[f64], y: &[f64]) -> f64 {
    let observed = oracle_rho(x, y).abs();
    let all = permutations(y);
    let hits = all
        .iter()
        .filter(|p| oracle_rho(x, p).abs() >= observed - 1e-12)
        .count();
    hits as f64 / all.len() as f64
}
