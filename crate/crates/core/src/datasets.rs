//! Benchmark corpora: canonical JSONL and TSV loading, descriptive
//! statistics, and gold construction from crowd ratings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::metrics::bleu::split_terminal_punct;
use crate::metrics::ratings::{is_perfect, RatingRecord};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("benchmark is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("pair {pair_id}: {message}")]
    Invalid { pair_id: String, message: String },
    #[error("ratings reference unknown rewrites: {}", .0.join(", "))]
    UnknownRewrites(Vec<String>),
}

/// Who wrote a rewrite. Serialized as `human` or `model:<name>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AuthorKind {
    Human,
    Model(String),
}

impl fmt::Display for AuthorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuthorKind::Human => f.write_str("human"),
            AuthorKind::Model(name) => write!(f, "model:{name}"),
        }
    }
}

impl FromStr for AuthorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "human" => Ok(AuthorKind::Human),
            _ => match s.strip_prefix("model:") {
                Some(name) if !name.is_empty() => Ok(AuthorKind::Model(name.to_string())),
                _ => Err(format!("author must be \"human\" or \"model:<name>\", got {s:?}")),
            },
        }
    }
}

impl Serialize for AuthorKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AuthorKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rewrite {
    pub rewrite_id: String,
    pub author: AuthorKind,
    pub sentences: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexSimplePair {
    pub pair_id: String,
    pub complex: String,
    pub rewrites: Vec<Rewrite>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Benchmark {
    pub name: String,
    pub pairs: Vec<ComplexSimplePair>,
    pub provenance: String,
}

impl Benchmark {
    /// Checks id uniqueness, non-empty complex text and non-empty rewrites.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut pair_ids = BTreeSet::new();
        let mut rewrite_ids = BTreeSet::new();
        for pair in &self.pairs {
            if !pair_ids.insert(pair.pair_id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    kind: "pair",
                    id: pair.pair_id.clone(),
                });
            }
            if pair.complex.trim().is_empty() {
                return Err(DatasetError::Invalid {
                    pair_id: pair.pair_id.clone(),
                    message: "empty complex sentence".into(),
                });
            }
            for rw in &pair.rewrites {
                if !rewrite_ids.insert(rw.rewrite_id.as_str()) {
                    return Err(DatasetError::DuplicateId {
                        kind: "rewrite",
                        id: rw.rewrite_id.clone(),
                    });
                }
                if rw.sentences.is_empty() {
                    return Err(DatasetError::Invalid {
                        pair_id: pair.pair_id.clone(),
                        message: format!("rewrite {} has no sentences", rw.rewrite_id),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn rewrite_count(&self) -> usize {
        self.pairs.iter().map(|p| p.rewrites.len()).sum()
    }

    /// (pair, rewrite) for every rewrite, in file order.
    pub fn rewrites(&self) -> impl Iterator<Item = (&ComplexSimplePair, &Rewrite)> {
        self.pairs.iter().flat_map(|p| p.rewrites.iter().map(move |r| (p, r)))
    }

    pub fn rewrite_index(&self) -> HashMap<&str, (&ComplexSimplePair, &Rewrite)> {
        self.rewrites().map(|(p, r)| (r.rewrite_id.as_str(), (p, r))).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkFormat {
    #[default]
    CanonicalJsonl,
    TsvPairs,
}

impl FromStr for BenchmarkFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical_jsonl" | "jsonl" => Ok(BenchmarkFormat::CanonicalJsonl),
            "tsv_pairs" | "tsv" => Ok(BenchmarkFormat::TsvPairs),
            _ => Err(format!("unknown benchmark format {s:?}")),
        }
    }
}

/// Settings for the `complex \t rewrite` adapter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TsvOptions {
    /// Sentence separator inside the rewrite field.
    pub separator: String,
    pub author: AuthorKind,
}

impl Default for TsvOptions {
    fn default() -> Self {
        TsvOptions {
            separator: "<::::>".into(),
            author: AuthorKind::Human,
        }
    }
}

pub fn parse_canonical(text: &str, name: &str) -> Result<Benchmark, DatasetError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: ComplexSimplePair = serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Err(DatasetError::Empty);
    }
    let benchmark = Benchmark {
        name: name.to_string(),
        pairs,
        provenance: String::new(),
    };
    benchmark.validate()?;
    Ok(benchmark)
}

/// Rows of `complex \t rewrite`. Rows repeating a complex sentence add a
/// rewrite to the existing pair. Ids are `p<row-order>` and `<pair>-r<k>`.
pub fn parse_tsv(text: &str, name: &str, options: &TsvOptions) -> Result<Benchmark, DatasetError> {
    if options.separator.is_empty() {
        return Err(DatasetError::Malformed {
            line: 0,
            message: "empty sentence separator".into(),
        });
    }
    let mut pairs: Vec<ComplexSimplePair> = Vec::new();
    let mut by_complex: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: &str| DatasetError::Malformed {
            line: i + 1,
            message: message.into(),
        };
        let mut fields = line.split('\t');
        let (Some(complex), Some(rewrite), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(malformed("expected exactly two tab-separated fields"));
        };
        let complex = complex.trim();
        if complex.is_empty() {
            return Err(malformed("empty complex sentence"));
        }
        let sentences: Vec<String> = rewrite
            .split(options.separator.as_str())
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        if sentences.is_empty() {
            return Err(malformed("empty rewrite"));
        }
        let slot = *by_complex.entry(complex.to_string()).or_insert_with(|| {
            pairs.push(ComplexSimplePair {
                pair_id: format!("p{}", pairs.len() + 1),
                complex: complex.to_string(),
                rewrites: Vec::new(),
            });
            pairs.len() - 1
        });
        let pair = &mut pairs[slot];
        pair.rewrites.push(Rewrite {
            rewrite_id: format!("{}-r{}", pair.pair_id, pair.rewrites.len() + 1),
            author: options.author.clone(),
            sentences,
        });
    }
    if pairs.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(Benchmark {
        name: name.to_string(),
        pairs,
        provenance: format!("tsv separator {:?}", options.separator),
    })
}

pub fn load_benchmark(path: &Path, format: BenchmarkFormat, options: &TsvOptions) -> Result<Benchmark, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut benchmark = match format {
        BenchmarkFormat::CanonicalJsonl => parse_canonical(&text, &name)?,
        BenchmarkFormat::TsvPairs => parse_tsv(&text, &name, options)?,
    };
    let note = format!("loaded from {}", path.display());
    benchmark.provenance = if benchmark.provenance.is_empty() {
        note
    } else {
        format!("{note}; {}", benchmark.provenance)
    };
    Ok(benchmark)
}

/// Canonical JSONL, one pair per line. An empty benchmark yields "".
pub fn write_canonical(benchmark: &Benchmark) -> String {
    let mut out = String::new();
    for pair in &benchmark.pairs {
        out.push_str(&serde_json::to_string(pair).expect("pair serializes"));
        out.push('\n');
    }
    out
}

pub fn save_benchmark(benchmark: &Benchmark, path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, write_canonical(benchmark)).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_complex: usize,
    pub n_simple: usize,
    pub toks_per_complex: f64,
    pub sents_per_simple: f64,
}

/// Whitespace tokens after detaching terminal punctuation.
pub fn count_tokens(text: &str) -> usize {
    split_terminal_punct(text).len()
}

pub fn descriptive_stats(benchmark: &Benchmark) -> DatasetStats {
    let n_complex = benchmark.pairs.len();
    let n_simple = benchmark.rewrite_count();
    let mean = |total: usize, n: usize| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    let tokens: usize = benchmark.pairs.iter().map(|p| count_tokens(&p.complex)).sum();
    let sentences: usize = benchmark.rewrites().map(|(_, r)| r.sentences.len()).sum();
    DatasetStats {
        n_complex,
        n_simple,
        toks_per_complex: mean(tokens, n_complex),
        sents_per_simple: mean(sentences, n_simple),
    }
}

/// Keeps only rewrites whose ratings are all correct; pairs left without
/// rewrites are dropped. Unrated rewrites are not perfect.
pub fn build_gold(benchmark: &Benchmark, ratings: &[RatingRecord]) -> Result<Benchmark, DatasetError> {
    let known: BTreeSet<&str> = benchmark.rewrites().map(|(_, r)| r.rewrite_id.as_str()).collect();
    let mut by_rewrite: BTreeMap<&str, Vec<&RatingRecord>> = BTreeMap::new();
    let mut unknown = BTreeSet::new();
    for r in ratings {
        if known.contains(r.rewrite_id.as_str()) {
            by_rewrite.entry(r.rewrite_id.as_str()).or_default().push(r);
        } else {
            unknown.insert(r.rewrite_id.clone());
        }
    }
    if !unknown.is_empty() {
        return Err(DatasetError::UnknownRewrites(unknown.into_iter().collect()));
    }
    let pairs = benchmark
        .pairs
        .iter()
        .filter_map(|pair| {
            let rewrites: Vec<Rewrite> = pair
                .rewrites
                .iter()
                .filter(|rw| {
                    by_rewrite
                        .get(rw.rewrite_id.as_str())
                        .is_some_and(|rs| is_perfect(rs.iter().copied()))
                })
                .cloned()
                .collect();
            (!rewrites.is_empty()).then(|| ComplexSimplePair {
                rewrites,
                ..pair.clone()
            })
        })
        .collect();
    Ok(Benchmark {
        name: benchmark.name.clone(),
        pairs,
        provenance: format!("gold of {}", benchmark.name),
    })
}

/// True when the text has only alphanumerics, whitespace, commas and periods.
pub fn passes_character_filter(text: &str) -> bool {
    text.chars()
        .all(|c| c.is_alphanumeric() || c.is_whitespace() || c == ',' || c == '.')
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = concat!(
        r#"{"pair_id":"a","complex":"A b c .","rewrites":[{"rewrite_id":"a1","author":"human","sentences":["A b.","A c."]}]}"#,
        "\n",
        r#"{"pair_id":"b","complex":"D e , f g .","rewrites":[{"rewrite_id":"b1","author":"model:rules","sentences":["D e."]}]}"#,
        "\n"
    );

    fn good(id: &str) -> RatingRecord {
        RatingRecord {
            rewrite_id: id.into(),
            rater_id: "w".into(),
            sensical: 5,
            grammatical: 5,
            miss_fact: false,
            new_fact: false,
            wrong_split: false,
            need_more_split: false,
        }
    }

    #[test]
    fn canonical_round_trip() {
        let b = parse_canonical(CANONICAL, "t").unwrap();
        assert_eq!(b.pairs.len(), 2);
        assert_eq!(b.pairs[1].rewrites[0].author, AuthorKind::Model("rules".into()));
        assert_eq!(write_canonical(&b), CANONICAL);
    }

    #[test]
    fn canonical_errors() {
        assert!(matches!(parse_canonical("", "t"), Err(DatasetError::Empty)));
        let dup = format!("{}{}", CANONICAL.lines().next().unwrap(), "\n").repeat(2);
        assert!(matches!(
            parse_canonical(&dup, "t"),
            Err(DatasetError::DuplicateId { kind: "pair", .. })
        ));
        let bad_author = CANONICAL.replace("model:rules", "robot");
        assert!(matches!(
            parse_canonical(&bad_author, "t"),
            Err(DatasetError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn tsv_splits_and_merges() {
        let text = "X y z .\tX y. <::::> X z. <::::> Y z.\nX y z .\tX y z.\nQ r .\tQ. <::::> R.\n";
        let b = parse_tsv(text, "t", &TsvOptions::default()).unwrap();
        assert_eq!(b.pairs.len(), 2);
        assert_eq!(b.pairs[0].rewrites.len(), 2);
        assert_eq!(b.pairs[0].rewrites[0].sentences, ["X y.", "X z.", "Y z."]);
        assert_eq!(b.pairs[0].rewrites[1].rewrite_id, "p1-r2");
        assert_eq!(b.pairs[1].pair_id, "p2");
        b.validate().unwrap();
    }

    #[test]
    fn tsv_errors_carry_line_numbers() {
        let err = parse_tsv("a\tb\nno tab here\n", "t", &TsvOptions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 2, .. }), "{err}");
        let err = parse_tsv("a\t <::::> \n", "t", &TsvOptions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 1, .. }));
        assert!(matches!(
            parse_tsv("\n\n", "t", &TsvOptions::default()),
            Err(DatasetError::Empty)
        ));
    }

    #[test]
    fn stats_by_hand() {
        let b = parse_canonical(CANONICAL.lines().next().unwrap(), "t").unwrap();
        let s = descriptive_stats(&b);
        assert_eq!((s.n_complex, s.n_simple), (1, 1));
        assert_eq!((s.toks_per_complex, s.sents_per_simple), (4.0, 2.0));
    }

    #[test]
    fn gold_keeps_perfect_rewrites_only() {
        let b = parse_canonical(CANONICAL, "t").unwrap();
        let mut weak = good("b1");
        weak.sensical = 4;
        let gold = build_gold(&b, &[good("a1"), good("a1"), weak]).unwrap();
        assert_eq!(gold.pairs.len(), 1);
        assert_eq!(gold.pairs[0].pair_id, "a");
        assert_eq!(build_gold(&gold, &[good("a1")]).unwrap().pairs, gold.pairs);
        let err = build_gold(&b, &[good("zz")]).unwrap_err();
        assert_eq!(err.to_string(), "ratings reference unknown rewrites: zz");
        assert!(build_gold(&b, &[]).unwrap().pairs.is_empty());
    }

    #[test]
    fn character_filter() {
        assert!(passes_character_filter("Alan Bean, born 1932, was a pilot."));
        assert!(!passes_character_filter("Alan (Bean) was a pilot."));
        assert!(!passes_character_filter("It's"));
    }
}
