use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use splitbench::annotation::{load_annotations, AnnotatedSentence};
use splitbench::datasets::{parse_canonical, parse_tsv, AuthorKind, Benchmark, BenchmarkFormat, TsvOptions};
use splitbench::manifest::RunManifest;

/// An input path that does not exist. Mapped to exit code 2.
#[derive(Debug)]
pub struct MissingInput(pub PathBuf);

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input file not found: {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

/// Reads an input file and records its digest in the manifest.
pub fn read_input(path: &Path, role: &str, manifest: &mut RunManifest) -> Result<String> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(MissingInput(path.to_path_buf()).into()),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    manifest.add_bytes(role, path, &bytes);
    String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
}

pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}

pub fn read_benchmark(
    path: &Path,
    format: BenchmarkFormat,
    separator: &str,
    manifest: &mut RunManifest,
) -> Result<Benchmark> {
    let text = read_input(path, "benchmark", manifest)?;
    let name = stem(path);
    let mut benchmark = match format {
        BenchmarkFormat::CanonicalJsonl => parse_canonical(&text, &name),
        BenchmarkFormat::TsvPairs => {
            let options = TsvOptions {
                separator: separator.to_string(),
                author: AuthorKind::Human,
            };
            parse_tsv(&text, &name, &options)
        }
    }
    .with_context(|| format!("loading benchmark {}", path.display()))?;
    benchmark.provenance = format!("loaded from {}", path.display());
    Ok(benchmark)
}

/// `x.conllu` pairs with `x.srl.jsonl` when the latter exists.
pub fn sibling_srl(conllu: &Path) -> Option<PathBuf> {
    let name = conllu.file_name()?.to_string_lossy();
    let base = name.strip_suffix(".conllu").unwrap_or(&name);
    let candidate = conllu.with_file_name(format!("{base}.srl.jsonl"));
    candidate.exists().then_some(candidate)
}

pub fn read_annotations(
    conllu: &Path,
    srl: Option<&Path>,
    manifest: &mut RunManifest,
) -> Result<Vec<AnnotatedSentence>> {
    let tree_text = read_input(conllu, "annotations", manifest)?;
    let srl_path = srl.map(Path::to_path_buf).or_else(|| sibling_srl(conllu));
    let srl_text = match &srl_path {
        Some(p) => Some(read_input(p, "srl", manifest)?),
        None => None,
    };
    load_annotations(&tree_text, srl_text.as_deref()).with_context(|| format!("loading {}", conllu.display()))
}

/// Explicit `--manifest`, else next to `--out`, else in the working directory.
pub fn manifest_path(explicit: Option<&Path>, out: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match out {
        Some(out) => {
            let name = out
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.with_file_name(format!("{name}.manifest.json"))
        }
        None => PathBuf::from(format!("splitbench-{command}.manifest.json")),
    }
}
