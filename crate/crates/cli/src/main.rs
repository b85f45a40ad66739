mod io;
mod reports;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use splitbench::datasets::{build_gold, descriptive_stats, write_canonical, Benchmark, BenchmarkFormat};
use splitbench::manifest::RunManifest;
use splitbench::metrics::ratings::{parse_ratings, render_columns};
use splitbench::metrics::reliability::{bucket_and_fit, density_csv, parse_expert, LOWER_LEVEL, UPPER_LEVEL};
use splitbench::patterns::{detect_patterns, pattern_report, pattern_report_for};
use splitbench::rules::{split_and_rephrase, EngineConfig};
use splitbench::service::{ServiceConfig, TaskService};

use crate::io::{manifest_path, read_annotations, read_benchmark, read_input, stem, write_output, MissingInput};
use crate::reports::{GroupBy, PMethod};

#[derive(Parser)]
#[command(
    name = "splitbench",
    version,
    about = "Rule-based sentence splitting and its evaluation tooling"
)]
struct Cli {
    /// Where to write the run manifest. Defaults to `<out>.manifest.json`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split annotated sentences into rewrites (JSONL, one line per sentence).
    Split(SplitArgs),
    /// Score hypotheses with BLEU or summarize crowd ratings.
    Evaluate(EvaluateArgs),
    /// Fit Beta posteriors per crowd-agreement bucket.
    Reliability(ReliabilityArgs),
    /// Spearman correlation between sentence BLEU and each rating criterion.
    Correlate(CorrelateArgs),
    /// Corpus statistics per benchmark.
    Stats(StatsArgs),
    /// Heuristic split-pattern counts.
    Patterns(PatternsArgs),
    /// Keep only rewrites whose every rating is correct.
    BuildGold(BuildGoldArgs),
    /// Run the rewrite/rating task server.
    Serve(ServeArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Smallest modifier (in non-punctuation tokens) insertion handling extracts.
    #[arg(long, default_value_t = 3)]
    min_span: usize,
    /// Do not insert a copula into extracted modifiers.
    #[arg(long)]
    no_copula: bool,
    /// Extract only the leftmost qualifying modifier.
    #[arg(long)]
    leftmost_only: bool,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig {
            minimum_span: self.min_span,
            copula_insertion: !self.no_copula,
            exhaustive_insertion: !self.leftmost_only,
            ..EngineConfig::default()
        }
    }
}

#[derive(Args)]
struct BenchmarkFormatArgs {
    #[arg(long, value_enum, default_value_t = InputFormat::CanonicalJsonl)]
    format: InputFormat,
    /// Sentence separator inside the rewrite field of tsv_pairs input.
    #[arg(long, default_value = "<::::>")]
    separator: String,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum InputFormat {
    CanonicalJsonl,
    TsvPairs,
}

impl From<InputFormat> for BenchmarkFormat {
    fn from(f: InputFormat) -> Self {
        match f {
            InputFormat::CanonicalJsonl => BenchmarkFormat::CanonicalJsonl,
            InputFormat::TsvPairs => BenchmarkFormat::TsvPairs,
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    /// CoNLL-U file; `<name>.srl.jsonl` next to it is picked up automatically.
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    srl: Option<PathBuf>,
    /// Output JSONL; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum EvalMode {
    Bleu,
    Ratings,
}

#[derive(Args)]
struct EvaluateArgs {
    mode: EvalMode,
    /// Hypotheses (bleu mode): canonical benchmark or split output JSONL.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Benchmark(s) holding references (bleu) or the rated rewrites (ratings).
    #[arg(long, required = true)]
    refs: Vec<PathBuf>,
    /// Ratings JSONL (ratings mode).
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[command(flatten)]
    bench: BenchmarkFormatArgs,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReliabilityArgs {
    /// Crowd ratings JSONL, three per rewrite.
    #[arg(long)]
    ratings: PathBuf,
    /// Expert verdicts (`rewrite_id`, `correct`) or expert rating records.
    #[arg(long)]
    expert: PathBuf,
    /// JSON report of the fits.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Density curves CSV. Defaults to `<out>.curves.csv` when `--out` is set.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    ratings: PathBuf,
    /// Sentence BLEU: an `evaluate bleu` report or JSONL of `rewrite_id`, `bleu`.
    #[arg(long)]
    input: PathBuf,
    /// Benchmarks mapping rewrites to benchmark and model (needed for grouping).
    #[arg(long)]
    refs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = GroupBy::All)]
    group_by: GroupBy,
    /// `auto` uses the exact permutation test up to n = 10 and the t approximation above.
    #[arg(long, value_enum, default_value_t = PMethod::Auto)]
    p_method: PMethod,
    #[command(flatten)]
    bench: BenchmarkFormatArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[command(flatten)]
    bench: BenchmarkFormatArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PatternsArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    srl: Option<PathBuf>,
    /// Restrict to the complex sentences of this benchmark (matched by pair_id).
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    bench: BenchmarkFormatArgs,
    #[arg(long, default_value_t = 3)]
    min_span: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildGoldArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    ratings: PathBuf,
    #[command(flatten)]
    bench: BenchmarkFormatArgs,
    /// Gold benchmark, canonical JSONL.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Task pool (benchmark). Ignored when the event log already has events.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Append-only event log.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Ratings per rewrite.
    #[arg(long, default_value_t = 2)]
    quota: usize,
    #[arg(long, default_value_t = 3)]
    rewrites_per_pair: usize,
    /// Directory with the rating UI bundle.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
    #[command(flatten)]
    bench: BenchmarkFormatArgs,
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        write_output(path, &text)?;
    }
    Ok(())
}

fn finish(manifest: &RunManifest, explicit: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let path = manifest_path(explicit, out, &manifest.command);
    write_output(&path, &manifest.to_json())
}

fn load_benchmarks(paths: &[PathBuf], args: &BenchmarkFormatArgs, m: &mut RunManifest) -> Result<Vec<Benchmark>> {
    paths
        .iter()
        .map(|p| read_benchmark(p, args.format.into(), &args.separator, m))
        .collect()
}

fn cmd_split(args: &SplitArgs, manifest_arg: Option<&Path>) -> Result<()> {
    let config = args.engine.config();
    let mut m = RunManifest::new("split", json!({ "engine": config }));
    let sentences = read_annotations(&args.annotations, args.srl.as_deref(), &mut m)?;
    let mut out = String::new();
    let mut changed = 0;
    for s in &sentences {
        let result = split_and_rephrase(s, &config).with_context(|| format!("sentence {}", s.sentence_id()))?;
        changed += usize::from(result.changed);
        let line = json!({
            "sentence_id": s.sentence_id(),
            "complex": s.text(),
            "sentences": result.sentences,
            "trace": result.trace,
            "changed": result.changed,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    match &args.out {
        Some(path) => write_output(path, &out)?,
        None => print!("{out}"),
    }
    log::info!("{changed} of {} sentences changed", sentences.len());
    m.observed = json!({ "sentences": sentences.len(), "changed": changed });
    finish(&m, manifest_arg, args.out.as_deref())
}

fn cmd_evaluate(args: &EvaluateArgs, manifest_arg: Option<&Path>) -> Result<()> {
    let mut m = RunManifest::new("evaluate", json!({ "mode": args.mode }));
    let benchmarks = load_benchmarks(&args.refs, &args.bench, &mut m)?;
    match args.mode {
        EvalMode::Bleu => {
            let Some(input) = &args.input else {
                bail!("bleu mode needs --input")
            };
            let hyps = reports::parse_hypotheses(&read_input(input, "hypotheses", &mut m)?)?;
            let mut refs = std::collections::BTreeMap::new();
            for b in &benchmarks {
                refs.extend(reports::human_references(b));
            }
            let eval = reports::evaluate_bleu(&hyps, &refs)?;
            print!("{}", reports::render_bleu(&eval));
            m.config["tokenizer"] = json!(eval.tokenizer);
            m.config["sentence_smoothing"] = json!(eval.sentence_smoothing);
            m.observed = json!(eval
                .groups
                .iter()
                .map(|g| (g.author.clone(), g.corpus.score))
                .collect::<Vec<_>>());
            emit_json(args.out.as_deref(), &eval)?;
        }
        EvalMode::Ratings => {
            let Some(path) = &args.ratings else {
                bail!("ratings mode needs --ratings")
            };
            let ratings = parse_ratings(&read_input(path, "ratings", &mut m)?)?;
            let groups = reports::evaluate_ratings(&ratings, &benchmarks)?;
            print!("{}", reports::render_ratings(&groups));
            emit_json(args.out.as_deref(), &groups)?;
        }
    }
    finish(&m, manifest_arg, args.out.as_deref())
}

fn cmd_reliability(args: &ReliabilityArgs, manifest_arg: Option<&Path>) -> Result<()> {
    let mut m = RunManifest::new(
        "reliability",
        json!({ "prior": "Beta(1,1)", "lower_level": LOWER_LEVEL, "upper_level": UPPER_LEVEL }),
    );
    let crowd = parse_ratings(&read_input(&args.ratings, "crowd_ratings", &mut m)?)?;
    let expert = parse_expert(&read_input(&args.expert, "expert", &mut m)?)?;
    let fits = bucket_and_fit(&crowd, &expert)?;
    let rows: Vec<_> = fits
        .iter()
        .map(|f| {
            let (lower, upper) = f.bounds();
            json!({
                "bucket": f.bucket, "n": f.support_count, "k": f.success_count,
                "alpha": f.alpha, "beta": f.beta, "mean": f.mean(),
                "lower_bound": lower, "upper_bound": upper,
            })
        })
        .collect();
    let header: Vec<String> = ["bucket", "n", "k", "alpha", "beta", "mean", "q10", "q90"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = fits
        .iter()
        .map(|f| {
            let (lower, upper) = f.bounds();
            vec![
                f.bucket.to_string(),
                f.support_count.to_string(),
                f.success_count.to_string(),
                format!("{}", f.alpha),
                format!("{}", f.beta),
                format!("{:.4}", f.mean()),
                format!("{lower:.4}"),
                format!("{upper:.4}"),
            ]
        })
        .collect();
    print!("{}", render_columns(&header, &body));
    let curves = args.curves.clone().or_else(|| {
        args.out.as_ref().map(|o| {
            let name = o
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            o.with_file_name(format!("{name}.curves.csv"))
        })
    });
    if let Some(path) = &curves {
        write_output(path, &density_csv(&fits))?;
    }
    emit_json(args.out.as_deref(), &rows)?;
    m.observed = json!(rows);
    finish(&m, manifest_arg, args.out.as_deref().or(curves.as_deref()))
}

fn cmd_correlate(args: &CorrelateArgs, manifest_arg: Option<&Path>) -> Result<()> {
    let mut m = RunManifest::new(
        "correlate",
        json!({ "group_by": args.group_by, "p_method": args.p_method, "alpha": 0.05 }),
    );
    let ratings = parse_ratings(&read_input(&args.ratings, "ratings", &mut m)?)?;
    let bleu = reports::parse_sentence_bleu(&read_input(&args.input, "sentence_bleu", &mut m)?)?;
    let benchmarks = load_benchmarks(&args.refs, &args.bench, &mut m)?;
    if args.group_by != GroupBy::All && benchmarks.is_empty() {
        bail!("--group-by benchmark|model needs --refs");
    }
    let rows = reports::correlate(&ratings, &bleu, &benchmarks, args.group_by, args.p_method.into())?;
    print!("{}", reports::render_correlation(&rows));
    emit_json(args.out.as_deref(), &rows)?;
    finish(&m, manifest_arg, args.out.as_deref())
}

fn cmd_stats(args: &StatsArgs, manifest_arg: Option<&Path>) -> Result<()> {
    let mut m = RunManifest::new("stats", json!({ "tokenizer": "whitespace-split-terminal-punct" }));
    let benchmarks = load_benchmarks(&args.input, &args.bench, &mut m)?;
    let stats: Vec<_> = benchmarks
        .iter()
        .map(|b| json!({ "benchmark": b.name, "stats": descriptive_stats(b) }))
        .collect();
    let header: Vec<String> = ["benchmark", "#complex", "#simple", "toks/complex", "sents/simple"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = benchmarks
        .iter()
        .map(|b| {
            let s = descriptive_stats(b);
            vec![
                b.name.clone(),
                s.n_complex.to_string(),
                s.n_simple.to_string(),
                format!("{:.1}", s.toks_per_complex),
                format!("{:.1}", s.sents_per_simple),
            ]
        })
        .collect();
    print!("{}", render_columns(&header, &body));
    emit_json(args.out.as_deref(), &stats)?;
    m.observed = json!(stats);
    finish(&m, manifest_arg, args.out.as_deref())
}

fn cmd_patterns(args: &PatternsArgs, manifest_arg: Option<&Path>) -> Result<()> {
    let config = EngineConfig {
        minimum_span: args.min_span,
        ..EngineConfig::default()
    };
    let mut m = RunManifest::new(
        "patterns",
        json!({ "minimum_span": args.min_span, "detector": "heuristic" }),
    );
    let sentences = read_annotations(&args.annotations, args.srl.as_deref(), &mut m)?;
    let (title, report) = match &args.input {
        Some(path) => {
            let bench = read_benchmark(path, args.bench.format.into(), &args.bench.separator, &mut m)?;
            let by_id = sentences
                .iter()
                .map(|s| (s.sentence_id().to_string(), s.clone()))
                .collect();
            (bench.name.clone(), pattern_report(&bench, &by_id, &config)?)
        }
        None => (stem(&args.annotations), pattern_report_for(&sentences, &config)),
    };
    print!("{}", report.render(&title));
    let per_sentence: Vec<_> = sentences
        .iter()
        .map(|s| json!({ "sentence_id": s.sentence_id(), "labels": detect_patterns(s, &config) }))
        .collect();
    emit_json(
        args.out.as_deref(),
        &json!({ "report": report, "sentences": per_sentence }),
    )?;
    m.observed = json!({ "patterns_per_sentence": report.patterns_per_sentence });
    finish(&m, manifest_arg, args.out.as_deref())
}

fn cmd_build_gold(args: &BuildGoldArgs, manifest_arg: Option<&Path>) -> Result<()> {
    let mut m = RunManifest::new("build-gold", json!({ "rule": "all ratings correct" }));
    let bench = read_benchmark(&args.input, args.bench.format.into(), &args.bench.separator, &mut m)?;
    let ratings = parse_ratings(&read_input(&args.ratings, "ratings", &mut m)?)?;
    let gold = build_gold(&bench, &ratings)?;
    if gold.pairs.is_empty() {
        log::warn!("no perfect rewrites; the gold benchmark is empty");
    }
    write_output(&args.out, &write_canonical(&gold))?;
    println!(
        "kept {} of {} rewrites in {} of {} pairs",
        gold.rewrite_count(),
        bench.rewrite_count(),
        gold.pairs.len(),
        bench.pairs.len()
    );
    m.observed = json!({ "pairs": gold.pairs.len(), "rewrites": gold.rewrite_count() });
    finish(&m, manifest_arg, Some(&args.out))
}

fn cmd_serve(args: &ServeArgs, manifest_arg: Option<&Path>) -> Result<()> {
    let config = ServiceConfig {
        rewrites_per_pair: args.rewrites_per_pair,
        ratings_per_rewrite: args.quota,
    };
    let mut m = RunManifest::new("serve", json!({ "service": config, "port": args.port }));
    let pool = match &args.input {
        Some(path) => read_benchmark(path, args.bench.format.into(), &args.bench.separator, &mut m)?,
        None => Benchmark::default(),
    };
    let service = TaskService::open(&args.out, &pool, config)?;
    finish(&m, manifest_arg, Some(&args.out))?;
    let addr = SocketAddr::from(([127, 0, 0, 1], args.port));
    let shared = Arc::new(Mutex::new(service));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(splitbench_server::serve(addr, shared, args.static_dir.clone()))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let manifest = cli.manifest.as_deref();
    match &cli.command {
        Command::Split(a) => cmd_split(a, manifest),
        Command::Evaluate(a) => cmd_evaluate(a, manifest),
        Command::Reliability(a) => cmd_reliability(a, manifest),
        Command::Correlate(a) => cmd_correlate(a, manifest),
        Command::Stats(a) => cmd_stats(a, manifest),
        Command::Patterns(a) => cmd_patterns(a, manifest),
        Command::BuildGold(a) => cmd_build_gold(a, manifest),
        Command::Serve(a) => cmd_serve(a, manifest),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<MissingInput>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
