//! Single executable exposing every pipeline stage as a subcommand.
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 backend/IO
//! error. Primary output goes to stdout or --output; diagnostics to stderr.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lexkit::analysis::{bucket_summary, buckets_to_csv, per_query_delta, rows_to_csv};
use lexkit::analyzer::{load_stopword_file, AnalyzerConfig, Stemmer};
use lexkit::error::Error;
use lexkit::eval::{evaluate, format_report, parse_qrels, parse_run, write_qrels, write_run, Run};
use lexkit::fusion::{fuse, FusionConfig, FusionMethod};
use lexkit::hygiene::{adjust_qrels, find_duplicates, quality_stats};
use lexkit::index::read_jsonl_corpus;
use lexkit::rerank::{
    rerank, rerank_with_queries, HttpBackend, IdentityBackend, QrelsOracleBackend,
    RerankConfig, ReverseBackend,
};
use lexkit::scoring::{BM25Params, IdfVariant, NormMode, QueryWeighting};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "lexkit", version, about = "Lexical retrieval toolkit: indexing, BM25 search, fusion, evaluation, corpus hygiene, reranking")]
struct Cli {
    /// Worker threads; 1 and N produce byte-identical output.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an inverted index from a JSON-lines corpus.
    Index(IndexArgs),
    /// Run BM25 search over an index, emitting a TREC run.
    Search(SearchArgs),
    /// Fuse two or more TREC runs.
    Fuse(FuseArgs),
    /// Evaluate a run against qrels (nDCG@10, Recall@100).
    Eval(EvalArgs),
    /// Find exact-duplicate documents (after whitespace trimming).
    Dedup(DedupArgs),
    /// Corpus quality statistics: unique, short, zero-token counts.
    Stats(StatsArgs),
    /// Propagate relevance grades across duplicate groups.
    AdjustQrels(AdjustQrelsArgs),
    /// Per-query comparison of two runs: query length vs. delta nDCG@10.
    Analyze(AnalyzeArgs),
    /// Sliding-window listwise reranking of a run.
    Rerank(RerankArgs),
}

#[derive(Args)]
struct AnalyzerArgs {
    /// Disable lowercasing.
    #[arg(long)]
    no_lowercase: bool,
    /// Stopword file (one term per line, '#' comments); default: bundled set.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Disable stopword removal entirely.
    #[arg(long)]
    no_stopwords: bool,
    /// Stemmer.
    #[arg(long, value_enum, default_value_t = StemArg::Porter)]
    stem: StemArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum StemArg {
    None,
    Porter,
}

impl AnalyzerArgs {
    fn to_config(&self) -> Result<AnalyzerConfig, Error> {
        let mut config = AnalyzerConfig::default();
        config.lowercase = !self.no_lowercase;
        config.stem = match self.stem {
            StemArg::None => Stemmer::None,
            StemArg::Porter => Stemmer::Porter,
        };
        if self.no_stopwords {
            config.stopwords = Vec::new();
        } else if let Some(path) = &self.stopwords {
            config.stopwords = load_stopword_file(path)?;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct IndexArgs {
    /// JSON-lines corpus with "id" and "contents" fields.
    #[arg(long)]
    corpus: PathBuf,
    /// Index file to write.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
}

#[derive(Args)]
struct BM25Args {
    #[arg(long, default_value_t = 0.9)]
    k1: f64,
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    #[arg(long, value_enum, default_value_t = IdfArg::Lucene)]
    idf: IdfArg,
    #[arg(long, value_enum, default_value_t = NormsArg::Quantized)]
    norms: NormsArg,
    #[arg(long, value_enum, default_value_t = QueryGenArg::Bow)]
    query_gen: QueryGenArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum IdfArg {
    Lucene,
    Robertson,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormsArg {
    Quantized,
    Accurate,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryGenArg {
    Bow,
    Bm25q,
}

impl BM25Args {
    fn to_params(&self) -> BM25Params {
        BM25Params {
            k1: self.k1,
            b: self.b,
            idf_variant: match self.idf {
                IdfArg::Lucene => IdfVariant::Lucene,
                IdfArg::Robertson => IdfVariant::Robertson,
            },
            norm_mode: match self.norms {
                NormsArg::Quantized => NormMode::Quantized,
                NormsArg::Accurate => NormMode::Accurate,
            },
            query_weighting: match self.query_gen {
                QueryGenArg::Bow => QueryWeighting::Bow,
                QueryGenArg::Bm25q => QueryWeighting::Bm25q,
            },
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    /// Queries file: TSV "id<TAB>text", or JSON-lines with "id"/"text"
    /// (auto-detected by .jsonl extension).
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    bm25: BM25Args,
    /// Number of hits per query.
    #[arg(long, default_value_t = 1000)]
    hits: usize,
    /// Run tag for the TREC output.
    #[arg(long, default_value = "lexkit")]
    tag: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Rrf)]
    method: MethodArg,
    #[arg(long, default_value_t = 60.0)]
    rrf_k: f64,
    /// Depth into each input list; default: full lists.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    output_k: usize,
    #[arg(long, default_value = "fused")]
    tag: String,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Two or more TREC run files.
    #[arg(required = true, num_args = 2..)]
    runs: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rrf,
    Norm,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Metrics to report.
    #[arg(long, default_value = "ndcg@10,recall@100")]
    metrics: String,
    /// Also write the full JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DedupArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AdjustQrelsArgs {
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    run_a: PathBuf,
    #[arg(long)]
    run_b: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Bucket edges in tokens, comma-separated.
    #[arg(long, default_value = "16,64,256", value_delimiter = ',')]
    edges: Vec<usize>,
    /// Per-query CSV output (default stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Bucket summary CSV output (default stderr-adjacent on stdout after rows).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
}

#[derive(Args)]
struct RerankArgs {
    #[arg(long)]
    run: PathBuf,
    /// JSON-lines corpus supplying passage texts.
    #[arg(long)]
    corpus: PathBuf,
    /// Queries file (required for the http backend).
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendArg::Identity)]
    backend: BackendArg,
    /// Qrels for the oracle backend.
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    top_k: usize,
    #[arg(long, default_value_t = 20)]
    window: usize,
    #[arg(long, default_value_t = 10)]
    stride: usize,
    #[arg(long, default_value_t = 16384)]
    context_budget: usize,
    #[arg(long, default_value_t = 4096)]
    max_passage_chars: usize,
    /// Model name for the http backend.
    #[arg(long, default_value = "gpt-oss-20b")]
    model: String,
    /// Chat-completion base URL; falls back to RERANK_BASE_URL.
    #[arg(long)]
    base_url: Option<String>,
    /// Request/response cache file (JSON-lines) for offline replay.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Identity,
    Reverse,
    Oracle,
    Http,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are success, anything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 1 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("lexkit: cannot configure thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lexkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Index(args) => cmd_index(args),
        Command::Search(args) => cmd_search(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Dedup(args) => cmd_dedup(args),
        Command::Stats(args) => cmd_stats(args),
        Command::AdjustQrels(args) => cmd_adjust_qrels(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Rerank(args) => cmd_rerank(args),
    }
}

/// Writes to --output or stdout.
fn emit(output: Option<&Path>, contents: &[u8]) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, contents)?,
        None => std::io::stdout().write_all(contents)?,
    }
    Ok(())
}

fn cmd_index(args: IndexArgs) -> Result<(), Error> {
    let config = args.analyzer.to_config()?;
    let corpus = read_jsonl_corpus(&args.corpus)?;
    let index = lexkit::build_index(corpus, &config)?;
    lexkit::save_index(&index, &args.output)?;
    eprintln!(
        "indexed {} documents, {} terms, avgdl {:.2}",
        index.num_docs(),
        index.postings.len(),
        index.stats.avgdl
    );
    Ok(())
}

/// Reads queries: TSV "id<TAB>text" or JSON-lines {"id","text"}, by extension.
fn read_queries(path: &Path) -> Result<Vec<(String, String)>, Error> {
    let contents = std::fs::read_to_string(path)?;
    let is_jsonl = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("jsonl") || e.eq_ignore_ascii_case("json"));
    let mut out = Vec::new();
    for (lineno, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::DataAt {
            path: path.display().to_string(),
            line: lineno + 1,
            msg,
        };
        if is_jsonl {
            #[derive(serde::Deserialize)]
            struct Q {
                id: String,
                text: String,
            }
            let q: Q = serde_json::from_str(line).map_err(|e| err(format!("bad query line: {e}")))?;
            out.push((q.id, q.text));
        } else {
            let (id, text) = line
                .split_once('\t')
                .ok_or_else(|| err("expected TAB-separated \"id<TAB>text\"".to_string()))?;
            out.push((id.to_string(), text.to_string()));
        }
    }
    Ok(out)
}

fn cmd_search(args: SearchArgs) -> Result<(), Error> {
    let params = args.bm25.to_params();
    params.validate()?;
    if args.hits == 0 {
        return Err(Error::usage("--hits must be >= 1"));
    }
    let index = lexkit::load_index(&args.index)?;
    let queries = read_queries(&args.queries)?;
    let results: Vec<Result<(String, Vec<(String, f64)>), Error>> = queries
        .par_iter()
        .map(|(qid, text)| {
            let hits = lexkit::search(&index, text, &params, args.hits)?;
            Ok((qid.clone(), hits.into_iter().map(|h| (h.doc_id, h.score)).collect()))
        })
        .collect();
    let mut lists = Vec::with_capacity(results.len());
    for r in results {
        lists.push(r?);
    }
    let run = Run::from_ranked_lists(lists, &args.tag);
    let mut buf = Vec::new();
    write_run(&run, &mut buf)?;
    emit(args.output.as_deref(), &buf)
}

fn cmd_fuse(args: FuseArgs) -> Result<(), Error> {
    let config = FusionConfig {
        method: match args.method {
            MethodArg::Rrf => FusionMethod::Rrf,
            MethodArg::Norm => FusionMethod::NormAvg,
        },
        rrf_k: args.rrf_k,
        depth: args.depth,
        output_k: args.output_k,
    };
    let runs = args.runs.iter().map(|p| parse_run(p)).collect::<Result<Vec<_>, _>>()?;
    let fused = fuse(&runs, &config, &args.tag)?;
    let mut buf = Vec::new();
    write_run(&fused, &mut buf)?;
    emit(args.output.as_deref(), &buf)
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    for metric in args.metrics.split(',') {
        if !matches!(metric.trim(), "ndcg@10" | "recall@100") {
            return Err(Error::usage(format!(
                "unsupported metric {metric:?} (supported: ndcg@10, recall@100)"
            )));
        }
    }
    let run = parse_run(&args.run)?;
    let qrels = parse_qrels(&args.qrels)?;
    let report = evaluate(&run, &qrels);
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::data(format!("cannot encode report: {e}")))?;
        std::fs::write(path, json)?;
    }
    emit(args.output.as_deref(), format_report(&report).as_bytes())
}

fn cmd_dedup(args: DedupArgs) -> Result<(), Error> {
    let corpus = read_jsonl_corpus(&args.corpus)?;
    let groups = find_duplicates(&corpus);
    let mut buf = Vec::new();
    for group in &groups.groups {
        let ids: Vec<&String> = group.iter().collect();
        writeln!(buf, "{}", serde_json::to_string(&ids).expect("ids serialize"))?;
    }
    emit(args.output.as_deref(), &buf)
}

fn cmd_stats(args: StatsArgs) -> Result<(), Error> {
    let config = args.analyzer.to_config()?;
    let corpus = read_jsonl_corpus(&args.corpus)?;
    let q = quality_stats(&corpus, &config);
    let text = format!(
        "{:<10} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8}\n{:<10} {:>12} {:>7.1}% {:>12} {:>7.1}% {:>12} {:>7.1}%\n",
        "total", "unique", "(%)", "short", "(%)", "zero", "(%)",
        q.total, q.unique, q.unique_pct * 100.0, q.short, q.short_pct * 100.0, q.zero, q.zero_pct * 100.0,
    );
    emit(args.output.as_deref(), text.as_bytes())
}

fn cmd_adjust_qrels(args: AdjustQrelsArgs) -> Result<(), Error> {
    let qrels = parse_qrels(&args.qrels)?;
    let corpus = read_jsonl_corpus(&args.corpus)?;
    let groups = find_duplicates(&corpus);
    let ids: BTreeSet<String> = corpus.iter().map(|d| d.doc_id.clone()).collect();
    let adjusted = adjust_qrels(&qrels, &groups, Some(&ids))?;
    let mut buf = Vec::new();
    write_qrels(&adjusted, &mut buf)?;
    emit(args.output.as_deref(), &buf)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let config = args.analyzer.to_config()?;
    let run_a = parse_run(&args.run_a)?;
    let run_b = parse_run(&args.run_b)?;
    let qrels = parse_qrels(&args.qrels)?;
    let queries = read_queries(&args.queries)?;
    let rows = per_query_delta(&run_a, &run_b, &qrels, &queries, &config)?;
    let buckets = bucket_summary(&rows, &args.edges)?;
    emit(args.output.as_deref(), rows_to_csv(&rows).as_bytes())?;
    match &args.summary {
        Some(path) => std::fs::write(path, buckets_to_csv(&buckets))?,
        None => {
            if args.output.is_some() {
                print!("{}", buckets_to_csv(&buckets));
            } else {
                eprint!("{}", buckets_to_csv(&buckets));
            }
        }
    }
    Ok(())
}

fn cmd_rerank(args: RerankArgs) -> Result<(), Error> {
    let config = RerankConfig {
        top_k: args.top_k,
        window: args.window,
        stride: args.stride,
        context_budget: args.context_budget,
        max_passage_chars: args.max_passage_chars,
    };
    let run = parse_run(&args.run)?;
    let corpus = read_jsonl_corpus(&args.corpus)?;
    let documents: HashMap<String, String> =
        corpus.into_iter().map(|d| (d.doc_id, d.text)).collect();
    let reranked = match args.backend {
        BackendArg::Identity => rerank(&run, &documents, &mut IdentityBackend, &config)?,
        BackendArg::Reverse => rerank(&run, &documents, &mut ReverseBackend, &config)?,
        BackendArg::Oracle => {
            let qrels_path = args
                .qrels
                .as_ref()
                .ok_or_else(|| Error::usage("--backend oracle requires --qrels"))?;
            let qrels = parse_qrels(qrels_path)?;
            rerank(&run, &documents, &mut QrelsOracleBackend { qrels }, &config)?
        }
        BackendArg::Http => {
            let queries_path = args
                .queries
                .as_ref()
                .ok_or_else(|| Error::usage("--backend http requires --queries"))?;
            let queries: BTreeMap<String, String> =
                read_queries(queries_path)?.into_iter().collect();
            let queries: HashMap<String, String> = queries.into_iter().collect();
            // Precedence: flags > environment > defaults.
            let base_url = args.base_url.clone().or_else(|| std::env::var("RERANK_BASE_URL").ok());
            let api_key = std::env::var("RERANK_API_KEY").ok();
            let mut backend =
                HttpBackend::new(base_url, args.model.clone(), api_key, args.cache.as_deref())?;
            rerank_with_queries(&run, &queries, &documents, &mut backend, &config)?
        }
    };
    let mut buf = Vec::new();
    write_run(&reranked, &mut buf)?;
    emit(args.output.as_deref(), &buf)
}
