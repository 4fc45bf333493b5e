//! Benchmark-number checks against the BRIGHT tasks and the released
//! baseline run files. These need local data that is not committed, so every
//! test is gated on BRIGHT_DATA_DIR and prints a SKIP line when it is unset.
//!
//! Expected layout under $BRIGHT_DATA_DIR (see README):
//!   corpus/{task}.jsonl      {"id": ..., "contents": ...} per line
//!   queries/{task}.tsv       query_id<TAB>query_text
//!   qrels/{task}.txt         "qid 0 docid grade"
//!   runs/{task}.bm25.txt     released BM25 baseline run (TREC format)
//!   runs/{task}.bge.txt      released BGE baseline run (TREC format)
//!
//! Run with: BRIGHT_DATA_DIR=... cargo test --release --test bright_benchmarks -- --nocapture

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lexkit::analysis::{bucket_summary, per_query_delta};
use lexkit::analyzer::AnalyzerConfig;
use lexkit::eval::{evaluate, parse_qrels, parse_run, Qrels, Run};
use lexkit::fusion::{fuse, FusionConfig, FusionMethod};
use lexkit::hygiene::{added_pairs, adjust_qrels, find_duplicates, quality_stats};
use lexkit::index::{build_index, read_jsonl_corpus, Document, Index};
use lexkit::scoring::{search, BM25Params, NormMode, QueryWeighting};

const TASKS: [&str; 12] = [
    "biology",
    "earth-science",
    "economics",
    "psychology",
    "robotics",
    "stackoverflow",
    "sustainable-living",
    "leetcode",
    "pony",
    "aops",
    "theoremqa-questions",
    "theoremqa-theorems",
];

/// StackExchange tasks and the exact number of (query, doc) pairs the
/// duplicate-aware qrel adjustment must add for each.
const EXPECTED_ADDED: [(&str, usize); 7] = [
    ("biology", 21),
    ("earth-science", 4),
    ("economics", 0),
    ("psychology", 0),
    ("robotics", 0),
    ("stackoverflow", 102),
    ("sustainable-living", 497),
];

fn data_dir(criterion: &str) -> Option<PathBuf> {
    match std::env::var_os("BRIGHT_DATA_DIR") {
        Some(dir) => Some(PathBuf::from(dir)),
        None => {
            println!("{criterion}: SKIP (BRIGHT_DATA_DIR not set)");
            None
        }
    }
}

fn load_corpus(dir: &Path, task: &str) -> Vec<Document> {
    read_jsonl_corpus(&dir.join("corpus").join(format!("{task}.jsonl")))
        .unwrap_or_else(|e| panic!("corpus for {task}: {e}"))
}

fn load_queries(dir: &Path, task: &str) -> Vec<(String, String)> {
    let path = dir.join("queries").join(format!("{task}.tsv"));
    let contents = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("queries for {task}: {e}"));
    contents
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (id, text) = l
                .split_once('\t')
                .unwrap_or_else(|| panic!("bad query line in {}: {l:?}", path.display()));
            (id.to_string(), text.to_string())
        })
        .collect()
}

fn load_qrels(dir: &Path, task: &str) -> Qrels {
    parse_qrels(&dir.join("qrels").join(format!("{task}.txt")))
        .unwrap_or_else(|e| panic!("qrels for {task}: {e}"))
}

fn load_run(dir: &Path, task: &str, system: &str) -> Run {
    parse_run(&dir.join("runs").join(format!("{task}.{system}.txt")))
        .unwrap_or_else(|e| panic!("{system} run for {task}: {e}"))
}

fn search_run(index: &Index, queries: &[(String, String)], params: &BM25Params) -> Run {
    let lists: Vec<(String, Vec<(String, f64)>)> = queries
        .iter()
        .map(|(qid, text)| {
            let hits = search(index, text, params, 1000).unwrap();
            (qid.clone(), hits.into_iter().map(|h| (h.doc_id, h.score)).collect())
        })
        .collect();
    Run::from_ranked_lists(lists, "lexkit")
}

fn bm25(norm_mode: NormMode, query_weighting: QueryWeighting) -> BM25Params {
    BM25Params { norm_mode, query_weighting, ..Default::default() }
}

fn assert_close(what: &str, got: f64, want: f64, tol: f64) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got:.4}, expected {want:.3} +/- {tol}"
    );
}

#[test]
fn crit08_corpus_quality_stats() {
    let Some(dir) = data_dir("criterion 8 (corpus quality stats)") else { return };

    let biology = load_corpus(&dir, "biology");
    let config = AnalyzerConfig::default();
    let stats = quality_stats(&biology, &config);
    assert_eq!(stats.total, 57_359, "biology total docs");
    assert_eq!(stats.unique, 49_434, "biology unique docs");
    let within = |got: usize, want: usize| {
        (got as f64 - want as f64).abs() <= 0.02 * want as f64
    };
    assert!(within(stats.short, 7_534), "biology short docs: got {}", stats.short);
    assert!(within(stats.zero, 329), "biology zero-token docs: got {}", stats.zero);

    let leetcode = load_corpus(&dir, "leetcode");
    let lc = quality_stats(&leetcode, &config);
    assert_eq!(lc.unique, lc.total, "leetcode should be 100% unique");
    assert_eq!(lc.short, 0, "leetcode short docs");
    assert_eq!(lc.zero, 0, "leetcode zero-token docs");

    println!("criterion 8 (corpus quality stats): PASS");
}

#[test]
fn crit09_bm25_baselines() {
    let Some(dir) = data_dir("criterion 9 (BM25 baselines)") else { return };
    let config = AnalyzerConfig::default();

    // Biology spot checks with accurate norms.
    let biology = load_corpus(&dir, "biology");
    let index = build_index(biology, &config).unwrap();
    let queries = load_queries(&dir, "biology");
    let qrels = load_qrels(&dir, "biology");

    let bm25q = search_run(&index, &queries, &bm25(NormMode::Accurate, QueryWeighting::Bm25q));
    let report = evaluate(&bm25q, &qrels);
    assert_close("biology bm25q accurate nDCG@10", report.macro_ndcg_at_10, 0.189, 0.010);

    let bow = search_run(&index, &queries, &bm25(NormMode::Accurate, QueryWeighting::Bow));
    let report = evaluate(&bow, &qrels);
    assert_close("biology bow accurate nDCG@10", report.macro_ndcg_at_10, 0.175, 0.010);

    // Quantized vs accurate norms agree to within 0.005 on average.
    let mut deltas = Vec::new();
    for task in TASKS {
        let corpus = load_corpus(&dir, task);
        let index = build_index(corpus, &config).unwrap();
        let queries = load_queries(&dir, task);
        let qrels = load_qrels(&dir, task);
        let quantized = search_run(&index, &queries, &bm25(NormMode::Quantized, QueryWeighting::Bm25q));
        let accurate = search_run(&index, &queries, &bm25(NormMode::Accurate, QueryWeighting::Bm25q));
        deltas.push(evaluate(&quantized, &qrels).macro_ndcg_at_10 - evaluate(&accurate, &qrels).macro_ndcg_at_10);
    }
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    assert!(mean.abs() <= 0.005, "mean quantized-accurate delta {mean:.4} exceeds 0.005");

    println!("criterion 9 (BM25 baselines): PASS");
}

#[test]
fn crit10_fusion_baselines() {
    let Some(dir) = data_dir("criterion 10 (fusion baselines)") else { return };

    let mut rrf_ndcg = BTreeMap::new();
    let mut rrf_recall = BTreeMap::new();
    let mut norm_ndcg = BTreeMap::new();
    for task in TASKS {
        let bm25 = load_run(&dir, task, "bm25");
        let bge = load_run(&dir, task, "bge");
        let qrels = load_qrels(&dir, task);

        let rrf_cfg = FusionConfig::default();
        let fused = fuse(&[bm25.clone(), bge.clone()], &rrf_cfg, "rrf").unwrap();
        let report = evaluate(&fused, &qrels);
        rrf_ndcg.insert(task.to_string(), report.macro_ndcg_at_10);
        rrf_recall.insert(task.to_string(), report.macro_recall_at_100);

        let norm_cfg = FusionConfig { method: FusionMethod::NormAvg, ..Default::default() };
        let fused = fuse(&[bm25, bge], &norm_cfg, "norm").unwrap();
        norm_ndcg.insert(task.to_string(), evaluate(&fused, &qrels).macro_ndcg_at_10);
    }
    let overall = |m: &BTreeMap<String, f64>| m.values().sum::<f64>() / m.len() as f64;
    assert_close("RRF BM25+BGE overall nDCG@10", overall(&rrf_ndcg), 0.173, 0.002);
    assert_close("norm-avg BM25+BGE overall nDCG@10", overall(&norm_ndcg), 0.180, 0.002);
    assert_close("RRF BM25+BGE overall Recall@100", overall(&rrf_recall), 0.463, 0.002);

    println!("criterion 10 (fusion baselines): PASS");
}

#[test]
fn crit11_duplicate_aware_qrels() {
    let Some(dir) = data_dir("criterion 11 (duplicate-aware qrels)") else { return };

    for (task, expected) in EXPECTED_ADDED {
        let corpus = load_corpus(&dir, task);
        let groups = find_duplicates(&corpus);
        let qrels = load_qrels(&dir, task);
        let ids = corpus.iter().map(|d| d.doc_id.clone()).collect();
        let adjusted = adjust_qrels(&qrels, &groups, Some(&ids)).unwrap();
        assert_eq!(added_pairs(&qrels, &adjusted), expected, "{task} added pairs");

        if task == "stackoverflow" {
            let bm25 = load_run(&dir, task, "bm25");
            let bge = load_run(&dir, task, "bge");
            let fused = fuse(&[bm25, bge], &FusionConfig::default(), "rrf").unwrap();
            let before = evaluate(&fused, &qrels).macro_ndcg_at_10;
            let after = evaluate(&fused, &adjusted).macro_ndcg_at_10;
            assert_close("stackoverflow BM25+BGE nDCG@10 before adjustment", before, 0.182, 0.002);
            assert_close("stackoverflow BM25+BGE nDCG@10 after adjustment", after, 0.190, 0.002);
        }
    }

    println!("criterion 11 (duplicate-aware qrels): PASS");
}

#[test]
fn crit12_short_query_agreement() {
    let Some(dir) = data_dir("criterion 12 (short-query agreement)") else { return };
    let config = AnalyzerConfig::default();

    // Per-query nDCG@10 deltas, quantized minus accurate norms, over all tasks.
    let mut rows = Vec::new();
    for task in TASKS {
        let corpus = load_corpus(&dir, task);
        let index = build_index(corpus, &config).unwrap();
        let queries: Vec<(String, String)> = load_queries(&dir, task)
            .into_iter()
            .map(|(qid, text)| (format!("{task}:{qid}"), text))
            .collect();
        let qrels = Qrels {
            grades: load_qrels(&dir, task)
                .grades
                .into_iter()
                .map(|((qid, doc), g)| ((format!("{task}:{qid}"), doc), g))
                .collect(),
        };
        let remap = |mut run: Run| {
            run.entries = run
                .entries
                .into_iter()
                .map(|(qid, list)| (format!("{task}:{qid}"), list))
                .collect();
            run
        };
        let quantized = remap(search_run(&index, &queries, &bm25(NormMode::Quantized, QueryWeighting::Bm25q)));
        let accurate = remap(search_run(&index, &queries, &bm25(NormMode::Accurate, QueryWeighting::Bm25q)));
        rows.extend(per_query_delta(&quantized, &accurate, &qrels, &queries, &config).unwrap());
    }

    let buckets = bucket_summary(&rows, &[16, 64, 256]).unwrap();
    let populated: Vec<_> = buckets.iter().filter(|b| b.count > 0).collect();
    assert!(populated.len() >= 2, "need at least two populated buckets");
    let first = populated[0];
    assert_eq!(first.lo, 0, "shortest bucket should start at 0 tokens");
    for other in &populated[1..] {
        assert!(
            first.mean_delta.abs() <= other.mean_delta.abs(),
            "short-query bucket |mean delta| {:.4} not the smallest (bucket {} has {:.4})",
            first.mean_delta.abs(),
            other.lo,
            other.mean_delta.abs(),
        );
        let nonzero = |b: &lexkit::analysis::BucketRow| b.wins + b.losses;
        assert!(
            nonzero(first) <= nonzero(other),
            "short-query bucket has more non-zero deltas than bucket {}",
            other.lo,
        );
    }

    println!("criterion 12 (short-query agreement): PASS");
}
