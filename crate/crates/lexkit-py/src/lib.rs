//! Python bindings for the main lexkit types and operations: analysis,
//! indexing, BM25 search, fusion, evaluation, hygiene, and permutation
//! parsing. Build as a cdylib and import the resulting module as `lexkit_py`
//! (see python/smoke_test.py for locating the shared object without a
//! packaging step).

use std::collections::HashMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use lexkit::analyzer::AnalyzerConfig;
use lexkit::eval::{evaluate, Qrels, Run};
use lexkit::fusion::{fuse, FusionConfig, FusionMethod};
use lexkit::hygiene::{adjust_qrels, find_duplicates, quality_stats};
use lexkit::index::{build_index, load_index, save_index, Document, Index};
use lexkit::scoring::{search, BM25Params, IdfVariant, NormMode, QueryWeighting};

fn to_py_err(e: lexkit::Error) -> PyErr {
    match e.exit_code() {
        3 => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_params(
    k1: f64,
    b: f64,
    idf: &str,
    norms: &str,
    query_gen: &str,
) -> PyResult<BM25Params> {
    let idf_variant = match idf {
        "lucene" => IdfVariant::Lucene,
        "robertson" => IdfVariant::Robertson,
        other => return Err(PyValueError::new_err(format!("unknown idf variant {other:?}"))),
    };
    let norm_mode = match norms {
        "quantized" => NormMode::Quantized,
        "accurate" => NormMode::Accurate,
        other => return Err(PyValueError::new_err(format!("unknown norm mode {other:?}"))),
    };
    let query_weighting = match query_gen {
        "bow" => QueryWeighting::Bow,
        "bm25q" => QueryWeighting::Bm25q,
        other => return Err(PyValueError::new_err(format!("unknown query weighting {other:?}"))),
    };
    let params = BM25Params { k1, b, idf_variant, norm_mode, query_weighting };
    params.validate().map_err(to_py_err)?;
    Ok(params)
}

fn docs_from_pairs(docs: Vec<(String, String)>) -> Vec<Document> {
    docs.into_iter().map(|(doc_id, text)| Document { doc_id, text }).collect()
}

type PyRun = HashMap<String, Vec<(String, f64)>>;

fn run_from_py(run: PyRun, tag: &str) -> Run {
    Run::from_ranked_lists(run, tag)
}

fn run_to_py(run: &Run) -> PyRun {
    run.entries
        .iter()
        .map(|(qid, list)| {
            (qid.clone(), list.iter().map(|e| (e.doc_id.clone(), e.score)).collect())
        })
        .collect()
}

fn qrels_from_py(qrels: HashMap<String, HashMap<String, u32>>) -> Qrels {
    let mut grades = HashMap::new();
    for (qid, docs) in qrels {
        for (doc, grade) in docs {
            grades.insert((qid.clone(), doc), grade);
        }
    }
    Qrels { grades }
}

/// In-memory inverted index over a list of (doc_id, text) pairs.
#[pyclass(name = "Index")]
struct PyIndex {
    inner: Index,
}

#[pymethods]
impl PyIndex {
    /// Builds an index with the default analyzer (lowercase, classic
    /// stopword list, Porter stemming).
    #[staticmethod]
    fn build(docs: Vec<(String, String)>) -> PyResult<Self> {
        let index =
            build_index(docs_from_pairs(docs), &AnalyzerConfig::default()).map_err(to_py_err)?;
        Ok(PyIndex { inner: index })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyIndex { inner: load_index(&path).map_err(to_py_err)? })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        save_index(&self.inner, &path).map_err(to_py_err)
    }

    #[getter]
    fn num_docs(&self) -> u64 {
        self.inner.stats.num_docs
    }

    #[getter]
    fn avgdl(&self) -> f64 {
        self.inner.stats.avgdl
    }

    /// BM25 search returning up to k (doc_id, score) pairs, best first.
    #[pyo3(signature = (query, k = 10, k1 = 0.9, b = 0.4, idf = "lucene", norms = "quantized", query_gen = "bow"))]
    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        query: &str,
        k: usize,
        k1: f64,
        b: f64,
        idf: &str,
        norms: &str,
        query_gen: &str,
    ) -> PyResult<Vec<(String, f64)>> {
        let params = parse_params(k1, b, idf, norms, query_gen)?;
        let hits = search(&self.inner, query, &params, k).map_err(to_py_err)?;
        Ok(hits.into_iter().map(|h| (h.doc_id, h.score)).collect())
    }
}

/// Tokenizes with the default analyzer: lowercase, classic stopword list,
/// Porter stemming.
#[pyfunction]
fn analyze(text: &str) -> Vec<String> {
    lexkit::analyze(text, &AnalyzerConfig::default()).terms
}

/// Classic Porter stem of a single word.
#[pyfunction]
fn stem(word: &str) -> String {
    lexkit::porter::stem(word)
}

/// One-byte document-length code (exact below 64, geometric above).
#[pyfunction]
fn quantize_len(len: u32) -> u8 {
    lexkit::scoring::quantize_len(len)
}

/// Representative length for a quantization code.
#[pyfunction]
fn dequantize_len(code: u8) -> u32 {
    lexkit::scoring::dequantize_len(code)
}

/// Fuses runs (dicts of qid -> ranked [(doc_id, score), ...]) with
/// reciprocal rank fusion or min-max normalized score averaging.
#[pyfunction]
#[pyo3(signature = (runs, method = "rrf", rrf_k = 60.0, output_k = 1000))]
fn fuse_runs(runs: Vec<PyRun>, method: &str, rrf_k: f64, output_k: usize) -> PyResult<PyRun> {
    let method = match method {
        "rrf" => FusionMethod::Rrf,
        "norm" => FusionMethod::NormAvg,
        other => return Err(PyValueError::new_err(format!("unknown fusion method {other:?}"))),
    };
    let config = FusionConfig { method, rrf_k, depth: None, output_k };
    let runs: Vec<Run> = runs.into_iter().map(|r| run_from_py(r, "py")).collect();
    let fused = fuse(&runs, &config, "fused").map_err(to_py_err)?;
    Ok(run_to_py(&fused))
}

/// Macro-averaged metrics for a run against qrels
/// (qid -> {doc_id: grade}). Returns {"ndcg@10": ..., "recall@100": ...,
/// "judged_queries": ...}.
#[pyfunction]
fn evaluate_run(
    run: PyRun,
    qrels: HashMap<String, HashMap<String, u32>>,
) -> HashMap<String, f64> {
    let report = evaluate(&run_from_py(run, "py"), &qrels_from_py(qrels));
    HashMap::from([
        ("ndcg@10".to_string(), report.macro_ndcg_at_10),
        ("recall@100".to_string(), report.macro_recall_at_100),
        ("judged_queries".to_string(), report.num_judged_queries as f64),
    ])
}

/// Groups of doc_ids whose trimmed contents are byte-identical.
#[pyfunction]
fn duplicate_groups(docs: Vec<(String, String)>) -> Vec<Vec<String>> {
    let docs = docs_from_pairs(docs);
    find_duplicates(&docs)
        .groups
        .into_iter()
        .map(|g| g.into_iter().collect())
        .collect()
}

/// Corpus quality statistics with the default analyzer. Returns
/// {"total": ..., "unique": ..., "short": ..., "zero": ...}.
#[pyfunction]
fn corpus_stats(docs: Vec<(String, String)>) -> HashMap<String, usize> {
    let docs = docs_from_pairs(docs);
    let q = quality_stats(&docs, &AnalyzerConfig::default());
    HashMap::from([
        ("total".to_string(), q.total),
        ("unique".to_string(), q.unique),
        ("short".to_string(), q.short),
        ("zero".to_string(), q.zero),
    ])
}

/// Propagates the maximum grade per (query, duplicate-group) to every group
/// member present in the corpus.
#[pyfunction]
fn propagate_qrels(
    qrels: HashMap<String, HashMap<String, u32>>,
    docs: Vec<(String, String)>,
) -> PyResult<HashMap<String, HashMap<String, u32>>> {
    let docs = docs_from_pairs(docs);
    let groups = find_duplicates(&docs);
    let ids = docs.iter().map(|d| d.doc_id.clone()).collect();
    let adjusted =
        adjust_qrels(&qrels_from_py(qrels), &groups, Some(&ids)).map_err(to_py_err)?;
    let mut out: HashMap<String, HashMap<String, u32>> = HashMap::new();
    for ((qid, doc), grade) in adjusted.grades {
        out.entry(qid).or_default().insert(doc, grade);
    }
    Ok(out)
}

/// Parses a listwise-ranking response like "[2] > [1] > [3]" into a
/// 0-based permutation of 0..n; always total, garbage yields identity.
#[pyfunction]
fn parse_permutation(response: &str, n: usize) -> Vec<usize> {
    lexkit::rerank::parse_permutation(response, n)
}

#[pymodule]
fn lexkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIndex>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(stem, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_len, m)?)?;
    m.add_function(wrap_pyfunction!(dequantize_len, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_runs, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_run, m)?)?;
    m.add_function(wrap_pyfunction!(duplicate_groups, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats, m)?)?;
    m.add_function(wrap_pyfunction!(propagate_qrels, m)?)?;
    m.add_function(wrap_pyfunction!(parse_permutation, m)?)?;
    Ok(())
}
