//! Sliding-window listwise reranking over first-stage runs, with pluggable
//! ordering backends including an OpenAI-compatible chat-completion client
//! whose request/response pairs are cached to a replayable JSON-lines file.

use std::collections::{BTreeMap, HashMap};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{Qrels, Run, RunEntry};

#[derive(Debug, Clone, PartialEq)]
pub struct RerankConfig {
    pub top_k: usize,
    pub window: usize,
    pub stride: usize,
    /// Token budget for one request, estimated at 4 chars per token.
    pub context_budget: usize,
    /// Per-passage truncation cap in characters.
    pub max_passage_chars: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            top_k: 100,
            window: 20,
            stride: 10,
            context_budget: 16384,
            max_passage_chars: 4096,
        }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.stride && self.stride <= self.window && self.window <= self.top_k) {
            return Err(Error::usage(format!(
                "need 1 <= stride ({}) <= window ({}) <= top_k ({})",
                self.stride, self.window, self.top_k
            )));
        }
        Ok(())
    }
}

/// One window of the ranked list handed to a backend.
pub struct WindowRequest<'a> {
    pub query_id: &'a str,
    pub query: &'a str,
    pub doc_ids: &'a [String],
    pub passages: &'a [String],
}

/// Orders a window of passages. The returned permutation must be a bijection
/// on 0..passages.len(); anything else triggers the identity fallback.
pub trait Backend {
    fn name(&self) -> &str;
    fn order(&mut self, request: &WindowRequest<'_>) -> Result<Vec<usize>>;
}

/// Windows proceed bottom-up: the last window is [n-window, n), each prior
/// window starts `stride` earlier, the first is clamped to start 0.
pub fn sliding_windows(n: usize, window: usize, stride: usize) -> Vec<(usize, usize)> {
    if n <= window {
        return vec![(0, n)];
    }
    let mut out = Vec::new();
    let mut start = n - window;
    loop {
        out.push((start, start + window));
        if start == 0 {
            break;
        }
        start = start.saturating_sub(stride);
    }
    out
}

pub fn is_permutation(perm: &[usize], len: usize) -> bool {
    if perm.len() != len {
        return false;
    }
    let mut seen = vec![false; len];
    for &p in perm {
        if p >= len || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Reorders ranking[start..end] by `perm`; everything outside the window is
/// untouched.
pub fn apply_window_permutation<T: Clone>(
    ranking: &mut [T],
    window: (usize, usize),
    perm: &[usize],
) -> Result<()> {
    let (start, end) = window;
    if !is_permutation(perm, end - start) {
        return Err(Error::backend("backend returned a non-bijective permutation"));
    }
    let slice: Vec<T> = ranking[start..end].to_vec();
    for (i, &p) in perm.iter().enumerate() {
        ranking[start + i] = slice[p].clone();
    }
    Ok(())
}

/// Reranks the top_k prefix of each query's list. Windows are processed
/// bottom-up, each permutation applied before the next window is formed.
/// A backend failure leaves that window in input order with a warning.
/// Output ranks are renumbered 1..n with synthetic scores n-rank+1.
/// Position-only backends (identity, reverse, oracle) need no query text;
/// prompt-building backends should go through [`rerank_with_queries`].
pub fn rerank(
    run: &Run,
    documents: &HashMap<String, String>,
    backend: &mut dyn Backend,
    config: &RerankConfig,
) -> Result<Run> {
    rerank_impl(run, None, documents, backend, config)
}

/// Like [`rerank`] but with explicit query texts, which the prompt-building
/// backends require.
pub fn rerank_with_queries(
    run: &Run,
    queries: &HashMap<String, String>,
    documents: &HashMap<String, String>,
    backend: &mut dyn Backend,
    config: &RerankConfig,
) -> Result<Run> {
    rerank_impl(run, Some(queries), documents, backend, config)
}

fn rerank_impl(
    run: &Run,
    queries: Option<&HashMap<String, String>>,
    documents: &HashMap<String, String>,
    backend: &mut dyn Backend,
    config: &RerankConfig,
) -> Result<Run> {
    config.validate()?;
    let mut entries = BTreeMap::new();
    for (qid, list) in &run.entries {
        let text = match queries {
            Some(q) => q
                .get(qid)
                .map(String::as_str)
                .ok_or_else(|| Error::data(format!("no query text for query {qid}")))?,
            None => "",
        };
        let ordering = rerank_query(qid, text, list, documents, backend, config)?;
        let n = ordering.len();
        let reranked = ordering
            .into_iter()
            .enumerate()
            .map(|(i, doc_id)| RunEntry { doc_id, rank: i as u32 + 1, score: (n - i) as f64 })
            .collect();
        entries.insert(qid.clone(), reranked);
    }
    Ok(Run { entries, tag: format!("{}-{}", run.tag, backend.name()) })
}

fn rerank_query(
    qid: &str,
    query: &str,
    list: &[RunEntry],
    documents: &HashMap<String, String>,
    backend: &mut dyn Backend,
    config: &RerankConfig,
) -> Result<Vec<String>> {
    let mut ordering: Vec<String> = list.iter().map(|e| e.doc_id.clone()).collect();
    let head = ordering.len().min(config.top_k);
    if head == 0 {
        return Ok(ordering);
    }
    for doc_id in &ordering[..head] {
        if !documents.contains_key(doc_id) {
            return Err(Error::data(format!("no document text for {doc_id} (query {qid})")));
        }
    }
    for window in sliding_windows(head, config.window, config.stride) {
        let (start, end) = window;
        let doc_ids: Vec<String> = ordering[start..end].to_vec();
        let passages: Vec<String> = doc_ids
            .iter()
            .map(|d| truncate_chars(&documents[d], config.max_passage_chars))
            .collect();
        let passages = fit_to_budget(query, passages, config.context_budget);
        let request = WindowRequest { query_id: qid, query, doc_ids: &doc_ids, passages: &passages };
        match backend.order(&request) {
            Ok(perm) => {
                if let Err(e) = apply_window_permutation(&mut ordering, window, &perm) {
                    log::warn!("query {qid} window {start}..{end}: {e}; window left in input order");
                }
            }
            Err(e) => {
                log::warn!("query {qid} window {start}..{end}: backend failed: {e}; window left in input order");
            }
        }
    }
    Ok(ordering)
}

fn truncate_chars(text: &str, max_chars: usize) -> String {
    text.chars().take(max_chars).collect()
}

/// Shrinks passages (never drops them) until the whole prompt fits the
/// char-estimated context budget.
fn fit_to_budget(query: &str, mut passages: Vec<String>, context_budget: usize) -> Vec<String> {
    const CHARS_PER_TOKEN: usize = 4;
    let budget_chars = context_budget.saturating_mul(CHARS_PER_TOKEN);
    let overhead = query.chars().count() * 2 + 512 + passages.len() * 8;
    let available = budget_chars.saturating_sub(overhead);
    let total: usize = passages.iter().map(|p| p.chars().count()).sum();
    if total > available && !passages.is_empty() {
        let per_passage = (available / passages.len()).max(1);
        for p in &mut passages {
            *p = truncate_chars(p, per_passage);
        }
    }
    passages
}

/// Builds the listwise ranking request body (OpenAI chat-completion shape)
/// with deterministic parameters: temperature 0, fixed max output tokens.
pub fn build_prompt(query: &str, passages: &[String], model: &str) -> serde_json::Value {
    let n = passages.len();
    let mut user = format!(
        "I will provide you with {n} passages, each indicated by a numerical identifier [].\n\
         Rank the passages based on their relevance to the search query.\n\nQuery: {query}\n\n"
    );
    for (i, p) in passages.iter().enumerate() {
        user.push_str(&format!("[{}] {}\n", i + 1, p));
    }
    user.push_str(&format!(
        "\nRank the {n} passages above in descending order of relevance to the query. \
         All passages must appear exactly once, listed by identifier like [2] > [1] > [3]. \
         Output only the ranking."
    ));
    json!({
        "model": model,
        "messages": [
            {"role": "system", "content": "You are an expert passage ranker. You rank passages by relevance to a query."},
            {"role": "user", "content": user}
        ],
        "temperature": 0,
        "max_tokens": 16384,
    })
}

/// Extracts bracketed indices from a model response, de-duplicates keeping
/// the first occurrence, drops out-of-range indices, and appends missing
/// indices in input order. Always yields a bijection on 0..window_size.
/// A response with no parseable index yields the identity permutation.
pub fn parse_permutation(response: &str, window_size: usize) -> Vec<usize> {
    let mut perm = Vec::with_capacity(window_size);
    let mut seen = vec![false; window_size];
    let bytes = response.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'[' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b']' {
                if let Ok(v) = response[i + 1..j].parse::<usize>() {
                    if v >= 1 && v <= window_size && !seen[v - 1] {
                        seen[v - 1] = true;
                        perm.push(v - 1);
                    }
                }
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    if perm.is_empty() {
        log::warn!("no parseable indices in backend response; using identity permutation");
        return (0..window_size).collect();
    }
    for (v, was_seen) in seen.iter().enumerate() {
        if !was_seen {
            perm.push(v);
        }
    }
    perm
}

pub struct IdentityBackend;

impl Backend for IdentityBackend {
    fn name(&self) -> &str {
        "identity"
    }

    fn order(&mut self, request: &WindowRequest<'_>) -> Result<Vec<usize>> {
        Ok((0..request.passages.len()).collect())
    }
}

pub struct ReverseBackend;

impl Backend for ReverseBackend {
    fn name(&self) -> &str {
        "reverse"
    }

    fn order(&mut self, request: &WindowRequest<'_>) -> Result<Vec<usize>> {
        Ok((0..request.passages.len()).rev().collect())
    }
}

/// Orders each window by qrel grade descending, stable over input order.
pub struct QrelsOracleBackend {
    pub qrels: Qrels,
}

impl Backend for QrelsOracleBackend {
    fn name(&self) -> &str {
        "oracle"
    }

    fn order(&mut self, request: &WindowRequest<'_>) -> Result<Vec<usize>> {
        let mut indices: Vec<usize> = (0..request.doc_ids.len()).collect();
        indices.sort_by_key(|&i| {
            std::cmp::Reverse(self.qrels.grade(request.query_id, &request.doc_ids[i]))
        });
        Ok(indices)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    request: serde_json::Value,
    response: String,
}

/// Cache key for a request body (stable across runs).
pub fn request_cache_key(request: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(request).expect("json value serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    hex_string(&digest[..16])
}

/// One JSON-lines cache entry, as written by [`HttpBackend`]. Useful for
/// preparing replay fixtures.
pub fn cache_record_line(request: &serde_json::Value, response: &str) -> String {
    let record = CacheRecord {
        key: request_cache_key(request),
        request: request.clone(),
        response: response.to_string(),
    };
    serde_json::to_string(&record).expect("record serializes")
}

/// Chat-completion backend. Every request/response pair is appended to a
/// JSON-lines cache file; cached requests are answered without touching the
/// network, so a committed cache makes runs reproducible offline.
pub struct HttpBackend {
    base_url: Option<String>,
    model: String,
    api_key: Option<String>,
    cache_path: Option<PathBuf>,
    cache: HashMap<String, String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(
        base_url: Option<String>,
        model: String,
        api_key: Option<String>,
        cache_path: Option<&Path>,
    ) -> Result<Self> {
        let mut cache = HashMap::new();
        if let Some(path) = cache_path {
            if path.exists() {
                let contents = std::fs::read_to_string(path)?;
                for (lineno, line) in contents.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let record: CacheRecord = serde_json::from_str(line).map_err(|e| {
                        Error::DataAt {
                            path: path.display().to_string(),
                            line: lineno + 1,
                            msg: format!("bad cache line: {e}"),
                        }
                    })?;
                    cache.insert(record.key, record.response);
                }
            }
        }
        Ok(HttpBackend {
            base_url,
            model,
            api_key,
            cache_path: cache_path.map(Path::to_path_buf),
            cache,
            client: reqwest::blocking::Client::new(),
        })
    }

    fn complete(&mut self, request: &serde_json::Value) -> Result<String> {
        let key = request_cache_key(request);
        if let Some(cached) = self.cache.get(&key) {
            return Ok(cached.clone());
        }
        let Some(base_url) = &self.base_url else {
            return Err(Error::backend(
                "request not in cache and no base URL configured (set RERANK_BASE_URL)",
            ));
        };
        let url = format!("{}/chat/completions", base_url.trim_end_matches('/'));
        let mut builder = self.client.post(&url).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response: serde_json::Value = builder
            .send()
            .map_err(|e| Error::backend(format!("request to {url} failed: {e}")))?
            .error_for_status()
            .map_err(|e| Error::backend(format!("backend returned error status: {e}")))?
            .json()
            .map_err(|e| Error::backend(format!("bad JSON from backend: {e}")))?;
        let content = response["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| Error::backend("response missing choices[0].message.content"))?
            .to_string();
        self.cache.insert(key.clone(), content.clone());
        if let Some(path) = &self.cache_path {
            let record = CacheRecord { key, request: request.clone(), response: content.clone() };
            let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(file, "{}", serde_json::to_string(&record).expect("record serializes"))?;
        }
        Ok(content)
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn order(&mut self, request: &WindowRequest<'_>) -> Result<Vec<usize>> {
        let body = build_prompt(request.query, request.passages, &self.model);
        let response = self.complete(&body)?;
        Ok(parse_permutation(&response, request.passages.len()))
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_enumeration_n100() {
        let expected = vec![
            (80, 100),
            (70, 90),
            (60, 80),
            (50, 70),
            (40, 60),
            (30, 50),
            (20, 40),
            (10, 30),
            (0, 20),
        ];
        assert_eq!(sliding_windows(100, 20, 10), expected);
    }

    #[test]
    fn windows_exact_and_clamped() {
        assert_eq!(sliding_windows(20, 20, 10), vec![(0, 20)]);
        assert_eq!(sliding_windows(15, 20, 10), vec![(0, 15)]);
        assert_eq!(sliding_windows(25, 20, 10), vec![(5, 25), (0, 20)]);
    }

    #[test]
    fn windows_cover_everything() {
        for n in 1..200 {
            let windows = sliding_windows(n, 20, 10);
            let mut covered = vec![false; n];
            for (s, e) in windows {
                for c in covered.iter_mut().take(e).skip(s) {
                    *c = true;
                }
            }
            assert!(covered.iter().all(|&c| c), "n={n}");
        }
    }

    #[test]
    fn apply_identity_and_reverse() {
        let mut v = vec!["a", "b", "c", "d"];
        apply_window_permutation(&mut v, (0, 3), &[0, 1, 2]).unwrap();
        assert_eq!(v, ["a", "b", "c", "d"]);
        apply_window_permutation(&mut v, (0, 3), &[2, 1, 0]).unwrap();
        assert_eq!(v, ["c", "b", "a", "d"]);
    }

    #[test]
    fn apply_rejects_non_bijection() {
        let mut v = vec![1, 2, 3];
        assert!(apply_window_permutation(&mut v, (0, 3), &[0, 0, 1]).is_err());
        assert!(apply_window_permutation(&mut v, (0, 3), &[0, 1]).is_err());
        assert_eq!(v, [1, 2, 3]);
    }

    #[test]
    fn parse_simple_ordering() {
        assert_eq!(parse_permutation("[2] > [1]", 2), vec![1, 0]);
    }

    #[test]
    fn parse_dedups_and_completes() {
        assert_eq!(parse_permutation("[2] > [2] > [1]", 3), vec![1, 0, 2]);
    }

    #[test]
    fn parse_garbage_is_identity() {
        assert_eq!(parse_permutation("no ranking here", 4), vec![0, 1, 2, 3]);
        assert_eq!(parse_permutation("", 3), vec![0, 1, 2]);
    }

    #[test]
    fn parse_ignores_out_of_range() {
        assert_eq!(parse_permutation("[9] > [2] > [0]", 2), vec![1, 0]);
    }

    #[test]
    fn identity_backend_is_noop_on_ordering() {
        let run = Run::from_ranked_lists(
            vec![(
                "q1".to_string(),
                (0..30).map(|i| (format!("d{i:02}"), (30 - i) as f64)).collect::<Vec<_>>(),
            )],
            "t",
        );
        let documents: HashMap<String, String> =
            (0..30).map(|i| (format!("d{i:02}"), format!("text {i}"))).collect();
        let config = RerankConfig { top_k: 30, ..Default::default() };
        let out = rerank(&run, &documents, &mut IdentityBackend, &config).unwrap();
        let before: Vec<&String> = run.entries["q1"].iter().map(|e| &e.doc_id).collect();
        let after: Vec<&String> = out.entries["q1"].iter().map(|e| &e.doc_id).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn missing_document_text_is_an_error() {
        let run = Run::from_ranked_lists(
            vec![("q1".to_string(), vec![("d1".to_string(), 1.0)])],
            "t",
        );
        let documents = HashMap::new();
        let err = rerank(&run, &documents, &mut IdentityBackend, &RerankConfig {
            top_k: 1,
            window: 1,
            stride: 1,
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("d1"));
    }

    #[test]
    fn entries_beyond_top_k_untouched() {
        let run = Run::from_ranked_lists(
            vec![(
                "q1".to_string(),
                (0..10).map(|i| (format!("d{i}"), (10 - i) as f64)).collect::<Vec<_>>(),
            )],
            "t",
        );
        let documents: HashMap<String, String> =
            (0..10).map(|i| (format!("d{i}"), format!("text {i}"))).collect();
        let config = RerankConfig { top_k: 4, window: 4, stride: 2, ..Default::default() };
        let out = rerank(&run, &documents, &mut ReverseBackend, &config).unwrap();
        let after: Vec<&str> = out.entries["q1"].iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(&after[4..], &["d4", "d5", "d6", "d7", "d8", "d9"]);
        assert_eq!(&after[..4], &["d3", "d2", "d1", "d0"]);
    }

    #[test]
    fn budget_shrinks_but_keeps_passages() {
        let passages = vec!["x".repeat(100_000), "y".repeat(100_000)];
        let fitted = fit_to_budget("q", passages, 1000);
        assert_eq!(fitted.len(), 2);
        let total: usize = fitted.iter().map(String::len).sum();
        assert!(total <= 4000);
        assert!(!fitted[0].is_empty() && !fitted[1].is_empty());
    }

    #[test]
    fn prompt_lists_passages_with_identifiers() {
        let body = build_prompt("why", &["first".to_string(), "second".to_string()], "m");
        let user = body["messages"][1]["content"].as_str().unwrap();
        assert!(user.contains("[1] first"));
        assert!(user.contains("[2] second"));
        assert_eq!(body["temperature"], 0);
    }

    #[test]
    fn http_backend_replays_from_cache_without_network() {
        let dir = tempfile::tempdir().unwrap();
        let cache_path = dir.path().join("cache.jsonl");
        let body = build_prompt("q text", &["p1".to_string(), "p2".to_string()], "test-model");
        std::fs::write(&cache_path, format!("{}\n", cache_record_line(&body, "[2] > [1]"))).unwrap();

        let mut backend =
            HttpBackend::new(None, "test-model".to_string(), None, Some(&cache_path)).unwrap();
        let doc_ids = vec!["a".to_string(), "b".to_string()];
        let passages = vec!["p1".to_string(), "p2".to_string()];
        let request = WindowRequest { query_id: "q1", query: "q text", doc_ids: &doc_ids, passages: &passages };
        assert_eq!(backend.order(&request).unwrap(), vec![1, 0]);
    }

    #[test]
    fn http_backend_without_cache_or_url_fails_per_window() {
        let mut backend = HttpBackend::new(None, "m".to_string(), None, None).unwrap();
        let doc_ids = vec!["a".to_string()];
        let passages = vec!["p".to_string()];
        let request = WindowRequest { query_id: "q", query: "q", doc_ids: &doc_ids, passages: &passages };
        assert!(backend.order(&request).is_err());
    }
}
