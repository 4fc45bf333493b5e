//! BM25 scoring: document-side term weighting, bag-of-words and query-side
//! BM25 query vectors, quantized and accurate length normalization, and
//! top-k search over an inverted index.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::Index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdfVariant {
    Lucene,
    Robertson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    Quantized,
    Accurate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryWeighting {
    Bow,
    Bm25q,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BM25Params {
    pub k1: f64,
    pub b: f64,
    pub idf_variant: IdfVariant,
    pub norm_mode: NormMode,
    pub query_weighting: QueryWeighting,
}

impl Default for BM25Params {
    fn default() -> Self {
        BM25Params {
            k1: 0.9,
            b: 0.4,
            idf_variant: IdfVariant::Lucene,
            norm_mode: NormMode::Quantized,
            query_weighting: QueryWeighting::Bow,
        }
    }
}

impl BM25Params {
    pub fn validate(&self) -> Result<()> {
        if self.k1 < 0.0 {
            return Err(Error::usage(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::usage(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Sparse query vector plus the analyzed query length.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryVector {
    pub weights: HashMap<String, f64>,
    pub query_len: u32,
}

impl QueryVector {
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHit {
    pub doc_id: String,
    pub score: f64,
}

pub fn idf(df: u64, n: u64, variant: IdfVariant) -> Result<f64> {
    if n == 0 {
        return Err(Error::usage("idf requires N >= 1"));
    }
    if df > n {
        return Err(Error::usage(format!("df ({df}) exceeds N ({n})")));
    }
    let df = df as f64;
    let n = n as f64;
    Ok(match variant {
        IdfVariant::Lucene => (1.0 + (n - df + 0.5) / (df + 0.5)).ln(),
        IdfVariant::Robertson => ((n - df + 0.5) / (df + 0.5)).ln().max(0.0),
    })
}

// Length quantization: codes 0..=63 store the length exactly; codes 64..=255
// are geometric buckets covering [64, 2^24) with the bucket's representative
// at the rounded geometric mean, keeping relative error under 7%.
const EXACT_MAX: u32 = 63;
const NUM_GEOMETRIC: usize = 192;
const RANGE_TOP: f64 = (1u32 << 24) as f64;

struct QuantTable {
    /// Lower bound of each geometric bucket (len 193; last entry is 2^24).
    bounds: Vec<u32>,
    /// Representative value per geometric bucket.
    reps: Vec<u32>,
}

fn quant_table() -> &'static QuantTable {
    static TABLE: OnceLock<QuantTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let base = 64.0f64;
        let ratio = (RANGE_TOP / base).powf(1.0 / NUM_GEOMETRIC as f64);
        let mut bounds = Vec::with_capacity(NUM_GEOMETRIC + 1);
        for i in 0..=NUM_GEOMETRIC {
            bounds.push((base * ratio.powi(i as i32)).round() as u32);
        }
        bounds[0] = EXACT_MAX + 1;
        *bounds.last_mut().unwrap() = 1 << 24;
        let reps = (0..NUM_GEOMETRIC)
            .map(|i| {
                let lo = bounds[i] as f64;
                let hi = (bounds[i + 1] - 1) as f64;
                ((lo * hi).sqrt().round() as u32).clamp(bounds[i], bounds[i + 1] - 1)
            })
            .collect();
        QuantTable { bounds, reps }
    })
}

/// Maps a document length to one byte. Monotone; exact for lengths 0..=63.
pub fn quantize_len(len: u32) -> u8 {
    if len <= EXACT_MAX {
        return len as u8;
    }
    let table = quant_table();
    let capped = len.min((1 << 24) - 1);
    // partition_point: first bucket whose lower bound exceeds `capped`.
    let bucket = table.bounds.partition_point(|&b| b <= capped) - 1;
    (64 + bucket.min(NUM_GEOMETRIC - 1)) as u8
}

/// Representative length for a quantization code.
pub fn dequantize_len(code: u8) -> u32 {
    if code as u32 <= EXACT_MAX {
        return code as u32;
    }
    quant_table().reps[code as usize - 64]
}

/// Core BM25 document-side term weight.
pub fn doc_term_weight(tf: u32, doc_len: u32, avgdl: f64, df: u64, n: u64, params: &BM25Params) -> Result<f64> {
    if avgdl == 0.0 {
        return Err(Error::data("degenerate corpus: avgdl is zero"));
    }
    let idf = idf(df, n, params.idf_variant)?;
    let tf = tf as f64;
    let norm = 1.0 - params.b + params.b * doc_len as f64 / avgdl;
    Ok(idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm))
}

/// Builds the query vector under the configured query weighting. Queries that
/// analyze to zero tokens yield an empty vector.
pub fn make_query_vector(query: &str, index: &Index, params: &BM25Params) -> Result<QueryVector> {
    params.validate()?;
    let terms = index.analyzer().analyze(query);
    let query_len = terms.len() as u32;
    let mut qtf: HashMap<String, u32> = HashMap::new();
    for t in terms.terms {
        *qtf.entry(t).or_insert(0) += 1;
    }
    let mut weights = HashMap::with_capacity(qtf.len());
    match params.query_weighting {
        QueryWeighting::Bow => {
            for (term, count) in qtf {
                weights.insert(term, count as f64);
            }
        }
        QueryWeighting::Bm25q => {
            // The query is weighted as if it were a document drawn from the
            // corpus: avgdl and idf come from the corpus statistics.
            let avgdl = index.stats.avgdl;
            if avgdl == 0.0 {
                return Err(Error::data("degenerate corpus: avgdl is zero"));
            }
            let n = index.stats.num_docs;
            for (term, count) in qtf {
                let df = index.stats.df(&term);
                let idf = idf(df, n, params.idf_variant)?;
                let tf = count as f64;
                let norm = 1.0 - params.b + params.b * query_len as f64 / avgdl;
                let w = idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
                if w > 0.0 {
                    weights.insert(term, w);
                }
            }
        }
    }
    Ok(QueryVector { weights, query_len })
}

fn doc_len_for(index: &Index, doc: usize, mode: NormMode) -> u32 {
    match mode {
        NormMode::Accurate => index.doc_len_exact[doc],
        NormMode::Quantized => dequantize_len(index.doc_len_quantized[doc]),
    }
}

/// Scores every document matching at least one query term and returns the
/// top k, ordered by score descending with ties broken by external doc_id.
pub fn search(index: &Index, query: &str, params: &BM25Params, k: usize) -> Result<Vec<ScoredHit>> {
    let vector = make_query_vector(query, index, params)?;
    search_with_vector(index, &vector, params, k)
}

pub fn search_with_vector(
    index: &Index,
    vector: &QueryVector,
    params: &BM25Params,
    k: usize,
) -> Result<Vec<ScoredHit>> {
    params.validate()?;
    if k == 0 {
        return Err(Error::usage("k must be >= 1"));
    }
    if vector.is_empty() {
        return Ok(Vec::new());
    }
    if index.stats.avgdl == 0.0 {
        return Err(Error::data("degenerate corpus: avgdl is zero"));
    }

    let mut scores: HashMap<u32, f64> = HashMap::new();
    // Deterministic term order so float accumulation is reproducible.
    let mut terms: Vec<(&String, &f64)> = vector.weights.iter().collect();
    terms.sort_unstable_by_key(|(t, _)| t.as_str());
    for (term, &qw) in terms {
        let Some(postings) = index.postings.get(term) else {
            continue; // out-of-corpus term: zero contribution
        };
        let df = postings.len() as u64;
        for posting in postings {
            let doc_len = doc_len_for(index, posting.doc as usize, params.norm_mode);
            let w = doc_term_weight(
                posting.tf,
                doc_len,
                index.stats.avgdl,
                df,
                index.stats.num_docs,
                params,
            )?;
            *scores.entry(posting.doc).or_insert(0.0) += qw * w;
        }
    }

    let mut hits: Vec<(u32, f64)> = scores.into_iter().collect();
    hits.sort_unstable_by(|a, b| compare_hits(a.1, &index.doc_ids[a.0 as usize], b.1, &index.doc_ids[b.0 as usize]));
    hits.truncate(k);
    Ok(hits
        .into_iter()
        .map(|(doc, score)| ScoredHit { doc_id: index.doc_ids[doc as usize].clone(), score })
        .collect())
}

/// Score descending, then doc_id ascending.
pub fn compare_hits(score_a: f64, id_a: &str, score_b: f64, id_b: &str) -> Ordering {
    score_b
        .partial_cmp(&score_a)
        .unwrap_or(Ordering::Equal)
        .then_with(|| id_a.cmp(id_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::AnalyzerConfig;
    use crate::index::{build_index, Document};

    fn fixture() -> Index {
        build_index(
            vec![
                Document { doc_id: "d1".into(), text: "cat cat dog".into() },
                Document { doc_id: "d2".into(), text: "dog bird".into() },
            ],
            &AnalyzerConfig::plain(),
        )
        .unwrap()
    }

    fn accurate(query_weighting: QueryWeighting) -> BM25Params {
        BM25Params { norm_mode: NormMode::Accurate, query_weighting, ..Default::default() }
    }

    #[test]
    fn idf_lucene_values() {
        assert!((idf(1, 2, IdfVariant::Lucene).unwrap() - 2.0f64.ln()).abs() < 1e-12);
        assert!((idf(0, 10, IdfVariant::Lucene).unwrap() - 22.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn idf_robertson_floored_at_zero() {
        assert_eq!(idf(10, 10, IdfVariant::Robertson).unwrap(), 0.0);
    }

    #[test]
    fn idf_df_above_n_rejected() {
        assert!(idf(3, 2, IdfVariant::Lucene).is_err());
    }

    #[test]
    fn quantize_exact_range() {
        for l in 0..=63u32 {
            assert_eq!(dequantize_len(quantize_len(l)), l);
        }
    }

    #[test]
    fn quantize_monotone_spot_checks() {
        assert!(quantize_len(64) <= quantize_len(100));
        assert!(quantize_len(100) <= quantize_len(10_000));
    }

    #[test]
    fn doc_term_weight_fixture_value() {
        let params = accurate(QueryWeighting::Bow);
        let w = doc_term_weight(2, 3, 2.5, 1, 2, &params).unwrap();
        assert!((w - 0.8862874).abs() < 1e-4, "{w}");
    }

    #[test]
    fn b_zero_ignores_doc_len() {
        let params = BM25Params { b: 0.0, ..accurate(QueryWeighting::Bow) };
        let w1 = doc_term_weight(2, 3, 2.5, 1, 2, &params).unwrap();
        let w2 = doc_term_weight(2, 3000, 2.5, 1, 2, &params).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn tf_saturation_bound() {
        let params = accurate(QueryWeighting::Bow);
        let bound = idf(1, 2, IdfVariant::Lucene).unwrap() * (params.k1 + 1.0);
        let w = doc_term_weight(1_000_000, 3, 2.5, 1, 2, &params).unwrap();
        assert!(w < bound && w > bound * 0.999);
    }

    #[test]
    fn bow_vector_counts_terms() {
        let index = fixture();
        let v = make_query_vector("cat cat dog", &index, &accurate(QueryWeighting::Bow)).unwrap();
        assert_eq!(v.weights["cat"], 2.0);
        assert_eq!(v.weights["dog"], 1.0);
        let single = make_query_vector("cat", &index, &accurate(QueryWeighting::Bow)).unwrap();
        assert_eq!(single.weights["cat"], 1.0);
        assert_eq!(single.query_len, 1);
    }

    #[test]
    fn bm25q_vector_fixture_value() {
        let index = fixture();
        let v = make_query_vector("cat", &index, &accurate(QueryWeighting::Bm25q)).unwrap();
        assert!((v.weights["cat"] - 0.7820).abs() < 1e-4, "{}", v.weights["cat"]);
    }

    #[test]
    fn search_fixture_bow() {
        let index = fixture();
        let hits = search(&index, "cat", &accurate(QueryWeighting::Bow), 10).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "d1");
        assert!((hits[0].score - 0.8862874).abs() < 1e-4);
    }

    #[test]
    fn search_fixture_bm25q() {
        let index = fixture();
        let hits = search(&index, "cat", &accurate(QueryWeighting::Bm25q), 10).unwrap();
        assert_eq!(hits[0].doc_id, "d1");
        assert!((hits[0].score - 0.6931).abs() < 1e-3, "{}", hits[0].score);
    }

    #[test]
    fn empty_query_returns_empty() {
        let index = fixture();
        let hits = search(&index, "", &accurate(QueryWeighting::Bow), 10).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn out_of_corpus_terms_contribute_zero() {
        let index = fixture();
        let a = search(&index, "cat", &accurate(QueryWeighting::Bow), 10).unwrap();
        let b = search(&index, "cat zebra", &accurate(QueryWeighting::Bow), 10).unwrap();
        assert_eq!(a, b);
    }
}
