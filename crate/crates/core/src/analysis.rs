//! Per-query comparison of two runs: query length in tokens vs. the
//! difference in nDCG@10, with length-bucket summaries.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::analyzer::{Analyzer, AnalyzerConfig};
use crate::error::{Error, Result};
use crate::eval::{ndcg_at_k, Qrels, Run};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub query_id: String,
    pub query_len: usize,
    /// ndcg@10(run_a) - ndcg@10(run_b)
    pub delta: f64,
}

/// One row per judged query, sorted by query_id. Queries with no relevant
/// documents are skipped (they carry no nDCG on either side).
pub fn per_query_delta(
    run_a: &Run,
    run_b: &Run,
    qrels: &Qrels,
    queries: &[(String, String)],
    config: &AnalyzerConfig,
) -> Result<Vec<DeltaRow>> {
    let analyzer = Analyzer::new(config.clone());
    let texts: HashMap<&str, &str> = queries
        .iter()
        .map(|(id, text)| (id.as_str(), text.as_str()))
        .collect();
    let mut rows = Vec::new();
    for (qid, list_a) in &run_a.entries {
        let Some(ndcg_a) = ndcg_at_k(list_a, qid, qrels, 10) else { continue };
        let list_b = run_b
            .entries
            .get(qid)
            .ok_or_else(|| Error::data(format!("query {qid} missing from the second run")))?;
        let ndcg_b = ndcg_at_k(list_b, qid, qrels, 10).expect("same qrels, same judged set");
        let text = texts
            .get(qid.as_str())
            .ok_or_else(|| Error::data(format!("no query text for query {qid}")))?;
        rows.push(DeltaRow {
            query_id: qid.clone(),
            query_len: analyzer.token_count(text),
            delta: ndcg_a - ndcg_b,
        });
    }
    rows.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketRow {
    /// Inclusive lower bound in tokens.
    pub lo: usize,
    /// Exclusive upper bound; None for the open-ended last bucket.
    pub hi: Option<usize>,
    pub count: usize,
    pub mean_delta: f64,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

/// Partitions rows into length buckets [0,e1), [e1,e2), ..., [en,inf).
pub fn bucket_summary(rows: &[DeltaRow], edges: &[usize]) -> Result<Vec<BucketRow>> {
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("bucket edges must be strictly increasing"));
    }
    let mut bounds = Vec::with_capacity(edges.len() + 1);
    let mut lo = 0usize;
    for &e in edges {
        bounds.push((lo, Some(e)));
        lo = e;
    }
    bounds.push((lo, None));
    let mut out: Vec<BucketRow> = bounds
        .into_iter()
        .map(|(lo, hi)| BucketRow { lo, hi, count: 0, mean_delta: 0.0, wins: 0, losses: 0, ties: 0 })
        .collect();
    for row in rows {
        let bucket = out
            .iter_mut()
            .find(|b| row.query_len >= b.lo && b.hi.is_none_or(|hi| row.query_len < hi))
            .expect("buckets cover all lengths");
        bucket.count += 1;
        bucket.mean_delta += row.delta;
        if row.delta > 0.0 {
            bucket.wins += 1;
        } else if row.delta < 0.0 {
            bucket.losses += 1;
        } else {
            bucket.ties += 1;
        }
    }
    for b in &mut out {
        if b.count > 0 {
            b.mean_delta /= b.count as f64;
        }
    }
    Ok(out)
}

pub fn rows_to_csv(rows: &[DeltaRow]) -> String {
    let mut out = String::from("query_id,query_len,delta\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.query_id, r.query_len, r.delta);
    }
    out
}

pub fn buckets_to_csv(buckets: &[BucketRow]) -> String {
    let mut out = String::from("lo,hi,count,mean_delta,wins,losses,ties\n");
    for b in buckets {
        let hi = b.hi.map_or(String::from("inf"), |h| h.to_string());
        let _ = writeln!(out, "{},{},{},{},{},{},{}", b.lo, hi, b.count, b.mean_delta, b.wins, b.losses, b.ties);
    }
    out
}
