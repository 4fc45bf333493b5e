//! TREC run / qrels parsing and retrieval metrics: nDCG@k and Recall@k with
//! macro averages and category roll-ups.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// One retrieved document in a ranked list.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
}

/// Per-query ranked lists. BTreeMap keeps query iteration deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Run {
    pub entries: BTreeMap<String, Vec<RunEntry>>,
    pub tag: String,
}

impl Run {
    pub fn from_ranked_lists<I, J>(lists: I, tag: &str) -> Run
    where
        I: IntoIterator<Item = (String, J)>,
        J: IntoIterator<Item = (String, f64)>,
    {
        let mut entries = BTreeMap::new();
        for (qid, list) in lists {
            let ranked = list
                .into_iter()
                .enumerate()
                .map(|(i, (doc_id, score))| RunEntry { doc_id, rank: i as u32 + 1, score })
                .collect();
            entries.insert(qid, ranked);
        }
        Run { entries, tag: tag.to_string() }
    }

    pub fn num_queries(&self) -> usize {
        self.entries.len()
    }
}

/// Relevance grades; unlisted pairs mean grade 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Qrels {
    pub grades: HashMap<(String, String), u32>,
}

impl Qrels {
    pub fn grade(&self, qid: &str, doc_id: &str) -> u32 {
        self.grades
            .get(&(qid.to_string(), doc_id.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Relevant (grade > 0) docs per query.
    pub fn relevant_by_query(&self) -> HashMap<&str, Vec<(&str, u32)>> {
        let mut out: HashMap<&str, Vec<(&str, u32)>> = HashMap::new();
        for ((qid, doc), &grade) in &self.grades {
            if grade > 0 {
                out.entry(qid).or_default().push((doc, grade));
            }
        }
        out
    }
}

/// Parses a TREC run file: "qid Q0 docid rank score tag". If a query's ranks
/// disagree with its scores the list is re-sorted with a warning.
pub fn parse_run(path: &Path) -> Result<Run> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut entries: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut tag = String::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| Error::DataAt {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: msg.to_string(),
        };
        if fields.len() != 6 {
            return Err(err(&format!("expected 6 fields, got {}", fields.len())));
        }
        let qid = fields[0].to_string();
        let doc_id = fields[2].to_string();
        let rank: u32 = fields[3].parse().map_err(|_| err("bad rank"))?;
        let score: f64 = fields[4].parse().map_err(|_| err("bad score"))?;
        if !seen.insert((qid.clone(), doc_id.clone())) {
            return Err(err(&format!("duplicate document {doc_id} for query {qid}")));
        }
        tag = fields[5].to_string();
        entries.entry(qid).or_default().push(RunEntry { doc_id, rank, score });
    }
    for (qid, list) in &mut entries {
        let ranks_consecutive = list.iter().enumerate().all(|(i, e)| e.rank == i as u32 + 1);
        if !ranks_consecutive {
            return Err(Error::data(format!(
                "{}: query {qid}: non-consecutive ranks",
                path.display()
            )));
        }
        let scores_sorted = list.windows(2).all(|w| w[0].score >= w[1].score);
        if !scores_sorted {
            log::warn!(
                "{}: query {qid}: ranks disagree with scores, re-sorting",
                path.display()
            );
            list.sort_by(|a, b| crate::scoring::compare_hits(a.score, &a.doc_id, b.score, &b.doc_id));
            for (i, e) in list.iter_mut().enumerate() {
                e.rank = i as u32 + 1;
            }
        }
    }
    Ok(Run { entries, tag })
}

/// Parses a TREC qrels file: "qid 0 docid grade".
pub fn parse_qrels(path: &Path) -> Result<Qrels> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut grades = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| Error::DataAt {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: msg.to_string(),
        };
        if fields.len() != 4 {
            return Err(err(&format!("expected 4 fields, got {}", fields.len())));
        }
        let grade: u32 = fields[3].parse().map_err(|_| err("bad relevance grade"))?;
        grades.insert((fields[0].to_string(), fields[2].to_string()), grade);
    }
    Ok(Qrels { grades })
}

pub fn write_run<W: Write>(run: &Run, w: &mut W) -> Result<()> {
    for (qid, list) in &run.entries {
        for e in list {
            writeln!(w, "{qid} Q0 {} {} {:.6} {}", e.doc_id, e.rank, e.score, run.tag)?;
        }
    }
    Ok(())
}

pub fn write_qrels<W: Write>(qrels: &Qrels, w: &mut W) -> Result<()> {
    let mut rows: Vec<(&(String, String), &u32)> = qrels.grades.iter().collect();
    rows.sort();
    for ((qid, doc), grade) in rows {
        writeln!(w, "{qid} 0 {doc} {grade}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct QueryMetrics {
    pub ndcg_at_10: f64,
    pub recall_at_100: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EvalReport {
    pub per_query: BTreeMap<String, QueryMetrics>,
    /// Macro averages over judged queries.
    pub macro_ndcg_at_10: f64,
    pub macro_recall_at_100: f64,
    pub num_judged_queries: usize,
}

/// Exponential-gain nDCG@k for one ranked list. Returns None when the query
/// has no relevant documents.
pub fn ndcg_at_k(ranked: &[RunEntry], qid: &str, qrels: &Qrels, k: usize) -> Option<f64> {
    let mut grades: Vec<u32> = qrels
        .grades
        .iter()
        .filter(|((q, _), &g)| q == qid && g > 0)
        .map(|(_, &g)| g)
        .collect();
    if grades.is_empty() {
        return None;
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, e)| {
            let rel = qrels.grade(qid, &e.doc_id);
            (2f64.powi(rel as i32) - 1.0) / ((i + 2) as f64).log2()
        })
        .sum();
    grades.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &rel)| (2f64.powi(rel as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum();
    Some(dcg / idcg)
}

/// Recall@k for one ranked list. None when the query has no relevant docs.
pub fn recall_at_k(ranked: &[RunEntry], qid: &str, qrels: &Qrels, k: usize) -> Option<f64> {
    let relevant: HashSet<&str> = qrels
        .grades
        .iter()
        .filter(|((q, _), &g)| q == qid && g > 0)
        .map(|((_, d), _)| d.as_str())
        .collect();
    if relevant.is_empty() {
        return None;
    }
    let found = ranked
        .iter()
        .take(k)
        .filter(|e| relevant.contains(e.doc_id.as_str()))
        .count();
    Some(found as f64 / relevant.len() as f64)
}

/// Evaluates a run against qrels. Queries with no relevant documents are
/// excluded from macro averages with a warning.
pub fn evaluate(run: &Run, qrels: &Qrels) -> EvalReport {
    let mut per_query = BTreeMap::new();
    let mut sum_ndcg = 0.0;
    let mut sum_recall = 0.0;
    let mut judged = 0usize;
    for (qid, ranked) in &run.entries {
        match (
            ndcg_at_k(ranked, qid, qrels, 10),
            recall_at_k(ranked, qid, qrels, 100),
        ) {
            (Some(ndcg), Some(recall)) => {
                sum_ndcg += ndcg;
                sum_recall += recall;
                judged += 1;
                per_query.insert(qid.clone(), QueryMetrics { ndcg_at_10: ndcg, recall_at_100: recall });
            }
            _ => {
                log::warn!("query {qid} has no relevant documents, excluded from macro averages");
            }
        }
    }
    EvalReport {
        per_query,
        macro_ndcg_at_10: if judged > 0 { sum_ndcg / judged as f64 } else { 0.0 },
        macro_recall_at_100: if judged > 0 { sum_recall / judged as f64 } else { 0.0 },
        num_judged_queries: judged,
    }
}

/// Mean of task-level means per category, plus the overall mean of task
/// means (the "Overall Average" row).
pub fn category_means(
    task_means: &BTreeMap<String, f64>,
    categories: &BTreeMap<String, Vec<String>>,
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (category, tasks) in categories {
        let values: Vec<f64> = tasks.iter().filter_map(|t| task_means.get(t).copied()).collect();
        if !values.is_empty() {
            out.insert(category.clone(), values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    if !task_means.is_empty() {
        let all: f64 = task_means.values().sum::<f64>() / task_means.len() as f64;
        out.insert("Overall Average".to_string(), all);
    }
    out
}

/// Aligned text table for terminal output.
pub fn format_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>10} {:>12}", "query", "ndcg@10", "recall@100");
    for (qid, m) in &report.per_query {
        let _ = writeln!(out, "{:<24} {:>10.4} {:>12.4}", qid, m.ndcg_at_10, m.recall_at_100);
    }
    let _ = writeln!(
        out,
        "{:<24} {:>10.4} {:>12.4}",
        "macro", report.macro_ndcg_at_10, report.macro_recall_at_100
    );
    out
}
