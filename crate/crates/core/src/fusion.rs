//! Rank fusion: reciprocal rank fusion and min-max-normalized score
//! averaging over two or more runs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::eval::{Run, RunEntry};
use crate::scoring::compare_hits;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMethod {
    Rrf,
    NormAvg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub method: FusionMethod,
    pub rrf_k: f64,
    /// How deep into each input list to look; None means the full list.
    pub depth: Option<usize>,
    pub output_k: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { method: FusionMethod::Rrf, rrf_k: 60.0, depth: None, output_k: 1000 }
    }
}

impl FusionConfig {
    fn validate(&self) -> Result<()> {
        if self.rrf_k <= 0.0 {
            return Err(Error::usage("rrf_k must be > 0"));
        }
        if let Some(depth) = self.depth {
            if depth < self.output_k {
                return Err(Error::usage("depth must be >= output_k (or unlimited)"));
            }
        }
        Ok(())
    }
}

pub fn fuse(runs: &[Run], config: &FusionConfig, tag: &str) -> Result<Run> {
    match config.method {
        FusionMethod::Rrf => rrf_fuse(runs, config, tag),
        FusionMethod::NormAvg => norm_avg_fuse(runs, config, tag),
    }
}

/// fused_score(d) = sum over runs of 1/(rrf_k + rank(d)); documents absent
/// from a run contribute nothing for it.
pub fn rrf_fuse(runs: &[Run], config: &FusionConfig, tag: &str) -> Result<Run> {
    fuse_with(runs, config, tag, |list, _qid, scores| {
        for e in list {
            *scores.entry(e.doc_id.clone()).or_insert(0.0) += 1.0 / (config.rrf_k + e.rank as f64);
        }
    })
}

/// Min-max normalizes each run's scores over its own retrieved list, then
/// averages across runs with absent documents counted as 0.
pub fn norm_avg_fuse(runs: &[Run], config: &FusionConfig, tag: &str) -> Result<Run> {
    let num_runs = runs.len() as f64;
    fuse_with(runs, config, tag, |list, _qid, scores| {
        let min = list.iter().map(|e| e.score).fold(f64::INFINITY, f64::min);
        let max = list.iter().map(|e| e.score).fold(f64::NEG_INFINITY, f64::max);
        for e in list {
            // Constant-score lists (including single entries) normalize to 1.
            let norm = if max > min { (e.score - min) / (max - min) } else { 1.0 };
            *scores.entry(e.doc_id.clone()).or_insert(0.0) += norm / num_runs;
        }
    })
}

fn fuse_with<F>(runs: &[Run], config: &FusionConfig, tag: &str, mut accumulate: F) -> Result<Run>
where
    F: FnMut(&[RunEntry], &str, &mut HashMap<String, f64>),
{
    config.validate()?;
    if runs.len() < 2 {
        return Err(Error::usage("fusion requires at least two runs"));
    }
    let all_queries: BTreeSet<&String> = runs.iter().flat_map(|r| r.entries.keys()).collect();
    let mut entries = BTreeMap::new();
    for qid in all_queries {
        let mut scores: HashMap<String, f64> = HashMap::new();
        let mut present = 0usize;
        for run in runs {
            let Some(list) = run.entries.get(qid) else { continue };
            present += 1;
            let depth = config.depth.unwrap_or(list.len());
            accumulate(&list[..depth.min(list.len())], qid, &mut scores);
        }
        if present < runs.len() {
            log::warn!("query {qid} missing from {} of {} runs; fusing the present lists", runs.len() - present, runs.len());
        }
        let mut fused: Vec<(String, f64)> = scores.into_iter().collect();
        fused.sort_by(|a, b| compare_hits(a.1, &a.0, b.1, &b.0));
        fused.truncate(config.output_k);
        let list = fused
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RunEntry { doc_id, rank: i as u32 + 1, score })
            .collect();
        entries.insert(qid.clone(), list);
    }
    Ok(Run { entries, tag: tag.to_string() })
}
