//! Corpus-quality tooling: exact-duplicate detection over trimmed content,
//! short/zero-token statistics, and qrel adjustment across duplicate sets.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::analyzer::{Analyzer, AnalyzerConfig};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::index::Document;

/// Disjoint groups of doc_ids sharing identical trimmed content. Only groups
/// of size >= 2 are kept, ordered by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DuplicateGroups {
    pub groups: Vec<BTreeSet<String>>,
}

impl DuplicateGroups {
    pub fn num_duplicate_docs(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }
}

/// Duplicate key is the content after trimming leading/trailing whitespace,
/// with no case folding or inner-whitespace collapsing.
pub fn find_duplicates<'a, I>(corpus: I) -> DuplicateGroups
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut by_content: HashMap<&str, BTreeSet<String>> = HashMap::new();
    for doc in corpus {
        by_content
            .entry(doc.text.trim())
            .or_default()
            .insert(doc.doc_id.clone());
    }
    let mut groups: Vec<BTreeSet<String>> =
        by_content.into_values().filter(|g| g.len() >= 2).collect();
    groups.sort_by(|a, b| a.first().cmp(&b.first()));
    DuplicateGroups { groups }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusQuality {
    pub total: usize,
    pub unique: usize,
    pub unique_pct: f64,
    /// Documents with fewer than 5 tokens.
    pub short: usize,
    pub short_pct: f64,
    /// Documents with 0 tokens.
    pub zero: usize,
    pub zero_pct: f64,
}

/// Table-shaped per-corpus quality statistics. "Unique" counts distinct
/// trimmed contents; token counts use the analyzer.
pub fn quality_stats<'a, I>(corpus: I, config: &AnalyzerConfig) -> CorpusQuality
where
    I: IntoIterator<Item = &'a Document>,
{
    let analyzer = Analyzer::new(config.clone());
    let mut contents: HashMap<&str, usize> = HashMap::new();
    let mut total = 0usize;
    let mut short = 0usize;
    let mut zero = 0usize;
    for doc in corpus {
        total += 1;
        *contents.entry(doc.text.trim()).or_insert(0) += 1;
        let tokens = analyzer.token_count(&doc.text);
        if tokens < 5 {
            short += 1;
        }
        if tokens == 0 {
            zero += 1;
        }
    }
    let unique = contents.len();
    let pct = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    CorpusQuality {
        total,
        unique,
        unique_pct: pct(unique),
        short,
        short_pct: pct(short),
        zero,
        zero_pct: pct(zero),
    }
}

/// For each query and duplicate group, if any member is relevant, every
/// member receives the maximum grade in that (query, group) pair.
pub fn adjust_qrels(qrels: &Qrels, groups: &DuplicateGroups, corpus_ids: Option<&BTreeSet<String>>) -> Result<Qrels> {
    if let Some(ids) = corpus_ids {
        for group in &groups.groups {
            for member in group {
                if !ids.contains(member) {
                    return Err(Error::data(format!(
                        "duplicate group member {member} not present in the corpus id space"
                    )));
                }
            }
        }
    }
    let mut adjusted = qrels.clone();
    let mut group_of: HashMap<&String, usize> = HashMap::new();
    for (i, group) in groups.groups.iter().enumerate() {
        for member in group {
            group_of.insert(member, i);
        }
    }
    // Max relevant grade per (query, group).
    let mut group_max: HashMap<(&String, usize), u32> = HashMap::new();
    for ((qid, doc), &grade) in &qrels.grades {
        if grade > 0 {
            if let Some(&g) = group_of.get(doc) {
                let entry = group_max.entry((qid, g)).or_insert(0);
                *entry = (*entry).max(grade);
            }
        }
    }
    let mut updates = Vec::new();
    for ((qid, g), max_grade) in group_max {
        for member in &groups.groups[g] {
            updates.push(((qid.clone(), member.clone()), max_grade));
        }
    }
    for (key, max_grade) in updates {
        let entry = adjusted.grades.entry(key).or_insert(0);
        *entry = (*entry).max(max_grade);
    }
    Ok(adjusted)
}

/// Pairs present in `adjusted` but not in `original` (the "missing gold IDs").
pub fn added_pairs(original: &Qrels, adjusted: &Qrels) -> usize {
    adjusted
        .grades
        .iter()
        .filter(|(key, &grade)| grade > 0 && original.grades.get(*key).copied().unwrap_or(0) == 0)
        .count()
}
