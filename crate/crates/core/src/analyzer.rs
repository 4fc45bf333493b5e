//! Text-to-terms pipeline applied identically to documents, queries, and
//! token-count statistics: segmentation, lowercasing, stopword removal,
//! Porter stemming.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::porter;

/// Bundled classic English stop set, one term per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stemmer {
    None,
    Porter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub lowercase: bool,
    /// Stopwords in file order. Comparison happens after lowercasing and
    /// before stemming.
    pub stopwords: Vec<String>,
    pub stem: Stemmer,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            lowercase: true,
            stopwords: parse_stopword_lines(DEFAULT_STOPWORDS),
            stem: Stemmer::Porter,
        }
    }
}

impl AnalyzerConfig {
    /// Config that only segments and lowercases: no stopwords, no stemming.
    pub fn plain() -> Self {
        AnalyzerConfig {
            lowercase: true,
            stopwords: Vec::new(),
            stem: Stemmer::None,
        }
    }

    pub fn with_stopword_file(mut self, contents: &str) -> Self {
        self.stopwords = parse_stopword_lines(contents);
        self
    }
}

/// Parses a stopword file: one term per line, '#' comments, blank lines
/// ignored.
pub fn parse_stopword_lines(contents: &str) -> Vec<String> {
    contents
        .lines()
        .map(|l| match l.find('#') {
            Some(i) => &l[..i],
            None => l,
        })
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn load_stopword_file(path: &std::path::Path) -> Result<Vec<String>> {
    let contents = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read stopword file {}: {e}", path.display())))?;
    Ok(parse_stopword_lines(&contents))
}

/// Ordered terms surviving the pipeline. Its length is the token count used
/// everywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermSequence {
    pub terms: Vec<String>,
}

impl TermSequence {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Reusable analyzer with the stopword lookup prebuilt.
#[derive(Debug, Clone)]
pub struct Analyzer {
    config: AnalyzerConfig,
    stopset: HashSet<String>,
}

impl Analyzer {
    pub fn new(config: AnalyzerConfig) -> Self {
        let stopset = config.stopwords.iter().cloned().collect();
        Analyzer { config, stopset }
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.config
    }

    pub fn analyze(&self, text: &str) -> TermSequence {
        let mut terms = Vec::new();
        for raw in segment(text) {
            let mut term = if self.config.lowercase {
                raw.to_lowercase()
            } else {
                raw
            };
            strip_possessive(&mut term);
            if term.is_empty() || self.stopset.contains(&term) {
                continue;
            }
            if self.config.stem == Stemmer::Porter {
                term = porter::stem(&term);
            }
            terms.push(term);
        }
        TermSequence { terms }
    }

    pub fn token_count(&self, text: &str) -> usize {
        self.analyze(text).len()
    }
}

/// Convenience wrapper building a throwaway [`Analyzer`].
pub fn analyze(text: &str, config: &AnalyzerConfig) -> TermSequence {
    Analyzer::new(config.clone()).analyze(text)
}

/// Splits on maximal runs of non-alphanumeric characters. An apostrophe with
/// alphanumerics on both sides stays inside the token so possessives can be
/// stripped afterwards.
fn segment(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn strip_possessive(term: &mut String) {
    if term.ends_with("'s") {
        term.truncate(term.len() - 2);
    }
    // Tokens like "o'clock" keep their interior apostrophe.
}
