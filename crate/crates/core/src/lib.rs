//! Lexical retrieval toolkit: BM25 variants (bag-of-words and query-side
//! BM25 query vectors, quantized and accurate length normalization), rank
//! fusion, TREC-style evaluation, corpus hygiene tooling, and sliding-window
//! listwise reranking orchestration.

pub mod analysis;
pub mod analyzer;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod hygiene;
pub mod index;
pub mod porter;
pub mod rerank;
pub mod scoring;

pub use analyzer::{analyze, Analyzer, AnalyzerConfig, TermSequence};
pub use error::{Error, Result};
pub use eval::{evaluate, parse_qrels, parse_run, EvalReport, Qrels, Run};
pub use fusion::{fuse, norm_avg_fuse, rrf_fuse, FusionConfig, FusionMethod};
pub use index::{build_index, load_index, save_index, CorpusStats, Document, Index};
pub use scoring::{
    idf, make_query_vector, search, BM25Params, IdfVariant, NormMode, QueryVector,
    QueryWeighting, ScoredHit,
};
